"""Sequential quadratic programming over a product of probability simplexes.

Each major iteration solves

    min_d  0.5 d'Bd + g'd   s.t.  sum of d over each block = -c_b(x),  x + d >= 0

with a primal active-set method, picks the step length by halving on an L1
exact-penalty merit function, and refreshes ``B`` (an approximation of the
Lagrangian Hessian) with Powell's damped BFGS update.
"""

from dataclasses import dataclass, field

import numpy as np

from .model import Objective
from .trace import FitResult, SolverTrace


class DegenerateQPError(RuntimeError):
    """The active-set loop did not terminate within its iteration cap."""


@dataclass(frozen=True)
class SqpConfig:
    kkt_tol: float = 1e-6
    max_iter: int = 500
    max_line_search: int = 30
    qp_active_set_max: int = 200
    armijo: float = 1e-4
    initial_scaling: bool = True  # rescale B = I by y'y/s'y before the first update

    def __post_init__(self):
        if not (self.kkt_tol > 0 and self.max_iter > 0 and self.max_line_search > 0
                and self.qp_active_set_max > 0):
            raise ValueError("SQP limits must be positive")


@dataclass
class QpSolution:
    d: np.ndarray
    lam: np.ndarray  # one multiplier per block equality
    mu: np.ndarray  # one multiplier per coordinate bound, zero when inactive
    iterations: int
    active: np.ndarray = field(repr=False, default=None)


def _equality_step(B, r, geom, fixed):
    """Minimize 0.5 p'Bp + r'p with block sums of p zero and fixed coordinates at 0.

    Null-space method: p = Z u with Z spanning the admissible moves.
    """
    Z = geom.tangent_basis(fixed)
    if Z.shape[1] == 0:
        return np.zeros(geom.dim)
    H = Z.T @ B @ Z
    chol = np.linalg.cholesky(H)
    u = -np.linalg.solve(chol.T, np.linalg.solve(chol, Z.T @ r))
    return Z @ u


def _multipliers(grad_qp, geom, fixed):
    """Block multipliers from the free coordinates, then bound multipliers."""
    free = ~fixed
    sums = np.bincount(geom.block_of[free], weights=grad_qp[free], minlength=geom.n_blocks)
    cnt = np.bincount(geom.block_of[free], minlength=geom.n_blocks)
    lam = np.where(cnt > 0, sums / np.maximum(cnt, 1), 0.0)
    mu = np.where(fixed, grad_qp - lam[geom.block_of], 0.0)
    return lam, mu


def qp_subproblem(theta, g, B, geom, max_iter=200, tol=1e-10):
    """Solve the SQP direction subproblem at ``theta`` by a primal active-set method."""
    theta = np.asarray(theta, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    lower = -theta
    # feasible start: the move to the projection satisfies sums and bounds
    d = geom.project(theta) - theta
    fixed = d <= lower + 1e-15
    d[fixed] = lower[fixed]
    scale = 1.0 + np.abs(g).max()
    # after an unblocked full step d already minimizes over the current face;
    # re-solving there only yields round-off when B is ill-conditioned
    on_face_min = False
    for it in range(1, max_iter + 1):
        r = B @ d + g
        if on_face_min:
            p = np.zeros_like(d)
        else:
            p = _equality_step(B, r, geom, fixed)
        if on_face_min or np.abs(p).max() <= 1e-13 * (1.0 + np.abs(d).max()):
            on_face_min = False
            lam, mu = _multipliers(r, geom, fixed)
            if not fixed.any() or mu[fixed].min() >= -tol * scale:
                return QpSolution(d, lam, np.where(fixed, np.maximum(mu, 0.0), 0.0), it, fixed)
            j = np.flatnonzero(fixed)[np.argmin(mu[fixed])]
            fixed[j] = False
            continue
        blocking = ~fixed & (p < 0)
        alpha, hit = 1.0, -1
        if blocking.any():
            idx = np.flatnonzero(blocking)
            ratios = (d[idx] - lower[idx]) / -p[idx]
            m = np.argmin(ratios)
            if ratios[m] < 1.0:
                alpha, hit = max(ratios[m], 0.0), idx[m]
        d = d + alpha * p
        if hit >= 0:
            fixed[hit] = True
            d[hit] = lower[hit]
        else:
            on_face_min = True
    raise DegenerateQPError(f"active-set QP did not finish in {max_iter} iterations")


def constraint_values(theta, geom):
    """Equality residuals ``sum(block) - 1``, one per block."""
    return geom.block_sums(theta) - 1.0


def merit_value(f_value, theta, geom, rho_eq, rho_bound):
    """L1 exact-penalty merit: f + sum rho|c| + sum rho_bound |min(0, theta)|."""
    c = constraint_values(theta, geom)
    return float(
        f_value + rho_eq @ np.abs(c) + rho_bound @ np.abs(np.minimum(theta, 0.0))
    )


def update_penalty(rho_prev, mu):
    """Powell's rule: rho = max((rho_prev + |mu|) / 2, |mu|), elementwise."""
    a = np.abs(mu)
    return np.maximum(0.5 * (rho_prev + a), a)


def lagrangian_gradient(g, lam, geom):
    """Gradient in x of f(x) - sum_b lam_b c_b(x) for the block equalities."""
    return g - lam[geom.block_of]


def damped_bfgs_update(B, s, eta_vec, curvature_floor=1e-14):
    """Powell-damped BFGS update; returns ``(B_new, info)``.

    ``info`` carries ``applied``, ``gamma``, ``qs`` (q's) and ``sBs``. The update
    is skipped when s'Bs is not above ``curvature_floor``.
    """
    Bs = B @ s
    sBs = float(s @ Bs)
    if not sBs > curvature_floor:
        return B, {"applied": False, "gamma": None, "qs": None, "sBs": sBs}
    s_eta = float(s @ eta_vec)
    gamma = 1.0 if s_eta >= 0.2 * sBs else 0.8 * sBs / (sBs - s_eta)
    q = gamma * eta_vec + (1.0 - gamma) * Bs
    qs = float(q @ s)
    B_new = B + np.outer(q, q) / qs - np.outer(Bs, Bs) / sBs
    B_new = 0.5 * (B_new + B_new.T)
    return B_new, {"applied": True, "gamma": gamma, "qs": qs, "sBs": sBs}


def kkt_residual(theta, g, geom):
    """Projected-gradient stationarity (inf-norm) plus constraint violation."""
    stat = np.abs(geom.project(theta - g) - theta).max()
    return float(stat + geom.constraint_residual(theta))


def fit_sqp(data, init, cfg=SqpConfig(), *, keep_iterates=False):
    """Fit a latent class model by SQP from ``init``."""
    obj = Objective(data, init.K)
    geom = obj.layout
    trace = SolverTrace(geom, keep_iterates)
    x = init.pack()
    f, g = obj.value_grad(x)
    trace.record(x, -f)
    B = np.eye(geom.dim)
    rho_eq = np.zeros(geom.n_blocks)
    rho_bound = np.zeros(geom.dim)
    updates = []
    converged, message = False, "max_iter reached"
    it = 0
    while True:
        if kkt_residual(x, g, geom) <= cfg.kkt_tol:
            converged, message = True, "converged"
            break
        if it >= cfg.max_iter:
            break
        try:
            qp = qp_subproblem(x, g, B, geom, cfg.qp_active_set_max)
        except DegenerateQPError as exc:
            message = str(exc)
            break
        d = qp.d
        rho_eq = update_penalty(rho_eq, qp.lam)
        rho_bound = update_penalty(rho_bound, qp.mu)
        phi0 = merit_value(f, x, geom, rho_eq, rho_bound)
        c = constraint_values(x, geom)
        slope = float(g @ d - rho_eq @ np.abs(c) - rho_bound @ np.abs(np.minimum(x, 0.0)))
        alpha = 1.0
        for _ in range(cfg.max_line_search):
            x_new = x + alpha * d
            f_new = obj.value(x_new)
            if merit_value(f_new, x_new, geom, rho_eq, rho_bound) <= phi0 + cfg.armijo * alpha * slope:
                break
            alpha *= 0.5
        else:
            message = "merit line search failed"
            break
        f_new, g_new = obj.value_grad(x_new)
        s = x_new - x
        eta_vec = lagrangian_gradient(g_new, qp.lam, geom) - lagrangian_gradient(g, qp.lam, geom)
        if cfg.initial_scaling and not updates:
            sy = s @ eta_vec
            if sy > 0:
                B = (eta_vec @ eta_vec) / sy * np.eye(geom.dim)
        B, info = damped_bfgs_update(B, s, eta_vec)
        info["cholesky_ok"] = _is_pd(B)
        updates.append(info)
        x, f, g = x_new, f_new, g_new
        it += 1
        trace.record(x, -f, alpha)
    x_final = geom.project(x)
    return FitResult(
        method="sqp",
        params=obj.params(x_final),
        trace=trace,
        converged=converged,
        iterations=it,
        message=message,
        hessian=B,
        info={"updates": updates, "evaluations": obj.n_evals, "rho_eq": rho_eq},
    )


def _is_pd(B):
    try:
        np.linalg.cholesky(B)
    except np.linalg.LinAlgError:
        return False
    return True

"""Limited-memory projected quasi-Newton method over a product of simplexes.

Each outer iteration minimizes a quadratic model of ``f = -L`` over the
feasible set with a spectral projected gradient (SPG) inner solver, then takes
a randomized Armijo backtracking step along the resulting direction.
"""

from collections import deque
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from .lbfgs import SIGMA_CONVENTIONS, LbfgsMemory
from .model import Objective
from .trace import FitResult, SolverTrace

SPG_STEP_RULES = ("bb2", "bb1", "printed")
SPG_LINE_SEARCHES = ("interpolate", "random")


class LineSearchError(RuntimeError):
    """Raised when backtracking exhausts its trial budget."""


@dataclass(frozen=True)
class SpgConfig:
    alpha_min: float = 1e-10
    alpha_max: float = 1e10
    history: int = 1
    inner_max_iter: int = 100
    inner_tol: float = 1e-6
    nu: float = 1e-4
    max_line_search: int = 30
    step_rule: str = "bb1"
    line_search: str = "interpolate"

    def __post_init__(self):
        if not 0 < self.alpha_min < self.alpha_max:
            raise ValueError("need 0 < alpha_min < alpha_max")
        if self.step_rule not in SPG_STEP_RULES:
            raise ValueError(f"step_rule must be one of {SPG_STEP_RULES}")
        if self.line_search not in SPG_LINE_SEARCHES:
            raise ValueError(f"line_search must be one of {SPG_LINE_SEARCHES}")
        if self.history < 0 or self.inner_max_iter < 1 or not self.inner_tol > 0:
            raise ValueError("invalid SPG limits")


@dataclass(frozen=True)
class PqnConfig:
    epsilon: float = 1e-4
    m: int = 5
    nu: float = 1e-4
    spg: SpgConfig = field(default_factory=SpgConfig)
    max_iter: int = 500
    max_line_search: int = 30
    sigma_convention: str = "curvature"
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0 or self.m < 1 or self.max_iter < 1:
            raise ValueError("epsilon, m and max_iter must be positive")
        if not 0 < self.nu < 1:
            raise ValueError("nu must lie in (0, 1)")
        if self.sigma_convention not in SIGMA_CONVENTIONS:
            raise ValueError(f"sigma_convention must be one of {SIGMA_CONVENTIONS}")


class QuadraticModel:
    """q(x) = f0 + (x - x0)'g + 0.5 (x - x0)' B (x - x0), B from an L-BFGS memory."""

    def __init__(self, f0, g, x0, mem):
        self.f0 = float(f0)
        self.g = np.asarray(g, dtype=np.float64)
        self.x0 = np.asarray(x0, dtype=np.float64)
        self.mem = mem

    def hess_vec(self, v):
        return self.mem.matvec(v)

    def value(self, x):
        dx = x - self.x0
        return self.f0 + dx @ self.g + 0.5 * dx @ self.hess_vec(dx)

    def grad(self, x):
        return self.g + self.hess_vec(x - self.x0)


def quadratic_model(f0, g, mem, theta_t):
    return QuadraticModel(f0, g, theta_t, mem)


def _spectral_step(s, y, rule):
    sy = s @ y
    if sy <= 0:
        return np.inf
    if rule == "bb2":
        return sy / (y @ y)
    if rule == "bb1":
        return (s @ s) / sy
    return (y @ y) / (s @ s)


def _next_trial(alpha, dq, gtd, rule, rng):
    """Next backtracking step after ``alpha`` failed with model change ``dq``."""
    if rule == "random":
        return rng.uniform(0.0, alpha)
    # safeguarded minimizer of the quadratic through q(0), q'(0) and q(alpha)
    curv = dq - alpha * gtd
    trial = -0.5 * alpha * alpha * gtd / curv if curv > 0 else 0.5 * alpha
    if not 0.1 * alpha <= trial <= 0.9 * alpha:
        trial = 0.5 * alpha
    return trial


def spg_solve(model, x0, geom, cfg=SpgConfig(), rng=None):
    """Approximately minimize ``model`` over ``geom`` starting from feasible ``x0``.

    Returns ``(x, iterations)``. Along a search direction the model is an
    exact quadratic, so trial values cost O(1) after one Hessian product.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    x = np.array(x0, dtype=np.float64)
    grad = model.grad(x)
    qx = 0.0  # model value relative to q(x0); avoids cancellation against f0
    recent = deque([qx], maxlen=cfg.history + 1)
    pg = geom.project(x - grad) - x
    alpha_bar = min(cfg.alpha_max, max(cfg.alpha_min, 1.0 / max(np.abs(pg).max(), 1e-300)))
    for k in range(1, cfg.inner_max_iter + 1):
        # stationarity measured with a unit step, independent of the spectral scale
        if np.abs(pg).sum() <= cfg.inner_tol:
            return x, k
        d = geom.project(x - alpha_bar * grad) - x
        Bd = model.hess_vec(d)
        gtd = grad @ d
        dBd = d @ Bd
        f_bound = max(recent)
        alpha = 1.0
        for _ in range(cfg.max_line_search):
            q_new = qx + alpha * gtd + 0.5 * alpha * alpha * dBd
            if q_new <= f_bound + cfg.nu * alpha * gtd:
                break
            alpha = _next_trial(alpha, q_new - qx, gtd, cfg.line_search, rng)
        else:
            return x, k
        s = alpha * d
        y = alpha * Bd
        x = x + s
        grad = grad + y
        qx = q_new
        recent.append(qx)
        pg = geom.project(x - grad) - x
        alpha_bar = min(cfg.alpha_max, max(cfg.alpha_min, _spectral_step(s, y, cfg.step_rule)))
    return x, cfg.inner_max_iter


def armijo_backtrack(f, theta, d, g, nu=1e-4, max_trials=30, rng=None, f0=None):
    """Randomized backtracking: start at 1, redraw ``alpha ~ U(0, alpha)`` on failure.

    Returns ``(alpha, f(theta + alpha d))``; raises :class:`LineSearchError`
    when no trial satisfies the sufficient-decrease condition.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    f0 = f(theta) if f0 is None else f0
    slope = float(g @ d)
    alpha = 1.0
    for _ in range(max_trials):
        f_new = f(theta + alpha * d)
        if f_new <= f0 + nu * alpha * slope:
            return alpha, f_new
        alpha = rng.uniform(0.0, alpha)
    raise LineSearchError(f"no sufficient decrease after {max_trials} trials")


def projected_gradient_residual(theta, g, geom):
    """L1 norm of P(theta - g) - theta; zero exactly at constrained stationary points."""
    return float(np.abs(geom.project(theta - g) - theta).sum())


def minimize_pqn(fun, x0, geom, cfg=PqnConfig(), *, callback=None):
    """Minimize ``fun(x) -> (value, grad)`` over ``geom`` from feasible ``x0``.

    ``callback(x, value, step)`` is called at the initial point and after
    every accepted step. Returns ``(x, value, memory, converged, iterations,
    message, fallbacks)`` where ``fallbacks`` counts iterations that used the
    projected gradient because the subproblem gave no descent direction.
    """
    rng = np.random.default_rng(cfg.seed)
    x = geom.project(x0)
    fx, g = fun(x)
    mem = LbfgsMemory(geom.dim, cfg.m, cfg.sigma_convention)
    if callback:
        callback(x, fx, 0.0)
    message = "max_iter reached"
    converged = False
    it = fallbacks = 0
    while True:
        if projected_gradient_residual(x, g, geom) <= cfg.epsilon:
            converged, message = True, "converged"
            break
        if it >= cfg.max_iter:
            break
        model = QuadraticModel(fx, g, x, mem)
        target, _ = spg_solve(model, x, geom, cfg.spg, rng)
        d = target - x
        if not g @ d < 0:
            # inexact subproblem solution: fall back to the projected gradient
            d = geom.project(x - g) - x
            fallbacks += 1
        try:
            alpha, _ = armijo_backtrack(
                lambda v: fun(v)[0], x, d, g, cfg.nu, cfg.max_line_search, rng, f0=fx
            )
        except LineSearchError as exc:
            message = str(exc)
            break
        x_new = x + alpha * d
        f_new, g_new = fun(x_new)
        mem.update(x_new - x, g_new - g)
        x, fx, g = x_new, f_new, g_new
        it += 1
        if callback:
            callback(x, fx, alpha)
    return x, fx, mem, converged, it, message, fallbacks


def fit_pqn(data, init, cfg=PqnConfig(), *, keep_iterates=False):
    """Fit a latent class model by projected quasi-Newton from ``init``."""
    obj = Objective(data, init.K)
    trace = SolverTrace(obj.layout, keep_iterates)
    x, fx, mem, converged, it, message, fallbacks = minimize_pqn(
        obj.value_grad, init.pack(), obj.layout, cfg,
        callback=lambda v, fv, step: trace.record(v, -fv, step),
    )
    return FitResult(
        method="pqn",
        params=obj.params(x),
        trace=trace,
        converged=converged,
        iterations=it,
        message=message,
        hessian=mem.dense(),
        info={"memory": mem, "evaluations": obj.n_evals, "fallbacks": fallbacks},
    )


class IndefiniteHessianError(ValueError):
    """The Hessian approximation is not positive definite where it is inverted."""


def observed_information(B, theta=None, geom=None, level=0.95, active_tol=1e-8):
    """Asymptotic covariance, standard errors and intervals from a Hessian approximation.

    ``B`` approximates the Hessian of ``-L``. Without ``geom`` the covariance is
    ``inv(B)``. With ``geom`` it is restricted to the directions that keep
    every simplex constraint satisfied, ``Z inv(Z'BZ) Z'``, and coordinates of
    ``theta`` at zero are held fixed.

    Returns ``(cov, se, lower, upper)``; the intervals need ``theta``.
    """
    B = np.asarray(B, dtype=np.float64)
    B = 0.5 * (B + B.T)
    if geom is None:
        Z = np.eye(B.shape[0])
    else:
        active = None if theta is None else np.asarray(theta) <= active_tol
        Z = geom.tangent_basis(active)
    H = Z.T @ B @ Z
    try:
        chol = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise IndefiniteHessianError(
            "Hessian approximation is not positive definite; run more iterations "
            "or use a longer memory"
        ) from None
    W = np.linalg.solve(chol, Z.T)
    cov = W.T @ W
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    if theta is None:
        return cov, se, None, None
    z = NormalDist().inv_cdf(0.5 + level / 2)
    theta = np.asarray(theta, dtype=np.float64)
    return cov, se, theta - z * se, theta + z * se

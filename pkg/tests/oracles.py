"""Independent reference solutions used by the tests.

Each oracle solves its problem by brute-force enumeration of KKT systems, so
it shares no code path with the library's algorithms.
"""

import itertools

import numpy as np


def projection_by_supports(x):
    """Euclidean projection onto the simplex by checking every support set.

    For support S the stationarity conditions give y_S = x_S + lam with
    lam = (1 - sum x_S) / |S|; the answer is the support whose point is
    nonnegative and whose excluded coordinates have nonnegative multipliers
    -(x_i + lam).
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    masks = np.array(list(itertools.product([0, 1], repeat=n))[1:], dtype=bool)
    sizes = masks.sum(axis=1)
    lam = (1.0 - masks @ x) / sizes
    y = np.where(masks, x[None, :] + lam[:, None], 0.0)
    mult = np.where(masks, 0.0, -(x[None, :] + lam[:, None]))
    ok = (y >= -1e-12).all(axis=1) & (mult >= -1e-12).all(axis=1)
    cands = y[ok]
    # several supports can qualify only through ties at zero; they coincide
    best = cands[np.argmin(((cands - x) ** 2).sum(axis=1))]
    return np.maximum(best, 0.0)


def qp_by_active_sets(theta, g, B, sizes):
    """Minimize 0.5 d'Bd + g'd with block sums of theta + d equal to 1 and d >= -theta.

    Enumerates every set of coordinates held at their bound, solves the
    equality-constrained KKT system, and keeps the best feasible point whose
    bound multipliers are nonnegative.
    """
    theta = np.asarray(theta, dtype=np.float64)
    n = theta.size
    sizes = list(sizes)
    A = np.zeros((len(sizes), n))
    off = 0
    for b, s in enumerate(sizes):
        A[b, off:off + s] = 1.0
        off += s
    rhs = 1.0 - A @ theta
    best, best_val = None, np.inf
    for fixed in itertools.product([False, True], repeat=n):
        fixed = np.array(fixed)
        E = np.vstack([A, np.eye(n)[fixed]])
        e = np.concatenate([rhs, -theta[fixed]])
        m = E.shape[0]
        K = np.block([[B, E.T], [E, np.zeros((m, m))]])
        try:
            sol = np.linalg.solve(K, np.concatenate([-g, e]))
        except np.linalg.LinAlgError:
            continue
        if not np.allclose(K @ sol, np.concatenate([-g, e]), atol=1e-9):
            continue
        d = sol[:n]
        mu = -sol[n + len(sizes):]  # multipliers of d_i >= -theta_i
        if np.any(theta + d < -1e-10) or np.any(mu < -1e-9):
            continue
        val = 0.5 * d @ B @ d + g @ d
        if val < best_val:
            best, best_val = d, val
    return best


def full_bfgs_sequence(B0, pairs):
    """Matrices produced by the textbook BFGS recursion from ``B0``."""
    out = []
    B = np.array(B0, dtype=np.float64)
    for s, y in pairs:
        Bs = B @ s
        B = B - np.outer(Bs, Bs) / (s @ Bs) + np.outer(y, y) / (y @ s)
        out.append(B.copy())
    return out


def random_spd(rng, n, cond=10.0):
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    ev = np.geomspace(1.0, cond, n)
    return (q * ev) @ q.T

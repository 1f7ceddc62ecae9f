"""Pure numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` function for function and are used whenever the
compiled module is unavailable (or ``LCMOPT_PURE_PYTHON`` is set).

Data are passed in compressed form: ``codes`` is a (P, d) int array of distinct
observation patterns whose entries are already offset into the flat per-class
category axis (``cum_c[j] + y_j - 1``), and ``counts`` holds the multiplicity of
each pattern.
"""

import numpy as np

DENSITY_FLOOR = 1e-300
GRADIENT_FLOOR = 1e-10


def project_blocks(x, offsets, sizes, out):
    """Blockwise Euclidean projection onto a product of probability simplexes."""
    x = np.asarray(x, dtype=np.float64)
    for size in np.unique(sizes):
        starts = offsets[sizes == size]
        idx = starts[:, None] + np.arange(size)[None, :]
        block = x[idx]
        u = -np.sort(-block, axis=1)
        css = np.cumsum(u, axis=1)
        j = np.arange(1, size + 1)
        cond = u + (1.0 - css) / j > 0
        # cond is true for j = 1 always, and true on a prefix
        rho = size - np.argmax(cond[:, ::-1], axis=1)
        lam = (1.0 - css[np.arange(len(starts)), rho - 1]) / rho
        out[idx] = np.maximum(block + lam[:, None], 0.0)
    return out


def component_densities(codes, pi):
    """Return the (K, P) matrix of class-conditional pattern probabilities."""
    return np.prod(pi[:, codes], axis=2)


def loglik(codes, counts, eta, pi):
    f = component_densities(codes, pi)
    p = np.maximum(eta @ f, DENSITY_FLOOR)
    return float(counts @ np.log(p))


def loglik_grad(codes, counts, eta, pi, grad_eta, grad_pi):
    """Log-likelihood plus its gradient, written into ``grad_eta``/``grad_pi``.

    The pi-gradient uses products over the other variables directly, so it
    stays defined when a coordinate sits on the boundary.
    """
    K, C = pi.shape
    factors = pi[:, codes]  # (K, P, d)
    ones = np.ones(factors.shape[:2] + (1,))
    prefix = np.concatenate([ones, np.cumprod(factors, axis=2)[:, :, :-1]], axis=2)
    suffix = np.concatenate(
        [np.cumprod(factors[:, :, ::-1], axis=2)[:, :, -2::-1], ones], axis=2
    )
    f = prefix[:, :, -1] * factors[:, :, -1]
    mix = eta @ f
    ll = float(counts @ np.log(np.maximum(mix, DENSITY_FLOOR)))
    w = counts / np.maximum(mix, GRADIENT_FLOOR)
    grad_eta[:] = f @ w
    excl = prefix * suffix * (eta[:, None] * w[None, :])[:, :, None]
    flat = (np.arange(K)[:, None, None] * C + codes[None, :, :]).ravel()
    grad_pi[:] = np.bincount(flat, weights=excl.ravel(), minlength=K * C).reshape(K, C)
    return ll

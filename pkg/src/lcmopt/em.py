"""EM iteration for latent class models."""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import LcmParams
from .trace import FitResult, SolverTrace

MASS_FLOOR = 1e-10


@dataclass(frozen=True)
class EmConfig:
    epsilon: float = 1e-4  # stop when the L1 parameter change is at most this
    max_iter: int = 5000

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


def m_step_weights(D):
    """Class weights as the column means of the responsibilities."""
    return np.asarray(D, dtype=np.float64).mean(axis=0)


def m_step_categorical(data, D):
    """Responsibility-weighted category frequencies, as ``pi[k][j]`` rows."""
    D = np.asarray(D, dtype=np.float64)
    R = np.zeros((D.shape[1], data.codes.shape[0]))
    for k in range(D.shape[1]):
        R[k] = np.bincount(data.pattern_index, weights=D[:, k], minlength=R.shape[1])
    mat = _categorical_matrix(data, R)
    scheme = data.scheme
    return [np.split(mat[k], scheme.offsets[1:]) for k in range(mat.shape[0])]


def _categorical_matrix(data, R):
    """(K, C) M-step from pattern-level weighted responsibilities ``R`` (K, P)."""
    K, P = R.shape
    C = data.scheme.total
    flat = (np.arange(K)[:, None, None] * C + data.codes[None, :, :]).ravel()
    weights = np.broadcast_to(R[:, :, None], (K, P, data.scheme.d)).ravel()
    num = np.bincount(flat, weights=weights, minlength=K * C).reshape(K, C)
    mass = R.sum(axis=1)
    out = np.empty_like(num)
    uniform = np.repeat(1.0 / np.asarray(data.scheme.c), data.scheme.c)
    for k in range(K):
        out[k] = num[k] / mass[k] if mass[k] > MASS_FLOOR else uniform
    return out


def _e_step(data, eta, pi):
    """Pattern-level responsibilities weighted by counts, and the log-likelihood.

    Mixture sums run over sorted terms so relabelling the classes permutes the
    output exactly.
    """
    joint = eta[:, None] * kernels.component_densities(data.codes, pi)
    mix = np.sort(joint, axis=0).sum(axis=0)
    mix = np.maximum(mix, kernels.DENSITY_FLOOR)
    ll = float(data.counts @ np.log(mix))
    return joint * (data.counts / mix), ll


def fit_em(data, init, cfg=EmConfig(), *, keep_iterates=False):
    """Run EM from ``init`` until the L1 parameter change drops to ``cfg.epsilon``."""
    K = init.K
    layout = data.scheme.layout(K)
    x = init.pack()
    trace = SolverTrace(layout, keep_iterates)
    R, ll = _e_step(data, init.eta, init.pi_matrix)
    trace.record(x, ll)
    converged = False
    for _ in range(cfg.max_iter):
        eta = R.sum(axis=1) / data.n
        pi = _categorical_matrix(data, R)
        x_new = np.concatenate([eta, pi.ravel()])
        delta = float(np.sort(np.abs(x_new - x)).sum())
        R, ll = _e_step(data, eta, pi)
        x = x_new
        trace.record(x, ll, step=delta)
        if delta <= cfg.epsilon:
            converged = True
            break
    iterations = len(trace) - 1
    return FitResult(
        method="em",
        params=LcmParams.unpack(x, K, data.scheme),
        trace=trace,
        converged=converged,
        iterations=iterations,
        message="converged" if converged else "max_iter reached",
    )

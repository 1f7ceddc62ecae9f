"""Latent class model: parameter space, data, likelihood and gradient.

Parameters are flattened ("packed") as the weights ``eta`` followed by one
categorical row per (class k, variable j), ordered by k then j. With
``C = sum(c)``, the tail of a packed vector reshapes to a (K, C) matrix whose
row k concatenates the d categorical distributions of class k.

Category labels in datasets are 1-based (1..c_j); class indices in the API are
0-based like any Python sequence.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .simplex import ProductSimplex

FEASIBILITY_TOL = 1e-9


class InputError(ValueError):
    """Raised for malformed data, schemes or parameter sets."""


@dataclass(frozen=True)
class CategoryScheme:
    """Number of categories ``c[j]`` for each of the ``d`` observed variables."""

    c: tuple

    def __post_init__(self):
        c = tuple(int(v) for v in self.c)
        if len(c) < 1:
            raise InputError("a scheme needs at least one variable")
        if any(v < 2 for v in c):
            raise InputError(f"every variable needs at least 2 categories, got {c}")
        object.__setattr__(self, "c", c)

    @property
    def d(self):
        return len(self.c)

    @property
    def total(self):
        return sum(self.c)

    @cached_property
    def offsets(self):
        """Start of each variable's categories on the flat per-class axis."""
        return np.concatenate([[0], np.cumsum(self.c)[:-1]]).astype(np.int64)

    def layout(self, K):
        """The product-of-simplexes block structure for ``K`` classes."""
        return ProductSimplex((K,) + self.c * K)


class Dataset:
    """N observations of d categorical variables, labels 1..c_j.

    Identical rows are collapsed into weighted patterns once, and every
    likelihood evaluation works on the patterns.
    """

    def __init__(self, rows, scheme=None):
        rows = np.asarray(rows)
        if rows.ndim == 1:
            rows = rows[:, None]
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise InputError(f"expected a non-empty N x d table, got shape {rows.shape}")
        if not np.issubdtype(rows.dtype, np.integer):
            if not np.all(np.isfinite(rows)) or np.any(rows != np.round(rows)):
                raise InputError("category labels must be integers")
        rows = rows.astype(np.int64)
        if scheme is None:
            scheme = CategoryScheme(tuple(np.maximum(rows.max(axis=0), 2)))
        if scheme.d != rows.shape[1]:
            raise InputError(f"scheme has {scheme.d} variables, data has {rows.shape[1]}")
        bad = (rows < 1) | (rows > np.asarray(scheme.c))
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise InputError(
                f"row {i + 1}, column {j + 1}: label {rows[i, j]} outside 1..{scheme.c[j]}"
            )
        rows.setflags(write=False)
        self.rows = rows
        self.scheme = scheme
        patterns, inverse, counts = np.unique(
            rows, axis=0, return_inverse=True, return_counts=True
        )
        self.codes = np.ascontiguousarray(patterns - 1 + scheme.offsets, dtype=np.int64)
        self.counts = counts.astype(np.float64)
        self.pattern_index = inverse.reshape(-1)

    @property
    def n(self):
        return self.rows.shape[0]

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"Dataset(n={self.n}, c={self.scheme.c})"


class LcmParams:
    """Mixture weights ``eta`` (K,) and categorical rows ``pi[k][j]`` (c_j,)."""

    def __init__(self, eta, pi, *, check=True):
        eta = np.array(eta, dtype=np.float64).reshape(-1)
        K = eta.shape[0]
        if K < 1 or len(pi) != K:
            raise InputError(f"eta has {K} entries but pi has {len(pi)} classes")
        rows = [[np.array(r, dtype=np.float64).reshape(-1) for r in pk] for pk in pi]
        c = tuple(len(r) for r in rows[0])
        if any(tuple(len(r) for r in pk) != c for pk in rows):
            raise InputError("every class must use the same category scheme")
        self.eta = eta
        self.scheme = CategoryScheme(c)
        self.pi = tuple(tuple(pk) for pk in rows)
        for a in (eta, *(r for pk in rows for r in pk)):
            a.setflags(write=False)
        if check:
            self.check_feasible()

    @property
    def K(self):
        return self.eta.shape[0]

    @property
    def layout(self):
        return self.scheme.layout(self.K)

    @cached_property
    def pi_matrix(self):
        """(K, C) matrix; row k concatenates class k's categorical rows."""
        m = np.array([np.concatenate(pk) for pk in self.pi])
        m.setflags(write=False)
        return m

    def check_feasible(self, tol=FEASIBILITY_TOL):
        blocks = [self.eta] + [r for pk in self.pi for r in pk]
        for b in blocks:
            if np.any(b < -tol) or abs(b.sum() - 1.0) > tol or not np.all(np.isfinite(b)):
                raise InputError(f"not a probability vector: {b}")

    def pack(self):
        return np.concatenate([self.eta, self.pi_matrix.ravel()])

    @classmethod
    def unpack(cls, values, K, scheme, *, check=True):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (K + K * scheme.total,):
            raise InputError(
                f"packed vector has length {values.shape}, expected {K + K * scheme.total}"
            )
        mat = values[K:].reshape(K, scheme.total)
        pi = [np.split(mat[k], scheme.offsets[1:]) for k in range(K)]
        return cls(values[:K], pi, check=check)

    def permute(self, order):
        """Relabel classes: new class i is old class ``order[i]``."""
        order = list(order)
        return LcmParams(self.eta[order], [self.pi[k] for k in order], check=False)

    def to_dict(self):
        return {
            "K": self.K,
            "eta": self.eta.tolist(),
            "pi": [[r.tolist() for r in pk] for pk in self.pi],
        }

    @classmethod
    def from_dict(cls, obj):
        params = cls(obj["eta"], obj["pi"])
        if "K" in obj and int(obj["K"]) != params.K:
            raise InputError(f"K={obj['K']} does not match {params.K} weights")
        return params

    def __eq__(self, other):
        if not isinstance(other, LcmParams):
            return NotImplemented
        return self.K == other.K and self.scheme == other.scheme and np.array_equal(
            self.pack(), other.pack()
        )

    def __repr__(self):
        return f"LcmParams(K={self.K}, c={self.scheme.c}, eta={self.eta.tolist()})"


def _check_scheme(data, params):
    if data.scheme != params.scheme:
        raise InputError(f"data scheme {data.scheme.c} does not match params {params.scheme.c}")


def component_density(y, k, params):
    """Probability of observation ``y`` (labels 1..c_j) under class ``k``."""
    y = tuple(int(v) for v in y)
    c = params.scheme.c
    if len(y) != len(c):
        raise InputError(f"observation has {len(y)} entries, expected {len(c)}")
    if not 0 <= k < params.K:
        raise InputError(f"class index {k} outside 0..{params.K - 1}")
    out = 1.0
    for j, label in enumerate(y):
        if not 1 <= label <= c[j]:
            raise InputError(f"label {label} outside 1..{c[j]} for variable {j + 1}")
        out *= params.pi[k][j][label - 1]
    return out


def log_likelihood(data, params):
    _check_scheme(data, params)
    return kernels.loglik(data.codes, data.counts, params.eta, params.pi_matrix)


def gradient(data, params):
    """Analytic gradient of the log-likelihood, in packed order."""
    _check_scheme(data, params)
    return _value_grad(data, params.K, params.pack())[1]


def negative_objective(data, packed, K=None):
    """``-log_likelihood`` at a packed vector (raw: no feasibility check)."""
    packed = np.asarray(packed, dtype=np.float64)
    if K is None:
        K = _infer_K(packed, data.scheme)
    eta = packed[:K]
    pi = packed[K:].reshape(K, data.scheme.total)
    return -kernels.loglik(data.codes, data.counts, eta, np.ascontiguousarray(pi))


def _infer_K(packed, scheme):
    K, rem = divmod(packed.shape[0], 1 + scheme.total)
    if rem or K < 1:
        raise InputError(f"length {packed.shape[0]} is not K * (1 + {scheme.total})")
    return K


def _value_grad(data, K, packed):
    eta = np.ascontiguousarray(packed[:K])
    pi = np.ascontiguousarray(packed[K:].reshape(K, data.scheme.total))
    grad = np.empty_like(packed)
    g_eta = grad[:K]
    g_pi = grad[K:].reshape(K, data.scheme.total)
    ll = kernels.loglik_grad(data.codes, data.counts, eta, pi, g_eta, g_pi)
    return ll, grad


def central_difference(fun, x, h):
    """Symmetric difference quotient of a scalar function, per coordinate."""
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return out


def finite_difference_gradient(data, params, h):
    """Central-difference gradient of the log-likelihood (test oracle)."""
    _check_scheme(data, params)
    return central_difference(
        lambda v: -negative_objective(data, v, params.K), params.pack(), h
    )


def responsibilities(data, params):
    """(N, K) posterior class probabilities for each observation."""
    _check_scheme(data, params)
    f = kernels.component_densities(data.codes, params.pi_matrix)
    joint = params.eta[:, None] * f
    joint /= np.maximum(joint.sum(axis=0), kernels.DENSITY_FLOOR)
    return joint.T[data.pattern_index]


class Objective:
    """``f = -L`` on packed vectors for a fixed dataset and class count.

    Counts evaluations so solvers can report work done.
    """

    def __init__(self, data, K):
        self.data = data
        self.K = K
        self.layout = data.scheme.layout(K)
        self.n_evals = 0

    def value(self, x):
        self.n_evals += 1
        return negative_objective(self.data, x, self.K)

    def value_grad(self, x):
        self.n_evals += 1
        ll, grad = _value_grad(self.data, self.K, np.asarray(x, dtype=np.float64))
        return -ll, -grad

    def params(self, x, check=True):
        return LcmParams.unpack(x, self.K, self.data.scheme, check=check)

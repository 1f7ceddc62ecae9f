"""Sampling from latent class models and the registry of benchmark bundles.

Random streams use numpy's PCG64 (``numpy.random.default_rng``). For each
observation one uniform picks the class and then one uniform per variable, in
ascending variable order, picks its category by inverse CDF; the (n, d + 1)
block of uniforms is drawn in one row-major call, so the stream order is fixed.
"""

from dataclasses import dataclass

import numpy as np

from .model import Dataset, LcmParams


def rng_for(seed):
    return np.random.default_rng(seed)


def derive_seed(base_seed, index):
    """Deterministic 63-bit child seed for run ``index`` of an experiment.

    Hashes ``(base_seed, index)`` with numpy's ``SeedSequence``, whose output
    is fixed across platforms and numpy versions.
    """
    state = np.random.SeedSequence([int(base_seed), int(index)]).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def _inverse_cdf(u, probs):
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, u, side="right")


def sample(params, n, seed, *, return_labels=False):
    """Draw ``n`` observations; optionally also the latent class of each."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = rng_for(seed)
    d = params.scheme.d
    u = rng.random((n, d + 1))
    labels = _inverse_cdf(u[:, 0], params.eta)
    rows = np.empty((n, d), dtype=np.int64)
    for k in range(params.K):
        members = labels == k
        for j in range(d):
            rows[members, j] = _inverse_cdf(u[members, j + 1], params.pi[k][j]) + 1
    data = Dataset(rows, params.scheme)
    return (data, labels) if return_labels else data


def random_params(K, scheme, rng):
    """A feasible point with every simplex block uniform (Dirichlet(1))."""
    x = scheme.layout(K).random_point(rng)
    return LcmParams.unpack(x, K, scheme)


@dataclass(frozen=True)
class BundleSpec:
    id: str
    n: int
    params: LcmParams

    @property
    def scheme(self):
        return self.params.scheme

    @property
    def K(self):
        return self.params.K

    def to_dict(self):
        return {"id": self.id, "N": self.n, "c": list(self.scheme.c), **self.params.to_dict()}


def _bin(*ps):
    return [[p, round(1 - p, 10)] for p in ps]


# Rows: one entry per class, one category list per variable.
_B1 = [
    ("1A", 500, [0.5, 0.5], [_bin(0.4), _bin(0.8)]),
    ("1B", 500, [0.5, 0.3, 0.2], [_bin(0.4), _bin(0.8), _bin(0.1)]),
    ("1C", 500, [0.5, 0.5], [_bin(0.4, 0.1), _bin(0.8, 0.6)]),
    ("1D", 500, [0.5, 0.5], [_bin(0.4, 0.1, 0.5, 0.6), _bin(0.8, 0.6, 0.4, 0.7)]),
]

_V2 = {1: [0.8, 0.1, 0.1], 2: [0.3, 0.4, 0.3], 3: [0.5, 0.3, 0.2], 4: [0.6, 0.3, 0.1]}
_B2 = [
    ("2A", 1000, [0.4, 0.6], [_bin(0.1) + [_V2[1]], _bin(0.8) + [_V2[2]]]),
    ("2B", 1000, [0.4, 0.4, 0.2],
     [_bin(0.1) + [_V2[1]], _bin(0.8) + [_V2[2]], _bin(0.6) + [_V2[3]]]),
    ("2C", 1000, [0.4, 0.6],
     [_bin(0.1) + [_V2[1]] + _bin(0.6), _bin(0.8) + [_V2[2]] + _bin(0.9)]),
    ("2D", 1000, [0.4, 0.4, 0.2],
     [_bin(0.1) + [_V2[1]] + _bin(0.6), _bin(0.8) + [_V2[2]] + _bin(0.9),
      _bin(0.6) + [_V2[4]] + _bin(0.2)]),
]

# Bundles 3 and 4 share these per-class first-category probabilities.
_C1 = (0.9, 0.3, 0.1, 0.6)
_C2 = (0.2, 0.5, 0.55, 0.5)
_C3 = (0.1, 0.4, 0.3, 0.7)
_C4 = (0.5, 0.9, 0.2, 0.5)
_C5 = (0.8, 0.1, 0.9, 0.7)

_B3 = [
    ("3A", 2000, [0.3, 0.4, 0.3], [_bin(*_C1[:3]), _bin(*_C2[:3]), _bin(*_C3[:3])]),
    ("3B", 2000, [0.3, 0.2, 0.3, 0.2],
     [_bin(*_C1[:3]), _bin(*_C2[:3]), _bin(*_C3[:3]), _bin(*_C4[:3])]),
    ("3C", 2000, [0.3, 0.2, 0.3, 0.2], [_bin(*_C1), _bin(*_C2), _bin(*_C3), _bin(*_C4)]),
    ("3D", 2000, [0.3, 0.4, 0.3],
     [_bin(*_C1, 0.7), _bin(*_C2, 0.3), _bin(*(0.1, 0.4, 0.3, 0.9), 0.2)]),
]

_B4 = [
    ("4A", 5000, [0.3, 0.2, 0.3, 0.2], [_bin(*_C1), _bin(*_C2), _bin(*_C3), _bin(*_C4)]),
    ("4B", 5000, [0.3, 0.2, 0.3, 0.1, 0.1],
     [_bin(*_C1), _bin(*_C2), _bin(*_C3), _bin(*_C4), _bin(*_C5)]),
    ("4C", 5000, [0.3, 0.2, 0.3, 0.2],
     [_bin(*_C1, 0.2), _bin(*_C2, 0.8), _bin(*_C3, 0.3), _bin(*_C4, 0.9)]),
    ("4D", 5000, [0.3, 0.2, 0.3, 0.1, 0.1],
     [_bin(*_C1, 0.4), _bin(*_C2, 0.7), _bin(*_C3, 0.4), _bin(*_C4, 0.8), _bin(*_C5, 0.9)]),
]


def bundle_registry():
    """All sixteen benchmark bundles keyed by id (``"1A"`` ... ``"4D"``)."""
    return {
        bid: BundleSpec(bid, n, LcmParams(eta, table))
        for bid, n, eta, table in _B1 + _B2 + _B3 + _B4
    }


def get_bundle(bundle_id):
    reg = bundle_registry()
    try:
        return reg[bundle_id.upper()]
    except KeyError:
        raise KeyError(f"unknown bundle {bundle_id!r}; choose from {sorted(reg)}") from None

"""Euclidean projection onto the probability simplex and products of simplexes."""

import numpy as np

from . import kernels


def project_simplex(x):
    """Project ``x`` onto ``{y >= 0, sum(y) = 1}`` by the sort-and-threshold rule.

    >>> project_simplex([1.2, 0.3]).round(12).tolist()
    [0.95, 0.05]
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size < 1:
        raise ValueError("cannot project an empty vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("input must be finite")
    u = -np.sort(-x, kind="stable")
    css = np.cumsum(u)
    j = np.arange(1, x.size + 1)
    rho = j[u + (1.0 - css) / j > 0][-1]
    lam = (1.0 - css[rho - 1]) / rho
    return np.maximum(x + lam, 0.0)


class ProductSimplex:
    """Cartesian product of probability simplexes laid out contiguously.

    ``sizes`` lists the dimension of every block in order; ``block_map`` gives
    the matching ``(offset, length)`` pairs.
    """

    def __init__(self, sizes):
        sizes = np.asarray(sizes, dtype=np.int64).reshape(-1)
        if sizes.size == 0 or np.any(sizes < 1):
            raise ValueError(f"block sizes must be positive, got {sizes.tolist()}")
        self.sizes = sizes
        self.offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
        self.dim = int(sizes.sum())
        # block id of every coordinate, for segment sums
        self.block_of = np.repeat(np.arange(sizes.size), sizes)

    @property
    def n_blocks(self):
        return self.sizes.size

    @property
    def block_map(self):
        return [(int(o), int(s)) for o, s in zip(self.offsets, self.sizes)]

    def __eq__(self, other):
        return isinstance(other, ProductSimplex) and np.array_equal(self.sizes, other.sizes)

    def __repr__(self):
        return f"ProductSimplex({self.sizes.tolist()})"

    def _check(self, x):
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"vector of shape {x.shape} does not match dimension {self.dim}")
        return x

    def project(self, x):
        x = self._check(x)
        if not np.all(np.isfinite(x)):
            raise ValueError("input must be finite")
        out = np.empty_like(x)
        kernels.project_blocks(x, self.offsets, self.sizes, out)
        return out

    def block_sums(self, x):
        return np.bincount(self.block_of, weights=x, minlength=self.n_blocks)

    def constraint_residual(self, x):
        """Largest violation of the sum-to-one and nonnegativity constraints."""
        x = self._check(x)
        eq = np.max(np.abs(self.block_sums(x) - 1.0))
        return float(max(eq, -min(x.min(), 0.0)))

    def block_mean(self, x):
        return (self.block_sums(x) / self.sizes)[self.block_of]

    def center(self, x):
        """Remove each block's mean (projection onto the sum-zero subspace)."""
        return x - self.block_mean(x)

    def uniform(self):
        return 1.0 / self.sizes[self.block_of].astype(np.float64)

    def tangent_basis(self, fixed=None):
        """Orthonormal columns spanning the moves that keep every block sum fixed.

        Coordinates flagged in ``fixed`` do not move.
        """
        free = np.ones(self.dim, bool) if fixed is None else ~np.asarray(fixed, bool)
        cols = []
        for off, size in self.block_map:
            idx = np.arange(off, off + size)[free[off:off + size]]
            if idx.size < 2:
                continue
            # centred unit vectors span the block's sum-zero subspace
            A = np.zeros((self.dim, idx.size))
            A[idx] = np.eye(idx.size) - 1.0 / idx.size
            q, _ = np.linalg.qr(A)
            cols.append(q[:, : idx.size - 1])
        return np.hstack(cols) if cols else np.zeros((self.dim, 0))

    def random_point(self, rng):
        """A point drawn uniformly from the product (Dirichlet(1) per block)."""
        e = rng.standard_exponential(self.dim)
        return e / self.block_sums(e)[self.block_of]


def project_product(x, geom):
    return geom.project(x)

"""Limited-memory BFGS Hessian approximation in compact form.

    B = sigma * I - N @ inv(M) @ N.T,   N = [sigma * S, Y],
    M = [[sigma * S.T @ S, L], [L.T, -D]],

where ``L`` is the strictly lower triangle of ``S.T @ Y`` and ``D`` its
diagonal. Products with ``B`` cost O(n m) and never form the n x n matrix.
"""

import numpy as np

SIGMA_CONVENTIONS = ("curvature", "printed", "fixed")


class LbfgsMemory:
    """Most recent ``m`` curvature pairs and the compact factors built from them.

    ``sigma_convention`` picks the scale of the leading ``sigma * I`` term after
    each stored pair: ``"curvature"`` uses y'y / s'y, ``"printed"`` uses
    s'y / y'y, and ``"fixed"`` keeps ``sigma0``. ``m=None`` keeps every pair.
    """

    def __init__(self, dim, m=5, sigma_convention="curvature", sigma0=1.0,
                 curvature_tol=1e-12):
        if sigma_convention not in SIGMA_CONVENTIONS:
            raise ValueError(f"sigma_convention must be one of {SIGMA_CONVENTIONS}")
        if m is not None and m < 1:
            raise ValueError("memory length must be positive")
        self.dim = dim
        self.m = m
        self.sigma_convention = sigma_convention
        self.sigma = float(sigma0)
        self.curvature_tol = curvature_tol
        self.S = []
        self.Y = []
        self.skipped = 0
        self._rebuild()

    def __len__(self):
        return len(self.S)

    def update(self, s, y):
        """Store the pair unless y's <= curvature_tol. Returns True if stored."""
        s = np.array(s, dtype=np.float64)
        y = np.array(y, dtype=np.float64)
        sy = float(s @ y)
        if not sy > self.curvature_tol:
            self.skipped += 1
            return False
        self.S.append(s)
        self.Y.append(y)
        if self.m is not None and len(self.S) > self.m:
            del self.S[0], self.Y[0]
        if self.sigma_convention == "curvature":
            self.sigma = float(y @ y) / sy
        elif self.sigma_convention == "printed":
            self.sigma = sy / float(y @ y)
        self._rebuild()
        return True

    def _rebuild(self):
        while self.S:
            S = np.column_stack(self.S)
            Y = np.column_stack(self.Y)
            SY = S.T @ Y
            L = np.tril(SY, -1)
            M = np.block([[self.sigma * (S.T @ S), L], [L.T, -np.diag(np.diag(SY))]])
            try:
                Minv = np.linalg.inv(M)
            except np.linalg.LinAlgError:
                Minv = None
            if Minv is not None and np.all(np.isfinite(Minv)) and np.linalg.cond(M) < 1e14:
                self.N = np.hstack([self.sigma * S, Y])
                self.Minv = Minv
                return
            # singular middle matrix: forget the oldest pair and retry
            del self.S[0], self.Y[0]
        self.N = np.zeros((self.dim, 0))
        self.Minv = np.zeros((0, 0))

    def matvec(self, v):
        v = np.asarray(v, dtype=np.float64)
        if not self.S:
            return self.sigma * v
        return self.sigma * v - self.N @ (self.Minv @ (self.N.T @ v))

    def dense(self):
        return self.sigma * np.eye(self.dim) - self.N @ self.Minv @ self.N.T


def bfgs_update(B, s, y):
    """One full (non-limited) BFGS update of the Hessian approximation."""
    Bs = B @ s
    return B - np.outer(Bs, Bs) / (s @ Bs) + np.outer(y, y) / (y @ s)

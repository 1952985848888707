"""Sparse-plus-low-rank matrix handle used for large affine families.

Represents M = S + U W^* with S sparse (or dense) n-by-n and U, W of shape
n-by-r.  Supports the shifted form M - z I without densifying, adjoint
products, and linear solves via a sparse factorization of the base
combined with the Sherman-Morrison-Woodbury identity.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SparsePlusLowRank:
    def __init__(self, base, U=None, W=None):
        self.base = base
        n = base.shape[0]
        if base.shape[1] != n:
            raise ValueError("base must be square")
        self.n = n
        if U is None:
            U = np.zeros((n, 0))
            W = np.zeros((n, 0))
        self.U = np.asarray(U)
        self.W = np.asarray(W)
        if self.U.shape != self.W.shape or self.U.shape[0] != n:
            raise ValueError("low-rank factors must be n-by-r")
        self.shape = (n, n)
        self.dtype = np.result_type(base.dtype, self.U.dtype)

    @property
    def rank(self):
        return self.U.shape[1]

    def shifted(self, z):
        """M - z I with the shift folded into the base part."""
        eye = sp.identity(self.n, format="csr") if sp.issparse(self.base) else np.eye(self.n)
        return SparsePlusLowRank(self.base - z * eye, self.U, self.W)

    def matmat(self, X):
        X = np.asarray(X)
        return self.base @ X + self.U @ (self.W.conj().T @ X)

    def rmatmat(self, X):
        """Adjoint product M^* @ X."""
        X = np.asarray(X)
        return self.base.conj().T @ X + self.W @ (self.U.conj().T @ X)

    matvec = matmat
    rmatvec = rmatmat

    def todense(self):
        B = self.base.toarray() if sp.issparse(self.base) else np.asarray(self.base)
        if self.rank:
            B = B + self.U @ self.W.conj().T
        return B

    def norm_estimate(self, rng=None, iters=8):
        """Rough 2-norm estimate by power iteration on M^* M."""
        rng = rng or np.random.default_rng(7)
        v = rng.standard_normal(self.n) + 1j * rng.standard_normal(self.n)
        v /= np.linalg.norm(v)
        s = 0.0
        for _ in range(iters):
            w = self.matmat(v)
            s = np.linalg.norm(w)
            if s == 0.0:
                return 0.0
            v = self.rmatmat(w / s)
            v /= np.linalg.norm(v)
        return float(s)

    def solver(self):
        """Callable solving M x = b via SMW on the factored base."""
        if sp.issparse(self.base):
            lu = spla.splu(self.base.tocsc())
            base_solve = lu.solve
        else:
            import scipy.linalg as sla

            lu = sla.lu_factor(self.base)
            base_solve = lambda b: sla.lu_solve(lu, b)
        if not self.rank:
            return base_solve
        Y = self._solve_columns(base_solve, self.U)
        cap = np.eye(self.rank) + self.W.conj().T @ Y
        cap_inv = np.linalg.inv(cap)

        def solve(b):
            t = self._solve_columns(base_solve, b)
            return t - Y @ (cap_inv @ (self.W.conj().T @ t))

        return solve

    @staticmethod
    def _solve_columns(base_solve, B):
        B = np.asarray(B)
        if B.ndim == 1:
            return base_solve(B)
        return np.column_stack([base_solve(B[:, j]) for j in range(B.shape[1])])

    def aslinearoperator(self):
        return spla.LinearOperator(
            self.shape, matvec=self.matvec, rmatvec=self.rmatvec,
            matmat=self.matmat, dtype=np.result_type(self.dtype, complex),
        )


def as_operator(M):
    """Wrap a matrix-like object so it exposes the handle interface."""
    if isinstance(M, SparsePlusLowRank):
        return M
    return SparsePlusLowRank(M)

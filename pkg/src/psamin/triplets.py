"""Smallest singular triplets of shifted matrices, dense and iterative.

A triplet (sigma, u, v) satisfies M v = sigma u and M^* u = sigma v with
unit u, v.  The phase is pinned so results are reproducible: the
largest-magnitude entry of v is made real and nonnegative (ties within
1e-14 broken by lowest index) and u inherits the same rotation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .families import ContractViolation
from .operators import SparsePlusLowRank, as_operator

PHASE_TIE_TOL = 1e-14


class TripletConvergenceError(RuntimeError):
    """Iterative solver failed; carries the best triplet found so far."""

    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


@dataclass
class SingularTriplet:
    sigma: float
    u: np.ndarray
    v: np.ndarray
    residual: float

    def check(self, M):
        """Max consistency residual of the pair against M."""
        return _residual(M, self.sigma, self.u, self.v)


def _normalize_phase(u, v):
    mags = np.abs(v)
    top = mags.max()
    idx = int(np.flatnonzero(mags >= top - PHASE_TIE_TOL)[0])
    pivot = v[idx]
    if abs(pivot) == 0.0:
        return u, v
    phase = pivot / abs(pivot)
    return u / phase, v / phase


def smallest_triplet_dense(M) -> SingularTriplet:
    """Smallest singular triplet by full decomposition (rows >= cols)."""
    M = np.asarray(M.todense() if hasattr(M, "todense") and not isinstance(M, np.ndarray) else M)
    if M.ndim != 2 or M.shape[0] < M.shape[1]:
        raise ContractViolation("expected a square or tall matrix")
    if not np.all(np.isfinite(M.real)) or (np.iscomplexobj(M) and not np.all(np.isfinite(M.imag))):
        raise ContractViolation("matrix entries must be finite")
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    u = U[:, -1].copy()
    v = Vh[-1, :].conj().copy()
    sigma = float(s[-1])
    u, v = _normalize_phase(u, v)
    if sigma > 0:
        # re-derive u from v so M v = sigma u holds to roundoff
        w = M @ v
        nw = np.linalg.norm(w)
        if nw > 0:
            u = w / nw
    scale = float(s[0]) if s.size else 0.0
    res = _residual(M, sigma, u, v)
    return SingularTriplet(sigma=sigma, u=u, v=v, residual=max(res, 1e-16 * scale))


def _residual(M, sigma, u, v):
    if isinstance(M, np.ndarray):
        r1 = np.linalg.norm(M @ v - sigma * u)
        r2 = np.linalg.norm(M.conj().T @ u - sigma * v)
    else:
        op = as_operator(M) if not hasattr(M, "matvec") else M
        r1 = np.linalg.norm(np.asarray(op.matvec(v)).ravel() - sigma * u)
        r2 = np.linalg.norm(np.asarray(op.rmatvec(u)).ravel() - sigma * v)
    return float(max(r1, r2))


def smallest_triplet_sparse(M, tol=1e-10, max_iter=300) -> SingularTriplet:
    """Smallest singular triplet of a large square matrix, iteratively.

    M may be a scipy sparse matrix, an ndarray, or a SparsePlusLowRank
    handle.  The primary path runs shift-invert Lanczos on the augmented
    matrix [[0, M], [M^*, 0]] targeting the eigenvalue of smallest
    magnitude; solves go through a sparse factorization (with a
    Sherman-Morrison correction for low-rank updates).  If the
    factorization or the iteration fails, a regularized normal-equations
    fallback on M^* M + tau I is used.
    """
    if tol <= 0:
        raise ContractViolation("tol must be positive")
    op = as_operator(M)
    n = op.n
    if n <= 600 and not sp.issparse(op.base) and op.rank == 0:
        return smallest_triplet_dense(op.base)
    norm_est = op.norm_estimate()
    if norm_est == 0.0:
        v = np.zeros(n, dtype=complex)
        v[0] = 1.0
        u = v.copy()
        return SingularTriplet(0.0, u, v, 0.0)

    try:
        return _augmented_shift_invert(op, n, norm_est, tol, max_iter)
    except Exception:
        pass
    return _normal_equations_fallback(op, n, norm_est, tol, max_iter)


def _augmented_shift_invert(op, n, norm_est, tol, max_iter):
    solve = op.solver()
    if sp.issparse(op.base):
        adj = SparsePlusLowRank(op.base.conj().T.tocsr(), op.W, op.U)
    else:
        adj = SparsePlusLowRank(op.base.conj().T, op.W, op.U)
    solve_adj = adj.solver()

    def aug_matvec(x):
        x1, x2 = x[:n], x[n:]
        return np.concatenate([op.matvec(x2), op.rmatvec(x1)])

    def aug_inv(x):
        # [[0, M], [M*, 0]]^{-1} [x1; x2] = [M^{-*} x2; M^{-1} x1]
        x1, x2 = x[:n], x[n:]
        return np.concatenate([solve_adj(x2), solve(x1)])

    aug = spla.LinearOperator((2 * n, 2 * n), matvec=aug_matvec, dtype=complex)
    opinv = spla.LinearOperator((2 * n, 2 * n), matvec=aug_inv, dtype=complex)
    try:
        w, vecs = spla.eigsh(aug, k=1, sigma=0, which="LM", OPinv=opinv,
                             tol=tol, maxiter=max_iter * 40)
    except spla.ArpackNoConvergence as exc:
        if exc.eigenvalues.size:
            w, vecs = exc.eigenvalues, exc.eigenvectors
        else:
            raise
    lam = float(w[0])
    u = vecs[:n, 0]
    v = vecs[n:, 0]
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu < 1e-8 or nv < 1e-8:
        raise TripletConvergenceError("degenerate augmented eigenvector")
    u, v = u / nu, v / nv
    sigma = abs(lam)
    if lam < 0:
        u = -u
    u, v = _normalize_phase(u, v)
    w = op.matvec(v)
    nw = np.linalg.norm(w)
    if nw > 0.5 * sigma and sigma > 0:
        u = w / nw
    res = _residual(op, sigma, u, v)
    if res > 10 * tol * norm_est:
        raise TripletConvergenceError(
            f"augmented iteration residual {res:.2e} above tolerance",
            best=SingularTriplet(sigma, u, v, res))
    return SingularTriplet(sigma, u, v, res)


def _normal_equations_fallback(op, n, norm_est, tol, max_iter):
    tau = 1e-12 * norm_est**2

    def gram_matvec(x):
        return op.rmatvec(op.matvec(x)) + tau * x

    gram = spla.LinearOperator((n, n), matvec=gram_matvec, dtype=complex)
    try:
        w, vecs = spla.eigsh(gram, k=1, which="SA", tol=max(tol, 1e-12),
                             maxiter=max_iter * 60)
    except spla.ArpackNoConvergence as exc:
        if not exc.eigenvalues.size:
            raise TripletConvergenceError("normal-equations iteration did not converge")
        w, vecs = exc.eigenvalues, exc.eigenvectors
    sigma = float(np.sqrt(max(w[0] - tau, 0.0)))
    v = vecs[:, 0]
    v /= np.linalg.norm(v)
    w_vec = op.matvec(v)
    nw = np.linalg.norm(w_vec)
    u = w_vec / nw if nw > 0 else _left_null_vector(op, v)
    u, v = _normalize_phase(u, v)
    if sigma > 0:
        w_vec = op.matvec(v)
        nw = np.linalg.norm(w_vec)
        if nw > 0:
            u = w_vec / nw
    res = _residual(op, sigma, u, v)
    trip = SingularTriplet(sigma, u, v, res)
    if res > 100 * max(tol, 1e-10) * norm_est:
        raise TripletConvergenceError(
            f"fallback residual {res:.2e} above tolerance", best=trip)
    return trip


def _left_null_vector(op, v):
    # sigma == 0: any unit u with M^* u = 0 is consistent; use a few
    # rounds of inverse iteration on M M^* from a random start
    rng = np.random.default_rng(3)
    u = rng.standard_normal(op.n) + 1j * rng.standard_normal(op.n)
    u /= np.linalg.norm(u)
    return u

"""Synthetic one-parameter benchmark problems and a direct-minimization
baseline.

The generator mirrors a standard rank-one setup: A(x) = A + x b c^T with
a sparse random A whose spectral abscissa is shifted to about -0.1 and
dense random unit vectors b, c.  For orders up to 400 the generator can
also record a grid-oracle optimum for later regression.

``direct_minimize_grid`` minimizes x -> alpha_eps(A(x)) without any
projection: a warm-started scan over a parameter grid followed by
golden-section refinement.  Between neighboring grid points the
rightmost point moves continuously, so a cheap Newton continuation
tracks it; full criss-cross recomputations at regular intervals and an
eigenvalue-based lower-bound check guard against jumping branches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .abscissa import psa_square
from .families import (AffineMatrixFamily, ParameterBox, RankOne,
                       constant_fn, coordinate_fn)


@dataclass
class SyntheticProblem:
    family: AffineMatrixFamily
    box: ParameterBox
    eps: float
    seed: int
    n: int
    oracle_x: float | None = None
    oracle_alpha: float | None = None


def generate(n, seed, eps=0.1, interval=(-1.0, 1.0), density=None,
             record_oracle=False, oracle_points=50):
    """Random sparse-plus-rank-one family A + x b c^T."""
    rng = np.random.default_rng(seed)
    if density is None:
        density = min(1.0, 10.0 / n)
    A = sp.random(n, n, density=density, random_state=rng,
                  data_rvs=rng.standard_normal).tocsr()
    # shift the diagonal so the unperturbed spectral abscissa is ~ -0.1
    if n <= 600:
        abscissa = float(np.max(np.linalg.eigvals(A.toarray()).real))
    else:
        w = spla.eigs(A, k=6, which="LR", return_eigenvectors=False,
                      maxiter=5000, tol=1e-8)
        abscissa = float(np.max(w.real))
    A = (A - (abscissa + 0.1) * sp.identity(n, format="csr")).tocsr()
    b = rng.standard_normal(n)
    b /= np.linalg.norm(b)
    c = rng.standard_normal(n)
    c /= np.linalg.norm(c)
    family = AffineMatrixFamily(
        [(A, *constant_fn(1.0)), (RankOne(b, c), *coordinate_fn(0))], d=1)
    box = ParameterBox(np.array([interval[0]], dtype=float),
                       np.array([interval[1]], dtype=float))
    prob = SyntheticProblem(family=family, box=box, eps=float(eps),
                            seed=int(seed), n=int(n))
    if record_oracle and n <= 400:
        x_star, a_star = direct_minimize_grid(
            lambda x: _dense_at(family, x), box, eps, points=oracle_points)
        prob.oracle_x, prob.oracle_alpha = float(x_star), float(a_star)
    return prob


def _dense_at(family, x):
    A = family.eval(np.atleast_1d(x), dense=True)
    return A.toarray() if sp.issparse(A) else np.asarray(A)


# ---------------------------------------------------------------------------
# direct minimization of the full objective over a 1-D grid
# ---------------------------------------------------------------------------

def _lu_triplet(M, v0=None, max_iters=8, tol=1e-10):
    """Smallest singular triplet by LU-based inverse iteration.

    Power iteration on (M^* M)^{-1} with a warm-started right vector;
    returns None when the iteration fails to reach the residual
    tolerance so the caller can fall back to a full SVD.
    """
    n = M.shape[0]
    try:
        lu = sla.lu_factor(M, check_finite=False)
    except (ValueError, np.linalg.LinAlgError):
        return None
    scale = np.linalg.norm(M, np.inf)
    v = (np.full(n, 1.0 / math.sqrt(n), dtype=complex)
         if v0 is None else v0.astype(complex))
    for _ in range(max_iters):
        w = sla.lu_solve(lu, v, trans=2, check_finite=False)
        w = sla.lu_solve(lu, w, trans=0, check_finite=False)
        nw = np.linalg.norm(w)
        if not np.isfinite(nw) or nw == 0.0:
            return None
        v = w / nw
        Mv = M @ v
        sigma = float(np.linalg.norm(Mv))
        if sigma == 0.0:
            return None
        u = Mv / sigma
        res = np.linalg.norm(M.conj().T @ u - sigma * v)
        if res <= tol * scale:
            return sigma, u, v
    return None


def _tracked_alpha(A, eps, z_prev, max_cycles=8):
    """Continue the rightmost point from a nearby matrix.

    Alternates Newton in the real direction on sigma_min = eps with a
    tangency correction in the imaginary direction (the rightmost point
    has Im(u*v) = 0).  Returns (alpha, z) or None when the continuation
    loses its footing.
    """
    n = A.shape[0]
    eye = np.eye(n)
    x, y = z_prev.real, z_prev.imag
    v_warm = None

    def triplet(xx, yy):
        nonlocal v_warm
        M = A - (xx + 1j * yy) * eye
        out = _lu_triplet(M, v_warm)
        if out is None:
            U, s, Vh = np.linalg.svd(M)
            out = s[-1], U[:, -1], Vh[-1].conj()
        v_warm = out[2]
        return out

    for _ in range(max_cycles):
        moved = 0.0
        # restore the level sigma = eps along the real direction
        for _ in range(5):
            s, u, v = triplet(x, y)
            gap = s - eps
            if abs(gap) <= 1e-12 * (1 + eps):
                break
            d = -np.real(np.vdot(u, v))
            if abs(d) < 1e-12:
                return None
            x -= gap / d
            moved = max(moved, abs(gap / d))
        # tangency: drive Im(u*v) to zero along the imaginary direction
        s, u, v = triplet(x, y)
        t0 = np.imag(np.vdot(u, v))
        h = 1e-6 * (1 + abs(y))
        s2, u2, v2 = triplet(x, y + h)
        t1 = np.imag(np.vdot(u2, v2))
        dt = (t1 - t0) / h
        if abs(dt) < 1e-14:
            break
        step = -t0 / dt
        step = float(np.clip(step, -0.5 * (1 + abs(y)), 0.5 * (1 + abs(y))))
        y += step
        if abs(step) <= 1e-11 * (1 + abs(y)) and moved <= 1e-11 * (1 + abs(x)):
            break
    s, u, v = triplet(x, y)
    if abs(s - eps) > 1e-8 * (1 + eps):
        return None
    return x, complex(x, y)


def full_alpha(A, eps, z_hint=None):
    res = psa_square(A, eps, z0=z_hint)
    return res.alpha, res.z


def direct_minimize_grid(matrix_at, box, eps, points=200, refine_tol=1e-8,
                         recheck_every=10, guard_every=5):
    """Minimize alpha_eps(matrix_at(x)) over a 1-D box directly.

    Scans a uniform grid with warm-started continuation (periodically
    cross-checked against the full criss-cross and against the
    eigenvalue lower bound alpha_eps >= spectral abscissa + eps), then
    refines around the best grid point by golden section using the full
    solver.
    """
    lo, hi = float(box.lower[0]), float(box.upper[0])
    xs = np.linspace(lo, hi, points)
    vals = np.empty(points)
    zs = [None] * points
    z_prev = None
    for i, t in enumerate(xs):
        A = matrix_at(t)
        result = None
        if z_prev is not None and i % recheck_every != 0:
            result = _tracked_alpha(A, eps, z_prev)
            if result is not None and i % guard_every == 0:
                # a tracked branch can be overtaken by an eigenvalue branch
                lower = float(np.max(np.linalg.eigvals(A).real)) + eps
                if result[0] < lower - 1e-7 * (1 + abs(lower)):
                    result = None
        if result is None:
            result = full_alpha(A, eps, z_hint=z_prev)
        vals[i], zs[i] = result[0], result[1]
        z_prev = zs[i]
    i_best = int(np.argmin(vals))
    a = xs[max(i_best - 1, 0)]
    b = xs[min(i_best + 1, points - 1)]

    # golden-section refinement; inside the (two-grid-step) bracket the
    # cheap continuation is reliable, and the returned value is always
    # re-certified by the full solver at the chosen point
    phi = (math.sqrt(5) - 1) / 2
    z_hint = zs[i_best]

    def f(t):
        nonlocal z_hint
        result = _tracked_alpha(matrix_at(t), eps, z_hint)
        if result is None:
            result = full_alpha(matrix_at(t), eps, z_hint=z_hint)
        z_hint = result[1]
        return result[0]

    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = f(c), f(d)
    best_t, best_f = (c, fc) if fc < fd else (d, fd)
    while b - a > refine_tol * (1 + abs(best_t)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = f(c)
            if fc < best_f:
                best_t, best_f = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = f(d)
            if fd < best_f:
                best_t, best_f = d, fd
    if vals[i_best] < best_f:
        best_t, best_f = xs[i_best], vals[i_best]
    best_f, _ = full_alpha(matrix_at(best_t), eps, z_hint=z_hint)
    return float(best_t), float(best_f)

"""Pseudospectral abscissa solvers.

The epsilon-pseudospectral abscissa of a square matrix A is the largest
real part over the region where the smallest singular value of A - zI is
at most epsilon.  This module computes it three ways:

* ``psa_square`` — criss-cross iteration for dense square matrices,
  alternating vertical level-set searches (via eigenvalues of a 2n x 2n
  structured matrix) with horizontal searches (the same machinery on a
  rotated matrix).
* ``psa_rect`` — the analogous criss-cross for tall rectangular pencils
  (A_tilde, B_tilde) arising from one-sided projections A(x)V - zV after
  QR compression; here the pseudospectrum may be empty.
* ``psa_large`` — a subspace iteration for a single large matrix that
  grows a projection basis from right singular vectors at successive
  reduced rightmost points.

``psa_auto`` dispatches between the dense and large-scale paths on a
size threshold, and ``boundary_polyline`` traces level-set contours for
plotting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .families import ContractViolation
from .operators import SparsePlusLowRank, as_operator
from .triplets import (SingularTriplet, TripletConvergenceError,
                       smallest_triplet_dense, smallest_triplet_sparse)

LEVEL_TOL_DENSE = 1e-9
LEVEL_TOL_LARGE = 1e-7
IMAG_FILTER = 1e-7       # |Re s| <= IMAG_FILTER * (1 + |s|)
SIZE_SWITCH = 1000
SEGMENT_MIN = 1e-12      # feasible segments shorter than this are dropped
CROSSING_GUARD = 1e-6    # level-equation guard on returned crossings


@dataclass
class SafeguardConfig:
    """Fallback horizontal searches for the rectangular criss-cross."""
    num_points: int = 10
    imag_low: float = -2.0
    imag_high: float = 2.0


@dataclass
class PsaConfig:
    level_tol_dense: float = LEVEL_TOL_DENSE
    level_tol_large: float = LEVEL_TOL_LARGE
    size_switch: int = SIZE_SWITCH
    max_iter: int = 50
    safeguard: SafeguardConfig = field(default_factory=SafeguardConfig)
    triplet_tol: float = 1e-10


@dataclass
class PsaResult:
    alpha: float
    z: complex
    triplet: SingularTriplet | None
    iterations: int
    converged: bool
    empty: bool = False


@dataclass
class ReducedPencil:
    """Tall pencil (A_tilde, B_tilde) with sigma_min(A_tilde - z B_tilde)
    equal to sigma_min(A V - z V) for the compressed pair."""
    A_tilde: np.ndarray
    B_tilde: np.ndarray

    @property
    def k(self):
        return self.B_tilde.shape[1]

    def sigma_min(self, z):
        return float(np.linalg.svd(self.A_tilde - z * self.B_tilde,
                                   compute_uv=False)[-1])


def _validate_square(A, eps):
    A = np.asarray(A.toarray() if sp.issparse(A) else A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractViolation("expected a square matrix")
    if not np.all(np.isfinite(A.real)) or (np.iscomplexobj(A)
                                           and not np.all(np.isfinite(A.imag))):
        raise ContractViolation("matrix entries must be finite")
    if not (eps > 0):
        raise ContractViolation("eps must be positive")
    return A


def _sigma_min_shift(A, z):
    n = A.shape[0]
    return float(np.linalg.svd(A - z * np.eye(n), compute_uv=False)[-1])


def _imag_roots(w, level_tol):
    """Filter eigenvalues to purely imaginary ones, returning imaginary parts."""
    w = w[np.isfinite(w)]
    w = w[np.abs(w) <= 1.0 / level_tol]
    keep = np.abs(w.real) <= IMAG_FILTER * (1.0 + np.abs(w))
    return np.sort(w[keep].imag)


def _dedupe(vals, tol=1e-10):
    out = []
    for v in vals:
        if not out or abs(v - out[-1]) > tol * (1.0 + abs(v)):
            out.append(float(v))
        else:
            out[-1] = 0.5 * (out[-1] + float(v))
    return out


def _polish_crossing(mat_fn, step_mat_fn, eps, t, level_tol, max_steps=6):
    """Newton-refine t so that eps is a singular value of mat_fn(t).

    step_mat_fn(t) is the derivative of the matrix with respect to t.
    The singular value nearest eps is tracked.  Returns (t, gap) where
    gap is the final distance of the tracked singular value from eps.
    """
    gap = math.inf
    for _ in range(max_steps):
        M = mat_fn(t)
        U, s, Vh = np.linalg.svd(M)
        j = int(np.argmin(np.abs(s - eps)))
        gap = abs(s[j] - eps)
        if gap <= level_tol * (1.0 + eps):
            return t, gap
        u, v = U[:, j], Vh[j, :].conj()
        d = np.real(np.vdot(u, step_mat_fn(t) @ v))
        if abs(d) < 1e-14:
            return t, gap
        t = t - (s[j] - eps) / d
    M = mat_fn(t)
    s = np.linalg.svd(M, compute_uv=False)
    gap = float(np.min(np.abs(s - eps)))
    return t, gap


# ---------------------------------------------------------------------------
# square criss-cross
# ---------------------------------------------------------------------------

def vertical_search_square(A, eps, x, level_tol=LEVEL_TOL_DENSE):
    """All y with sigma_min(A - (x+iy)I) = eps, sorted ascending.

    The crossings are the imaginary parts of the purely imaginary
    eigenvalues of the 2n x 2n matrix [[A - xI, -eps I], [eps I,
    -(A - xI)^*]]; this matrix is real whenever A is, so the real
    eigensolver applies.
    """
    A = _validate_square(A, eps)
    n = A.shape[0]
    Ax = A - x * np.eye(n)
    H = np.block([[Ax, -eps * np.eye(n)],
                  [eps * np.eye(n), -Ax.conj().T]])
    ys = _imag_roots(np.linalg.eigvals(H), level_tol)
    eye = np.eye(n)
    out = []
    for y in _dedupe(ys):
        y, gap = _polish_crossing(
            lambda t: A - (x + 1j * t) * eye,
            lambda t: -1j * eye, eps, y, level_tol)
        if gap <= CROSSING_GUARD * (1.0 + eps):
            out.append(y)
    return _dedupe(sorted(out))


def _horizontal_crossings_square(A, eps, y, level_tol=LEVEL_TOL_DENSE):
    """All x with sigma_min(A - (x+iy)I) = eps, via the rotated matrix."""
    n = A.shape[0]
    rotated = 1j * A + y * np.eye(n)
    # sigma_min(rotated - i t I) = sigma_min(A - (t + iy) I)
    xs = vertical_search_square(rotated, eps, 0.0, level_tol)
    eye = np.eye(n)
    out = []
    for x in xs:
        x, gap = _polish_crossing(
            lambda t: A - (t + 1j * y) * eye,
            lambda t: -eye, eps, x, level_tol)
        if gap <= CROSSING_GUARD * (1.0 + eps):
            out.append(x)
    return _dedupe(sorted(out))


def _feasible_midpoints(sigma_fn, eps, ys):
    """Midpoints of the feasible segments cut out by sorted crossings."""
    mids = []
    for a, b in zip(ys[:-1], ys[1:]):
        if b - a < SEGMENT_MIN:
            continue
        m = 0.5 * (a + b)
        if sigma_fn(m) <= eps * (1.0 + 1e-12):
            mids.append(m)
    return mids


def psa_square(A, eps, z0=None, level_tol=LEVEL_TOL_DENSE,
               max_iter=50) -> PsaResult:
    """Pseudospectral abscissa of a dense square matrix by criss-cross."""
    A = _validate_square(A, eps)
    n = A.shape[0]
    eye = np.eye(n)
    if z0 is None:
        w = np.linalg.eigvals(A)
        z0 = w[int(np.argmax(w.real))]
    z0 = complex(z0)

    xs = _horizontal_crossings_square(A, eps, z0.imag, level_tol)
    if xs:
        x, y_best = xs[-1], z0.imag
    else:
        # supplied z0 missed the pseudospectrum; restart at an eigenvalue
        w = np.linalg.eigvals(A)
        z0 = w[int(np.argmax(w.real))]
        xs = _horizontal_crossings_square(A, eps, z0.imag, level_tol)
        x, y_best = (xs[-1], z0.imag) if xs else (z0.real + eps, z0.imag)

    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        ys = vertical_search_square(A, eps, x, level_tol)
        # the current iterate is a tangency of the level set with this
        # vertical line; its double eigenvalue can split off the
        # imaginary axis and escape the crossing filter, so insert it
        # explicitly to split the feasible interval it sits inside
        ys = _dedupe(sorted(ys + [y_best]), level_tol)
        mids = _feasible_midpoints(
            lambda y: _sigma_min_shift(A, x + 1j * y), eps, ys)
        if not mids:
            converged = True
            break
        x_new, y_new = -math.inf, y_best
        for ym in mids:
            cand = _horizontal_crossings_square(A, eps, ym, level_tol)
            if cand and cand[-1] > x_new:
                x_new, y_new = cand[-1], ym
        if not math.isfinite(x_new):
            converged = True
            break
        improved = x_new - x
        x, y_best = x_new, y_new
        if improved <= level_tol * (1.0 + abs(x)):
            converged = True
            break

    x, _ = _polish_crossing(
        lambda t: A - (t + 1j * y_best) * eye,
        lambda t: -eye, eps, x, level_tol)
    x, y_best = _polish_tangency(A, eps, x, y_best, level_tol)
    z = complex(x, y_best)
    trip = smallest_triplet_dense(A - z * eye)
    return PsaResult(alpha=float(x), z=z, triplet=trip,
                     iterations=it, converged=converged)


def _polish_tangency(A, eps, x, y, level_tol):
    """Refine a converged rightmost point so that Im(u*v) ~ 0.

    The criss-cross locates x to the level tolerance at a fixed grid of
    y values; a few Newton steps in y (tangency condition) alternated
    with level restoration in x sharpen the first-order optimality
    residual by several orders of magnitude.
    """
    eye = np.eye(A.shape[0])

    def triplet(xx, yy):
        U, s, Vh = np.linalg.svd(A - (xx + 1j * yy) * eye)
        return s[-1], U[:, -1], Vh[-1].conj()

    best = (x, y)
    for _ in range(8):
        s, u, v = triplet(x, y)
        t0 = np.imag(np.vdot(u, v))
        if abs(t0) <= 1e-13:
            break
        h = 1e-6 * (1 + abs(y))
        _, u2, v2 = triplet(x, y + h)
        dt = (np.imag(np.vdot(u2, v2)) - t0) / h
        if abs(dt) < 1e-14:
            break
        step = float(np.clip(-t0 / dt, -0.1 * (1 + abs(y)),
                             0.1 * (1 + abs(y))))
        y_new = y + step
        x_new, _ = _polish_crossing(
            lambda t: A - (t + 1j * y_new) * eye,
            lambda t: -eye, eps, x, level_tol)
        if x_new < best[0] - level_tol * (1 + abs(best[0])):
            break
        x, y = x_new, y_new
        if x > best[0]:
            best = (x, y)
        if abs(step) <= 1e-12 * (1 + abs(y)):
            break
    s, u, v = triplet(x, y)
    if x >= best[0] - level_tol * (1 + abs(best[0])) and \
            abs(np.imag(np.vdot(u, v))) <= 1e-10:
        return x, y
    return best


# ---------------------------------------------------------------------------
# rectangular pencils
# ---------------------------------------------------------------------------

def compress_reduced(V, AV) -> ReducedPencil:
    """QR-compress the pair (V, A V) into a 2k x k pencil.

    Writing [V, AV] = Q [B_tilde, A_tilde] with Q having orthonormal
    columns gives sigma_min(A_tilde - z B_tilde) = sigma_min(AV - zV)
    for every z, and B_tilde inherits orthonormal columns from V.
    """
    V = np.asarray(V, dtype=complex)
    AV = np.asarray(AV, dtype=complex)
    if V.ndim != 2 or V.shape != AV.shape:
        raise ContractViolation("V and AV must be matching n x k matrices")
    k = V.shape[1]
    gram_err = np.linalg.norm(V.conj().T @ V - np.eye(k))
    if gram_err > 1e-10:
        raise ContractViolation(
            f"V is not orthonormal (||V*V - I|| = {gram_err:.2e})")
    _, R = np.linalg.qr(np.hstack([V, AV]))
    return ReducedPencil(A_tilde=R[:, k:].copy(), B_tilde=R[:, :k].copy())


def _vertical_search_rect(pencil, eps, x, level_tol):
    """All y where eps is a singular value of A_tilde - (x+iy) B_tilde.

    Uses the 3k x 3k generalized eigenvalue problem
    [[M, -eps I], [-eps I, M^*]] - s diag(B, -B^*) with M = A - xB;
    purely imaginary eigenvalues s = iy mark the crossings.
    """
    At, B = pencil.A_tilde, pencil.B_tilde
    m, k = B.shape
    M = At - x * B
    lhs = np.block([[M, -eps * np.eye(m)],
                    [-eps * np.eye(k), M.conj().T]])
    rhs = np.zeros((m + k, m + k), dtype=complex)
    rhs[:m, :k] = B
    rhs[m:, k:] = -B.conj().T
    try:
        w = sla.eigvals(lhs, rhs)
    except sla.LinAlgError as exc:
        raise RuntimeError(
            f"QZ failed in vertical search at x={x!r}: {exc}") from exc
    out = []
    for y in _dedupe(list(_imag_roots(w, level_tol))):
        y, gap = _polish_crossing(
            lambda t: At - (x + 1j * t) * B,
            lambda t: -1j * B, eps, y, level_tol)
        if gap <= CROSSING_GUARD * (1.0 + eps):
            out.append(y)
    return _dedupe(sorted(out))


def _horizontal_search_rect(pencil, eps, y, level_tol):
    """All x where eps is a singular value of A_tilde - (x+iy) B_tilde.

    Crossings are imaginary parts of the purely imaginary eigenvalues of
    the 3k x 3k pencil [[-y B^* + i A^*, eps I], [-eps I, y B + i A]]
    - s diag(B^*, B).
    """
    At, B = pencil.A_tilde, pencil.B_tilde
    m, k = B.shape
    lhs = np.block([[-y * B.conj().T + 1j * At.conj().T, eps * np.eye(k)],
                    [-eps * np.eye(m), y * B + 1j * At]])
    rhs = np.zeros((m + k, m + k), dtype=complex)
    rhs[:k, :m] = B.conj().T
    rhs[k:, m:] = B
    try:
        w = sla.eigvals(lhs, rhs)
    except sla.LinAlgError as exc:
        raise RuntimeError(
            f"QZ failed in horizontal search at y={y!r}: {exc}") from exc
    out = []
    for x in _dedupe(list(_imag_roots(w, level_tol))):
        x, gap = _polish_crossing(
            lambda t: At - (t + 1j * y) * B,
            lambda t: -B, eps, x, level_tol)
        if gap <= CROSSING_GUARD * (1.0 + eps):
            out.append(x)
    return _dedupe(sorted(out))


def _rect_initial_point(pencil, eps, safeguard, level_tol):
    """Starting point for the rectangular criss-cross, or None if every
    candidate misses the pseudospectrum."""
    At, B = pencil.A_tilde, pencil.B_tilde
    k = pencil.k
    best = None
    # heuristic: rightmost eigenvalue of the square upper-block pencil
    try:
        w = sla.eigvals(At[:k, :], B[:k, :])
    except sla.LinAlgError:
        w = np.array([])
    w = w[np.isfinite(w)]
    for lam in sorted(w, key=lambda z: -z.real):
        if pencil.sigma_min(lam) <= eps * (1.0 + 1e-10):
            best = complex(lam)
            break
    # safeguard: horizontal searches on an imaginary-axis grid
    y_grid = np.linspace(safeguard.imag_low, safeguard.imag_high,
                         safeguard.num_points)
    for y in y_grid:
        xs = _horizontal_search_rect(pencil, eps, float(y), level_tol)
        if xs and (best is None or xs[-1] > best.real):
            best = complex(xs[-1], y)
    return best


def psa_rect(pencil: ReducedPencil, eps, safeguard=None,
             level_tol=LEVEL_TOL_DENSE, max_iter=50, z0=None) -> PsaResult:
    """Pseudospectral abscissa of a tall rectangular pencil.

    Unlike the square case the level set may be empty, in which case
    ``empty`` is set and alpha is -inf.  An optional warm start z0 is
    honored when it is (numerically) inside the level set; this matters
    for components too small for the eigenvalue/safeguard
    initialization to spot.
    """
    if not (eps > 0):
        raise ContractViolation("eps must be positive")
    if safeguard is None:
        safeguard = SafeguardConfig()
    At, B = pencil.A_tilde, pencil.B_tilde

    z_start = _rect_initial_point(pencil, eps, safeguard, level_tol)
    if z0 is not None:
        z0 = complex(z0)
        if pencil.sigma_min(z0) <= eps * (1.0 + 1e-9) and \
                (z_start is None or z0.real > z_start.real):
            xs = _horizontal_search_rect(pencil, eps, z0.imag, level_tol)
            z_start = complex(xs[-1], z0.imag) if xs else z0
    if z_start is None:
        return PsaResult(alpha=-math.inf, z=complex(math.nan), triplet=None,
                         iterations=0, converged=True, empty=True)

    x, y_best = z_start.real, z_start.imag
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        ys = _vertical_search_rect(pencil, eps, x, level_tol)
        # split feasible intervals at the current tangency (see
        # psa_square): its double eigenvalue can escape the filter
        ys = _dedupe(sorted(ys + [y_best]), level_tol)
        mids = _feasible_midpoints(
            lambda y: pencil.sigma_min(x + 1j * y), eps, ys)
        if not mids:
            converged = True
            break
        x_new, y_new = -math.inf, y_best
        for ym in mids:
            cand = _horizontal_search_rect(pencil, eps, ym, level_tol)
            if cand and cand[-1] > x_new:
                x_new, y_new = cand[-1], ym
        if not math.isfinite(x_new):
            converged = True
            break
        improved = x_new - x
        x, y_best = x_new, y_new
        if improved <= level_tol * (1.0 + abs(x)):
            converged = True
            break

    x, _ = _polish_crossing(
        lambda t: At - (t + 1j * y_best) * B,
        lambda t: -B, eps, x, level_tol)
    z = complex(x, y_best)
    trip = smallest_triplet_dense(At - z * B)
    return PsaResult(alpha=float(x), z=z, triplet=trip,
                     iterations=it, converged=converged)


# ---------------------------------------------------------------------------
# large-scale path and dispatch
# ---------------------------------------------------------------------------

def _orth_extend(V, v, drop_tol=1e-12):
    """Append v to the orthonormal basis V; returns V unchanged if v is
    numerically inside span(V)."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    nrm0 = np.linalg.norm(v)
    if nrm0 == 0:
        return V, False
    w = v / nrm0
    for _ in range(2):
        w = w - V @ (V.conj().T @ w)
    nrm = np.linalg.norm(w)
    if nrm <= drop_tol:
        return V, False
    return np.hstack([V, (w / nrm)[:, None]]), True


def _rightmost_eigenvalue(op, n):
    try:
        k = min(6, n - 2)
        w = spla.eigs(op.aslinearoperator(), k=k, which="LR",
                      return_eigenvectors=False, tol=1e-8, maxiter=5000)
        return complex(w[int(np.argmax(w.real))])
    except Exception:
        # fall back to a dense solve only as a last resort
        w = np.linalg.eigvals(op.todense())
        return complex(w[int(np.argmax(w.real))])


def psa_large(A, eps, config: PsaConfig | None = None) -> PsaResult:
    """Pseudospectral abscissa of a single large matrix.

    Grows an orthonormal basis V from right singular vectors at the
    rightmost points of the projected problems; the projected abscissas
    increase monotonically and two successive agreeing values terminate
    the iteration.
    """
    if not (eps > 0):
        raise ContractViolation("eps must be positive")
    config = config or PsaConfig()
    tol = config.level_tol_large
    op = as_operator(A)
    n = op.n

    z0 = _rightmost_eigenvalue(op, n)
    trip0 = _shifted_triplet(op, z0 + eps, config)
    V = trip0.v.reshape(-1, 1).astype(complex)
    V /= np.linalg.norm(V)

    prev_alpha = -math.inf
    alpha = -math.inf
    z = z0
    trip = trip0
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        AV = op.matmat(V)
        pencil = compress_reduced(V, AV)
        red = psa_rect(pencil, eps, config.safeguard, level_tol=tol)
        if red.empty:
            # projected level set empty: enrich at the rightmost eigenvalue
            z = z0 + eps
            alpha = -math.inf
        else:
            z = red.z
            alpha = red.alpha
        try:
            trip = _shifted_triplet(op, z, config)
        except TripletConvergenceError as exc:
            if exc.best is None:
                raise RuntimeError(
                    f"triplet solve failed at iteration {it}, z={z!r}") from exc
            trip = exc.best
        if (it >= 2 and math.isfinite(alpha)
                and alpha - prev_alpha <= tol * (1.0 + abs(alpha))):
            converged = True
            break
        V, grew = _orth_extend(V, trip.v)
        if not grew:
            converged = True
            break
        prev_alpha = alpha

    # polish the real part against the full problem
    x, y = z.real, z.imag
    for _ in range(5):
        gap = trip.sigma - eps
        if abs(gap) <= tol * (1.0 + eps):
            break
        d = -np.real(np.vdot(trip.u, trip.v))
        if abs(d) < 1e-14:
            break
        x = x - gap / d
        trip = _shifted_triplet(op, complex(x, y), config)
    z = complex(x, y)
    return PsaResult(alpha=float(x), z=z, triplet=trip,
                     iterations=it, converged=converged)


def _shifted_triplet(op, z, config):
    shifted = op.shifted(z)
    if op.n <= 600:
        return smallest_triplet_dense(shifted.todense())
    return smallest_triplet_sparse(shifted, tol=config.triplet_tol)


def psa_auto(A, eps, config: PsaConfig | None = None) -> PsaResult:
    """Dispatch on size: dense criss-cross up to the switch, then the
    subspace path."""
    config = config or PsaConfig()
    op = as_operator(A)
    if op.n <= config.size_switch:
        return psa_square(op.todense(), eps,
                          level_tol=config.level_tol_dense,
                          max_iter=config.max_iter)
    return psa_large(op, eps, config)


# ---------------------------------------------------------------------------
# contour tracing
# ---------------------------------------------------------------------------

def _sigma_grid(A, xs, ys):
    """sigma_min(A - zI) on the grid, one stacked SVD per row."""
    n = A.shape[0]
    eye = np.eye(n)
    out = np.empty((len(ys), len(xs)))
    for i, y in enumerate(ys):
        stack = A[None, :, :] - ((xs + 1j * y)[:, None, None] * eye)
        out[i, :] = np.linalg.svd(stack, compute_uv=False)[:, -1]
    return out


def boundary_polyline(A, eps, window, resolution=200):
    """Marching-squares polylines of the level set sigma_min(A-zI) = eps.

    window is (re_min, re_max, im_min, im_max).  Returns a list of
    polylines, each an array of complex vertices; closed contours repeat
    their first vertex.
    """
    A = _validate_square(A, eps)
    re_min, re_max, im_min, im_max = map(float, window)
    if not (re_max > re_min and im_max > im_min):
        raise ContractViolation("window must be a nonempty rectangle")
    resolution = int(resolution)
    if resolution < 16:
        raise ContractViolation("resolution must be at least 16")
    xs = np.linspace(re_min, re_max, resolution)
    ys = np.linspace(im_min, im_max, resolution)
    F = _sigma_grid(A, xs, ys) - eps
    segments = _marching_squares(F, xs, ys)
    return _chain_segments(segments)


def _interp(p, fp, q, fq):
    t = fp / (fp - fq)
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def _marching_squares(F, xs, ys):
    segs = []
    ny, nx = F.shape
    for i in range(ny - 1):
        for j in range(nx - 1):
            corners = [(xs[j], ys[i], F[i, j]),
                       (xs[j + 1], ys[i], F[i, j + 1]),
                       (xs[j + 1], ys[i + 1], F[i + 1, j + 1]),
                       (xs[j], ys[i + 1], F[i + 1, j])]
            code = sum(1 << k for k, c in enumerate(corners) if c[2] < 0)
            if code in (0, 15):
                continue
            pts = []
            for k in range(4):
                a, b = corners[k], corners[(k + 1) % 4]
                if (a[2] < 0) != (b[2] < 0):
                    pts.append(_interp((a[0], a[1]), a[2], (b[0], b[1]), b[2]))
            if len(pts) == 2:
                segs.append((pts[0], pts[1]))
            elif len(pts) == 4:
                # saddle cell: resolve with the cell-center value
                center = 0.25 * sum(c[2] for c in corners)
                if (center < 0) == (corners[0][2] < 0):
                    segs.append((pts[0], pts[3]))
                    segs.append((pts[1], pts[2]))
                else:
                    segs.append((pts[0], pts[1]))
                    segs.append((pts[2], pts[3]))
    return segs


def _chain_segments(segments):
    if not segments:
        return []

    def key(pt):
        return (round(pt[0], 12), round(pt[1], 12))

    adjacency = {}
    for idx, (a, b) in enumerate(segments):
        adjacency.setdefault(key(a), []).append((idx, 0))
        adjacency.setdefault(key(b), []).append((idx, 1))
    used = [False] * len(segments)
    polylines = []
    for start in range(len(segments)):
        if used[start]:
            continue
        used[start] = True
        a, b = segments[start]
        chain = [a, b]
        for endsel in (1, 0):
            while True:
                tip = chain[-1] if endsel else chain[0]
                nxt = None
                for idx, end in adjacency.get(key(tip), []):
                    if not used[idx]:
                        nxt = (idx, end)
                        break
                if nxt is None:
                    break
                idx, end = nxt
                used[idx] = True
                other = segments[idx][1 - end]
                if endsel:
                    chain.append(other)
                else:
                    chain.insert(0, other)
        polylines.append(np.array([complex(p[0], p[1]) for p in chain]))
    return polylines

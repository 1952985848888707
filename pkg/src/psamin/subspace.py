"""Subspace framework for minimizing the pseudospectral abscissa of a
parameter-dependent matrix family over a box.

The outer iteration keeps an orthonormal basis V and replaces the
expensive objective alpha_eps(A(x)) with the cheap projected objective
alpha_eps of the tall pencil A(x)V - zV.  Each iteration globally (or
locally, for several parameters) minimizes the projected objective,
computes the true rightmost point at the minimizer, and enriches V with
the right singular vector there, which makes the projected objective a
Hermite interpolant of the true one at all visited points.  The basic
loop expands by one vector per iteration; the extended variant adds
offset interpolation points to strengthen the convergence order.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .abscissa import (PsaConfig, PsaResult, SafeguardConfig,
                       compress_reduced, psa_auto, psa_rect)
from .families import AffineMatrixFamily, ContractViolation, ParameterBox
from .families import _term_matmat
from .optimizers import ObjectiveOracle, OptimizerConfig, minimize_1d, minimize_nd

DEGENERACY_TOL = 1e-6
BASIS_DROP_TOL = 1e-12


class DegenerateGradientError(RuntimeError):
    """|u*v| too small for the analytic gradient; carries the raw value."""

    def __init__(self, msg, gradient=None, uv=None):
        super().__init__(msg)
        self.gradient = gradient
        self.uv = uv


@dataclass
class ProjectionBasis:
    """Orthonormal basis with the (x, z) provenance of each column."""
    V: np.ndarray
    provenance: list = field(default_factory=list)

    @property
    def k(self):
        return self.V.shape[1]

    def orthonormality_defect(self):
        return float(np.linalg.norm(
            self.V.conj().T @ self.V - np.eye(self.k)))

    def extend(self, v, x=None, z=None, drop_tol=BASIS_DROP_TOL):
        """Append v after orthogonalization; returns False when v is
        numerically inside the current span (basis unchanged)."""
        v = np.asarray(v, dtype=complex).reshape(-1)
        nrm = np.linalg.norm(v)
        if nrm == 0:
            return False
        w = v / nrm
        for _ in range(2):
            w = w - self.V @ (self.V.conj().T @ w)
        res = np.linalg.norm(w)
        if res <= drop_tol:
            return False
        self.V = np.hstack([self.V, (w / res)[:, None]])
        self.provenance.append((None if x is None else np.array(x, dtype=float),
                                z))
        return True


@dataclass
class FrameworkConfig:
    eps: float
    eta: int = 10
    tol: float = 1e-7
    max_iters: int = 30
    extended: bool = False
    init_points: object = "auto"   # "auto" | explicit (m, d) array
    inner: OptimizerConfig = field(default_factory=OptimizerConfig)
    size_switch: int = 1000
    seed: int = 0
    safeguard: SafeguardConfig = field(default_factory=SafeguardConfig)

    def validate(self):
        if not (self.eps > 0 and self.tol > 0):
            raise ContractViolation("eps and tol must be positive")
        if self.eta < 1:
            raise ContractViolation("eta must be at least 1")
        if self.max_iters < 3:
            raise ContractViolation("max_iters must be at least 3")
        self.inner.validate()

    def psa_config(self):
        return PsaConfig(size_switch=self.size_switch,
                         safeguard=self.safeguard)


@dataclass
class IterationRecord:
    k: int
    x: list
    z_re: float
    z_im: float
    reduced_opt: float
    full_alpha: float
    subspace_dim: int
    t_reduced: float
    t_full: float
    t_triplet: float
    degenerate: bool = False


@dataclass
class MinimizationTrace:
    records: list = field(default_factory=list)
    x_final: np.ndarray | None = None
    z_final: complex | None = None
    alpha_final: float = math.nan
    converged: bool = False
    seed: int = 0
    config: dict = field(default_factory=dict)
    init_points: list = field(default_factory=list)

    def reduced_optima(self):
        return [r.reduced_opt for r in self.records]

    def to_json(self, path):
        payload = {
            "x_final": None if self.x_final is None else list(map(float, self.x_final)),
            "z_final": None if self.z_final is None else
                       [self.z_final.real, self.z_final.imag],
            "alpha_final": self.alpha_final,
            "converged": self.converged,
            "seed": self.seed,
            "config": self.config,
            "init_points": self.init_points,
            "iterations": [asdict(r) for r in self.records],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)

    def to_csv(self, path):
        cols = ["k", "x", "z_re", "z_im", "reduced_opt", "full_alpha",
                "subspace_dim", "t_reduced", "t_full", "t_triplet",
                "degenerate"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            for r in self.records:
                row = asdict(r)
                row["x"] = " ".join(f"{xi:.12g}" for xi in r.x)
                writer.writerow([row[c] for c in cols])


# ---------------------------------------------------------------------------
# analytic gradients
# ---------------------------------------------------------------------------

def _term_bilinear(family, u, v):
    """Vector of u^* A_i v over the family terms."""
    return np.array([np.vdot(u, np.asarray(_term_matmat(A, v)).ravel())
                     for A, _, _ in family.terms])


def grad_alpha(family: AffineMatrixFamily, x, triplet):
    """Gradient of x -> alpha_eps(A(x)) at a rightmost point.

    triplet is the smallest singular triplet of A(x) - zI at the
    rightmost z.  Returns (gradient, mu) with mu = -1/(u*v); at a
    rightmost point u*v is real and negative, so mu > 0.
    """
    u, v = triplet.u, triplet.v
    uv = np.vdot(u, v)
    grads = family.coefficient_gradients(x)          # kappa x d
    t = _term_bilinear(family, u, v)                 # kappa
    g = np.real((grads.T @ t) / uv)
    if abs(uv) <= 1e-12:
        raise DegenerateGradientError(
            f"|u*v| = {abs(uv):.2e} too small for a reliable gradient",
            gradient=g, uv=uv)
    mu = -1.0 / uv
    return g, mu


def grad_alpha_reduced(family: AffineMatrixFamily, V, x, z, v_red,
                       AiV=None):
    """Gradient of the projected objective x -> alpha_eps of A(x)V - zV.

    v_red is the right singular vector (length k) at the projected
    rightmost point z; the tall left vector is recovered from the
    residual (A(x)V - zV) v_red.
    """
    V = np.asarray(V)
    if AiV is None:
        AiV = [_term_matmat(A, V) for A, _, _ in family.terms]
    c = family.coefficients(x)
    Vv = V @ v_red
    Av = np.zeros(V.shape[0], dtype=complex)
    for ci, AiVi in zip(c, AiV):
        if ci != 0.0:
            Av = Av + ci * (AiVi @ v_red)
    r = Av - z * Vv
    sigma = np.linalg.norm(r)
    if sigma <= 1e-14:
        raise DegenerateGradientError("projected rightmost point has "
                                      "(numerically) zero singular value")
    u = r / sigma
    uv = np.vdot(u, Vv)
    grads = family.coefficient_gradients(x)
    t = np.array([np.vdot(u, AiVi @ v_red) for AiVi in AiV])
    g = np.real((grads.T @ t) / uv)
    if abs(uv) <= 1e-12:
        raise DegenerateGradientError(
            f"|u*Vv| = {abs(uv):.2e} too small for a reliable gradient",
            gradient=g, uv=uv)
    return g, -1.0 / uv


def hessian_fd(oracle, x, step=1e-5):
    """Central-difference Hessian of the oracle's gradient, symmetrized."""
    x = np.asarray(x, dtype=float)
    d = len(x)
    H = np.zeros((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = step
        _, gp = oracle(x + e)
        _, gm = oracle(x - e)
        H[:, j] = (gp - gm) / (2 * step)
    return 0.5 * (H + H.T)


# ---------------------------------------------------------------------------
# the outer loop
# ---------------------------------------------------------------------------

class _EmptyReduced(BaseException):
    """Projected level set empty at x; signals the outer loop.  Derives
    from BaseException so generic error handling inside the inner
    optimizers cannot swallow it."""

    def __init__(self, x):
        self.x = np.array(x, dtype=float)


def _initial_points(box, cfg, rng):
    if not isinstance(cfg.init_points, str):
        pts = np.atleast_2d(np.asarray(cfg.init_points, dtype=float))
        if pts.shape[1] != box.d:
            raise ContractViolation("init_points dimension mismatch")
        return pts
    if box.d == 1:
        if cfg.eta == 1:
            return 0.5 * (box.lower + box.upper)[None, :]
        return np.linspace(box.lower[0], box.upper[0], cfg.eta)[:, None]
    return box.sample(rng, cfg.eta)


def _full_solve(family, x, cfg):
    A = family.eval(x)
    return psa_auto(A, cfg.eps, cfg.psa_config())


def _reduced_oracle(family, basis, box, cfg, AiV):
    safeguard = cfg.safeguard

    def fn(x):
        x = box.clip(x)
        c = family.coefficients(x)
        AVx = np.zeros(basis.V.shape, dtype=complex)
        for ci, AiVi in zip(c, AiV):
            if ci != 0.0:
                AVx = AVx + ci * AiVi
        pencil = compress_reduced(basis.V, AVx)
        red = psa_rect(pencil, cfg.eps, safeguard)
        if red.empty:
            raise _EmptyReduced(x)
        try:
            g, _ = grad_alpha_reduced(family, basis.V, x, red.z,
                                      red.triplet.v, AiV=AiV)
        except DegenerateGradientError as exc:
            g = exc.gradient if exc.gradient is not None else np.zeros(box.d)
        return red.alpha, g

    return ObjectiveOracle(fn, box)


def _offset_directions(d):
    """Unit offsets e_pq = (e_p + e_q)/sqrt(2) for p <= q (e_pp = e_p)."""
    dirs = []
    for p in range(d):
        for q in range(p, d):
            e = np.zeros(d)
            if p == q:
                e[p] = 1.0
            else:
                e[p] = e[q] = 1.0 / math.sqrt(2.0)
            dirs.append(e)
    return dirs


def minimize(family, box, cfg: FrameworkConfig):
    """Basic subspace iteration: one interpolation point per step."""
    return _run(family, box, cfg, extended=False)


def minimize_extended(family, box, cfg: FrameworkConfig):
    """Extended subspace iteration adding d(d+1)/2 offset interpolation
    points per step (offsets clipped to the box)."""
    return _run(family, box, cfg, extended=True)


def _run(family, box, cfg, extended):
    cfg.validate()
    if box.d != family.d:
        raise ContractViolation("box and family dimension mismatch")
    extended = extended or cfg.extended
    rng = np.random.default_rng(cfg.seed)
    pts = _initial_points(box, cfg, rng)

    trace = MinimizationTrace(seed=cfg.seed, config=_config_dict(cfg))
    trace.init_points = [list(map(float, p)) for p in pts]

    basis = None
    for p in pts:
        res = _full_solve(family, p, cfg)
        v = res.triplet.v
        if basis is None:
            w = np.asarray(v, dtype=complex).reshape(-1, 1)
            w = w / np.linalg.norm(w)
            basis = ProjectionBasis(V=w, provenance=[(p.copy(), res.z)])
        else:
            basis.extend(v, x=p, z=res.z)

    AiV = [_term_matmat(A, basis.V) for A, _, _ in family.terms]
    offsets = _offset_directions(box.d) if extended else []

    x_prev = None
    red_prev = -math.inf
    best = None  # (full_alpha, x, z)
    converged = False
    for k in range(1, cfg.max_iters + 1):
        t0 = time.perf_counter()
        oracle = _reduced_oracle(family, basis, box, cfg, AiV)
        try:
            if box.d == 1:
                inner = minimize_1d(oracle, box, cfg.inner)
            else:
                inner = minimize_nd(oracle, box, cfg.inner, x0=x_prev)
            x_k, red_k = np.asarray(inner.x, dtype=float), float(inner.f)
        except _EmptyReduced as exc:
            x_k, red_k = exc.x, -math.inf
        t1 = time.perf_counter()

        full = _full_solve(family, x_k, cfg)
        t2 = time.perf_counter()
        uv = np.vdot(full.triplet.u, full.triplet.v)
        degenerate = abs(uv) <= DEGENERACY_TOL

        trace.records.append(IterationRecord(
            k=k, x=list(map(float, x_k)), z_re=full.z.real, z_im=full.z.imag,
            reduced_opt=red_k, full_alpha=full.alpha,
            subspace_dim=basis.k, t_reduced=t1 - t0, t_full=t2 - t1,
            t_triplet=0.0, degenerate=bool(degenerate)))
        if best is None or full.alpha < best[0]:
            best = (full.alpha, x_k.copy(), full.z)

        if (k >= 2 and math.isfinite(red_k) and math.isfinite(red_prev)
                and red_k - red_prev < cfg.tol):
            converged = True
            break

        t3 = time.perf_counter()
        grew = basis.extend(full.triplet.v, x=x_k, z=full.z)
        if grew:
            _append_products(AiV, family, basis)
        if extended:
            h = _offset_scale(x_k, x_prev, pts)
            if h > 0:
                for e in offsets:
                    x_off = box.clip(x_k + h * e)
                    if np.linalg.norm(x_off - x_k) <= 1e-15:
                        continue
                    off = _full_solve(family, x_off, cfg)
                    if basis.extend(off.triplet.v, x=x_off, z=off.z):
                        _append_products(AiV, family, basis)
                        grew = True
        trace.records[-1].t_triplet = time.perf_counter() - t3
        if not grew:
            converged = True  # basis stagnation: interpolation is exact
            break

        x_prev = x_k
        red_prev = red_k

    alpha_hat, x_hat, z_hat = best
    trace.x_final = x_hat
    trace.z_final = z_hat
    trace.alpha_final = float(alpha_hat)
    trace.converged = converged
    return x_hat, z_hat, float(alpha_hat), trace


def _append_products(AiV, family, basis):
    new_col = basis.V[:, -1:]
    for i, (A, _, _) in enumerate(family.terms):
        AiV[i] = np.hstack([AiV[i], np.asarray(_term_matmat(A, new_col))])


def _offset_scale(x_k, x_prev, init_points):
    if x_prev is not None:
        return float(np.linalg.norm(x_k - x_prev))
    # first iteration: no predecessor, use the nearest initial point
    return float(min(np.linalg.norm(x_k - p) for p in init_points))


def _config_dict(cfg):
    out = asdict(cfg)
    if not isinstance(out.get("init_points"), (str, list)):
        out["init_points"] = np.asarray(cfg.init_points).tolist()
    return out


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

@dataclass
class StagnationReport:
    global_minimizer_flag: bool
    coincident_pairs: list
    monotone: bool
    monotone_violations: list
    rate_ratios: list


def stagnation_certificate(trace: MinimizationTrace) -> StagnationReport:
    """Post-hoc diagnostics: coincident iterates certify global
    optimality; reduced optima must be nondecreasing; empirical rate
    ratios against the final iterate indicate the convergence order."""
    xs = [np.array(r.x) for r in trace.records]
    coincident = []
    for i in range(len(xs)):
        for j in range(i + 1, len(xs)):
            if np.linalg.norm(xs[i] - xs[j]) <= 1e-12 * (1 + np.linalg.norm(xs[i])):
                coincident.append((trace.records[i].k, trace.records[j].k))
    reds = [r.reduced_opt for r in trace.records if math.isfinite(r.reduced_opt)]
    violations = [i for i in range(1, len(reds))
                  if reds[i] < reds[i - 1] - 1e-10 * (1 + abs(reds[i]))]
    ratios = []
    if len(xs) >= 4:
        x_star = xs[-1]
        errs = [np.linalg.norm(x - x_star) for x in xs[:-1]]
        for i in range(1, len(errs) - 1):
            denom = errs[i] * max(errs[i], errs[i - 1])
            if denom > 1e-30:
                ratios.append(errs[i + 1] / denom)
    return StagnationReport(
        global_minimizer_flag=bool(coincident),
        coincident_pairs=coincident,
        monotone=not violations,
        monotone_violations=violations,
        rate_ratios=ratios,
    )

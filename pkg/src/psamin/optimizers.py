"""Inner solvers for minimizing a nonsmooth objective over a box.

``minimize_1d`` is a global method for one parameter: it maintains
support quadratics q_i(t) = f(x_i) + f'(x_i)(t - x_i) + (gamma/2)(t -
x_i)^2, which lower-bound any objective whose second derivative (where
it exists) is at least gamma < 0, and repeatedly evaluates at the
minimizer of their upper envelope until the gap between the best
observed value and the envelope minimum drops below tolerance.

``minimize_nd`` is a local quasi-Newton method for several parameters:
BFGS with a weak-Wolfe bisection line search that tolerates nonsmooth
objectives, box constraints handled by projection, and multiple
restarts from random box points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .families import ContractViolation, ParameterBox


@dataclass
class ObjectiveOracle:
    """Value-and-gradient callback over a box domain."""
    fn: Callable[[np.ndarray], tuple[float, np.ndarray]]
    domain: ParameterBox

    def __call__(self, x):
        f, g = self.fn(np.asarray(x, dtype=float))
        return float(f), np.asarray(g, dtype=float)


@dataclass
class OptimizerConfig:
    gamma: float = -400.0       # lower bound on second derivatives (1-D)
    inner_tol: float = 1e-8
    max_evals: int = 1000
    restarts: int = 5
    c1: float = 1e-4            # Armijo parameter
    c2: float = 0.9             # weak-Wolfe curvature parameter
    seed: int = 0

    def validate(self):
        if not (self.gamma < 0):
            raise ContractViolation("gamma must be negative")
        if not (0 < self.c1 < self.c2 < 1):
            raise ContractViolation("need 0 < c1 < c2 < 1")
        if self.inner_tol <= 0 or self.max_evals < 2:
            raise ContractViolation("bad tolerance or budget")


@dataclass
class OptResult:
    x: np.ndarray
    f: float
    converged: bool
    evals: int
    gap: float = float("nan")   # envelope gap (1-D method only)


# ---------------------------------------------------------------------------
# one parameter: piecewise-quadratic global minimization
# ---------------------------------------------------------------------------

def _upper_envelope_lines(slopes, intercepts):
    """Indices and breakpoints of the upper envelope of lines a t + b.

    Returns (order, breaks) where order lists the active line indices
    from left to right and breaks the t-values where activity changes.
    """
    idx = np.lexsort((-intercepts, slopes))
    lines = []  # stack of (slope, intercept, original index)
    for i in idx:
        a, b = float(slopes[i]), float(intercepts[i])
        if lines and a - lines[-1][0] <= 1e-15 * (1 + abs(a)):
            continue  # duplicate slope; the kept one has the larger intercept
        while len(lines) >= 2:
            a0, b0, _ = lines[-2]
            a1, b1, _ = lines[-1]
            # the top line is buried if the new line overtakes the one
            # below the top no later than the top does
            if (b0 - b) / (a - a0) <= (b0 - b1) / (a1 - a0):
                lines.pop()
            else:
                break
        lines.append((a, b, i))
    order = [i for _, _, i in lines]
    breaks = [(b1 - b2) / (a2 - a1)
              for (a1, b1, _), (a2, b2, _) in zip(lines[:-1], lines[1:])]
    return order, breaks


def minimize_1d(oracle, box=None, cfg: OptimizerConfig | None = None) -> OptResult:
    """Global minimum over an interval, certified by the quadratic
    lower envelope; the returned gap bounds the distance to the true
    global minimum for gamma-admissible objectives."""
    cfg = cfg or OptimizerConfig()
    cfg.validate()
    if box is None:
        box = oracle.domain
    if box.d != 1:
        raise ContractViolation("minimize_1d needs a one-parameter box")
    lo, hi = float(box.lower[0]), float(box.upper[0])
    if not lo < hi:
        raise ContractViolation("empty interval")
    gamma = cfg.gamma

    xs, fs, gs = [], [], []

    def evaluate(t):
        f, g = oracle(np.array([t]))
        xs.append(t)
        fs.append(f)
        gs.append(float(g[0]))
        return f

    evaluate(lo)
    evaluate(hi)
    evaluate(0.5 * (lo + hi))

    gap = np.inf
    converged = False
    while len(xs) < cfg.max_evals:
        x_arr = np.array(xs)
        slopes = np.array(gs) - gamma * x_arr
        intercepts = np.array(fs) - np.array(gs) * x_arr + 0.5 * gamma * x_arr**2

        def env(t):
            return 0.5 * gamma * t * t + np.max(slopes * t + intercepts)

        _, breaks = _upper_envelope_lines(slopes, intercepts)
        cands = [lo, hi] + [t for t in breaks if lo < t < hi]
        cands.sort()
        vals = [env(t) for t in cands]
        j = int(np.argmin(vals))  # ties: smallest abscissa (cands sorted)
        env_min, t_next = vals[j], cands[j]

        best = min(fs)
        gap = best - env_min
        if gap < cfg.inner_tol:
            converged = True
            break
        if any(abs(t_next - t) <= 1e-14 * (1 + abs(t)) for t in xs):
            converged = True  # envelope minimizer already evaluated
            break
        evaluate(t_next)

    i = int(np.argmin(fs))
    # ties in the observed values: smallest abscissa
    best = fs[i]
    for t, f in sorted(zip(xs, fs)):
        if f <= best + 1e-15 * (1 + abs(best)):
            i = xs.index(t)
            break
    return OptResult(x=np.array([xs[i]]), f=fs[i], converged=converged,
                     evals=len(xs), gap=float(gap))


# ---------------------------------------------------------------------------
# several parameters: projected BFGS with weak-Wolfe line search
# ---------------------------------------------------------------------------

def _clip_direction(x, p, box, tol=1e-12):
    """Zero direction components that push out of active bounds."""
    p = p.copy()
    at_lo = x <= box.lower + tol
    at_hi = x >= box.upper - tol
    p[at_lo & (p < 0)] = 0.0
    p[at_hi & (p > 0)] = 0.0
    return p


def _max_step(x, p, box):
    """Largest t with x + t p inside the box."""
    t = np.inf
    for j in range(len(x)):
        if p[j] > 0:
            t = min(t, (box.upper[j] - x[j]) / p[j])
        elif p[j] < 0:
            t = min(t, (box.lower[j] - x[j]) / p[j])
    return max(t, 0.0)


def _weak_wolfe(oracle, box, x, f, g, p, cfg, budget):
    """Bisection line search enforcing Armijo and the weak Wolfe
    condition; robust to kinks in the objective."""
    d0 = float(g @ p)
    t_cap = _max_step(x, p, box)
    if t_cap == 0.0:
        return None
    a, b = 0.0, np.inf
    t = min(1.0, t_cap)
    ft, gt, xt = f, g, x
    for _ in range(40):
        if budget[0] <= 0:
            return None
        xt = box.clip(x + t * p)
        ft, gt = oracle(xt)
        budget[0] -= 1
        if ft > f + cfg.c1 * t * d0:
            b = t
        elif float(gt @ p) < cfg.c2 * d0:
            a = t
        else:
            return t, xt, ft, gt
        if np.isinf(b):
            t = min(2.0 * a, t_cap) if a > 0 else 0.5 * t
            if a >= t_cap:
                return t_cap, box.clip(x + t_cap * p), ft, gt
        else:
            t = 0.5 * (a + b)
        if b - a < 1e-16 and not np.isinf(b):
            break
    if ft < f:
        return t, xt, ft, gt
    return None


def _bfgs_run(oracle, box, x0, cfg, budget):
    x = box.clip(np.asarray(x0, dtype=float))
    f, g = oracle(x)
    budget[0] -= 1
    d = len(x)
    H = np.eye(d)
    best_x, best_f = x.copy(), f
    converged = False
    while budget[0] > 0:
        p = _clip_direction(x, -(H @ g), box)
        step = box.clip(x + p) - x
        if np.linalg.norm(step) <= cfg.inner_tol:
            converged = True
            break
        if float(g @ p) >= 0:
            H = np.eye(d)
            p = _clip_direction(x, -g, box)
            if float(g @ p) >= 0:
                converged = True
                break
        ls = _weak_wolfe(oracle, box, x, f, g, p, cfg, budget)
        if ls is None:
            break
        _, x_new, f_new, g_new = ls
        s = x_new - x
        yv = g_new - g
        sy = float(s @ yv)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(yv):
            Hy = H @ yv
            rho = 1.0 / sy
            # BFGS inverse update
            H = (H - rho * (np.outer(s, Hy) + np.outer(Hy, s))
                 + rho * (rho * float(yv @ Hy) + 1.0) * np.outer(s, s))
        else:
            H = np.eye(d)
        x, f, g = x_new, f_new, g_new
        if f < best_f:
            best_x, best_f = x.copy(), f
    if f < best_f:
        best_x, best_f = x.copy(), f
    return best_x, best_f, converged


def minimize_nd(oracle, box=None, cfg: OptimizerConfig | None = None,
                x0=None) -> OptResult:
    """Local minimization over a box with several restarts; returns the
    best point found.  A failed restart (oracle error) is skipped."""
    cfg = cfg or OptimizerConfig()
    cfg.validate()
    if box is None:
        box = oracle.domain
    rng = np.random.default_rng(cfg.seed)
    starts = []
    if x0 is not None:
        starts.append(np.asarray(x0, dtype=float))
    while len(starts) < max(1, cfg.restarts):
        starts.append(box.sample(rng, 1)[0])

    budget = [cfg.max_evals]
    best = None
    any_converged = False
    for s in starts:
        if budget[0] <= 0:
            break
        try:
            x, f, conv = _bfgs_run(oracle, box, s, cfg, budget)
        except Exception:
            continue
        any_converged = any_converged or conv
        if best is None or f < best[1]:
            best = (x, f)
    if best is None:
        raise RuntimeError("all optimizer restarts failed")
    evals = cfg.max_evals - budget[0]
    return OptResult(x=best[0], f=best[1], converged=any_converged,
                     evals=evals)

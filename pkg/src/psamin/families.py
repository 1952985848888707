"""Affine matrix-valued functions A(x) = sum_i f_i(x) A_i and parameter boxes.

Coefficient matrices may be dense ndarrays, scipy sparse matrices, or
rank-one pairs (b, c) meaning b c^T.  Scalar functions are supplied as
(value, gradient) callback pairs; the static-output-feedback construction
A + B K C is provided as a convenience wrapper that builds the affine
family with one rank-one term per entry of K.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.io import mmread


class ContractViolation(ValueError):
    """An input violates a documented precondition."""


# rank-one terms stay factored above this order
DENSIFY_LIMIT = 500


def constant_fn(c=1.0):
    """Scalar function f(x) = c with zero gradient."""
    return (lambda x: c), (lambda x: np.zeros(np.shape(x)))


def coordinate_fn(j):
    """Scalar function f(x) = x_j (0-based j)."""

    def val(x):
        return float(np.atleast_1d(x)[j])

    def grad(x):
        g = np.zeros(np.atleast_1d(x).shape)
        g[j] = 1.0
        return g

    return val, grad


def polynomial_fn(terms):
    """Scalar multivariate polynomial sum_t c_t * prod_j x_j**p_tj.

    ``terms`` is a list of (coeff, powers) with powers a length-d tuple.
    """
    terms = [(float(c), np.asarray(p, dtype=int)) for c, p in terms]

    def val(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(sum(c * np.prod(x**p) for c, p in terms))

    def grad(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        g = np.zeros_like(x)
        for c, p in terms:
            for j in range(x.size):
                if p[j] == 0:
                    continue
                q = p.copy()
                q[j] -= 1
                g[j] += c * p[j] * np.prod(x**q)
        return g

    return val, grad


class RankOne:
    """Factored rank-one matrix b c^T kept unexpanded."""

    def __init__(self, b, c):
        self.b = np.asarray(b).reshape(-1)
        self.c = np.asarray(c).reshape(-1)
        if self.b.size != self.c.size:
            raise ContractViolation("rank-one factors must have equal length")
        self.shape = (self.b.size, self.c.size)

    def todense(self):
        return np.outer(self.b, self.c)

    def matmat(self, X):
        return np.outer(self.b, self.c @ X)

    def norm2(self):
        return float(np.linalg.norm(self.b) * np.linalg.norm(self.c))


def _term_matmat(A, X):
    if isinstance(A, RankOne):
        return A.matmat(X)
    return A @ X


def _term_dense(A):
    if isinstance(A, RankOne):
        return A.todense()
    if sp.issparse(A):
        return A.toarray()
    return np.asarray(A)


@dataclass
class ParameterBox:
    """Axis-aligned box of permissible parameter values."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape:
            raise ContractViolation("box bounds must have equal length")
        if np.any(self.lower > self.upper):
            raise ContractViolation("empty parameter box")

    @property
    def d(self):
        return self.lower.size

    def clip(self, x):
        return np.clip(np.atleast_1d(np.asarray(x, dtype=float)), self.lower, self.upper)

    def contains(self, x, tol=0.0):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def sample(self, rng, count):
        return rng.uniform(self.lower, self.upper, size=(count, self.d))


class AffineMatrixFamily:
    """A(x) = f_1(x) A_1 + ... + f_kappa(x) A_kappa.

    terms: list of (A_i, f_i, grad_f_i) where A_i is an n-by-n ndarray,
    scipy sparse matrix, or RankOne, f_i maps an R^d vector to a float and
    grad_f_i to an R^d vector.
    """

    def __init__(self, terms, d):
        if not terms:
            raise ContractViolation("family needs at least one term")
        self.terms = list(terms)
        self.d = int(d)
        n = None
        for A, _, _ in self.terms:
            if A.shape[0] != A.shape[1]:
                raise ContractViolation("coefficient matrices must be square")
            if n is None:
                n = A.shape[0]
            elif A.shape[0] != n:
                raise ContractViolation("coefficient matrices differ in order")
        self.n = n
        self.kappa = len(self.terms)

    # -- evaluation ---------------------------------------------------------

    def coefficients(self, x):
        """Vector (f_1(x), ..., f_kappa(x))."""
        x = self._check_x(x)
        return np.array([float(f(x)) for _, f, _ in self.terms])

    def coefficient_gradients(self, x):
        """kappa-by-d array of gradients of the scalar functions at x."""
        x = self._check_x(x)
        return np.array(
            [np.broadcast_to(np.asarray(g(x), dtype=float), (self.d,)) for _, _, g in self.terms]
        )

    def eval(self, x, dense=None):
        """Evaluate A(x).

        Sparse coefficient matrices produce a sparse result; rank-one terms
        are densified only when the order is at most DENSIFY_LIMIT unless
        ``dense`` forces a choice.
        """
        c = self.coefficients(x)
        return self._combine(c, dense=dense)

    def eval_partial(self, x, j):
        """Partial derivative matrix dA/dx_j = sum_i (df_i/dx_j)(x) A_i."""
        if not 0 <= j < self.d:
            raise ContractViolation(f"parameter index {j} out of range for d={self.d}")
        g = self.coefficient_gradients(x)[:, j]
        return self._combine(g)

    def matmat(self, x, X):
        """A(x) @ X without forming A(x)."""
        c = self.coefficients(x)
        X = np.asarray(X)
        out = np.zeros((self.n,) + X.shape[1:], dtype=np.result_type(X.dtype, complex) if self.is_complex else X.dtype)
        for ci, (A, _, _) in zip(c, self.terms):
            if ci != 0.0:
                out = out + ci * _term_matmat(A, X)
        return out

    @property
    def is_complex(self):
        return any(np.iscomplexobj(getattr(A, "b", A)) for A, _, _ in self.terms)

    def _combine(self, c, dense=None):
        sparse_parts, dense_parts, rank1 = [], [], []
        for ci, (A, _, _) in zip(c, self.terms):
            if ci == 0.0:
                continue
            if isinstance(A, RankOne):
                rank1.append((ci, A))
            elif sp.issparse(A):
                sparse_parts.append(ci * A)
            else:
                dense_parts.append(ci * np.asarray(A))
        densify_r1 = dense if dense is not None else self.n <= DENSIFY_LIMIT
        if rank1 and not densify_r1:
            from .operators import SparsePlusLowRank

            base = None
            for m in sparse_parts + dense_parts:
                base = m if base is None else base + m
            if base is None:
                base = sp.csr_matrix((self.n, self.n))
            U = np.column_stack([ci * A.b for ci, A in rank1])
            W = np.column_stack([A.c.conj() for _, A in rank1])
            return SparsePlusLowRank(base, U, W)
        for ci, A in rank1:
            dense_parts.append(ci * A.todense())
        if not sparse_parts and not dense_parts:
            return sp.csr_matrix((self.n, self.n)) if self._any_sparse() else np.zeros((self.n, self.n))
        if dense_parts:
            out = dense_parts[0]
            for m in dense_parts[1:]:
                out = out + m
            for m in sparse_parts:
                out = out + m.toarray()
            return out
        out = sparse_parts[0]
        for m in sparse_parts[1:]:
            out = out + m
        return out

    def _any_sparse(self):
        return any(sp.issparse(A) for A, _, _ in self.terms)

    def _check_x(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.size != self.d:
            raise ContractViolation(f"x has length {x.size}, expected {self.d}")
        if not np.all(np.isfinite(x)):
            raise ContractViolation("x must be finite")
        return x

    def term_norms(self):
        out = []
        for A, _, _ in self.terms:
            if isinstance(A, RankOne):
                out.append(A.norm2())
            elif sp.issparse(A):
                out.append(float(sp.linalg.norm(A)))
            else:
                out.append(float(np.linalg.norm(A, 2)))
        return np.array(out)


# -- static output feedback ------------------------------------------------


@dataclass
class SofProblem:
    """Stabilization data (A, B, C) with entrywise bounds on the gain K."""

    A: object
    B: np.ndarray
    C: np.ndarray
    k_lower: np.ndarray = None
    k_upper: np.ndarray = None
    eps: float = 0.2

    def __post_init__(self):
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        n = self.A.shape[0]
        if self.A.shape[1] != n:
            raise ContractViolation("A must be square")
        if self.B.shape[0] != n or self.C.shape[1] != n:
            raise ContractViolation("B, C dimensions inconsistent with A")
        m, p = self.B.shape[1], self.C.shape[0]
        if self.k_lower is None:
            self.k_lower = -np.ones((m, p))
        if self.k_upper is None:
            self.k_upper = np.ones((m, p))
        self.k_lower = np.broadcast_to(np.asarray(self.k_lower, dtype=float), (m, p)).copy()
        self.k_upper = np.broadcast_to(np.asarray(self.k_upper, dtype=float), (m, p)).copy()

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    def box(self):
        return ParameterBox(self.k_lower.ravel(), self.k_upper.ravel())


def sof_to_family(problem: SofProblem) -> AffineMatrixFamily:
    """Affine family for A + B K C with K flattened row-major.

    Parameter (r, q) multiplies the rank-one matrix B[:, r] C[q, :]; the
    ordering is k_11, k_12, ..., k_mp.
    """
    m, p = problem.m, problem.p
    d = m * p
    terms = [(problem.A, *constant_fn(1.0))]
    for r in range(m):
        for q in range(p):
            j = r * p + q
            terms.append((RankOne(problem.B[:, r], problem.C[q, :]), *coordinate_fn(j)))
    return AffineMatrixFamily(terms, d=d)


# -- file ingestion ---------------------------------------------------------


def read_matrix(path):
    """Read a Matrix Market file; returns sparse for coordinate format."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        M = mmread(str(path))
    except Exception as exc:  # pragma: no cover - scipy formats the message
        raise ContractViolation(f"{path}: malformed Matrix Market file: {exc}") from exc
    if sp.issparse(M):
        return M.tocsr()
    return np.asarray(M)


_BUILTIN_FNS = {"constant", "coordinate", "polynomial"}


def _scalar_fn_from_spec(spec, d):
    kind = spec.get("kind")
    if kind == "constant":
        return constant_fn(float(spec.get("value", 1.0)))
    if kind == "coordinate":
        j = int(spec["index"])
        if not 0 <= j < d:
            raise ContractViolation(f"coordinate index {j} out of range")
        return coordinate_fn(j)
    if kind == "polynomial":
        return polynomial_fn([(t["coeff"], t["powers"]) for t in spec["terms"]])
    raise ContractViolation(f"unknown scalar function kind {kind!r}; expected one of {sorted(_BUILTIN_FNS)}")


def load_descriptor(path):
    """Load a JSON problem descriptor.

    Two layouts are accepted:
      * SOF: {"type": "sof", "A": mtx, "B": mtx, "C": mtx,
              "k_lower": ..., "k_upper": ..., "eps": ...}
      * generic: {"type": "affine", "d": d, "terms": [{"matrix": mtx,
              "function": {...}}, ...], "lower": [...], "upper": [...],
              "eps": ...}

    Matrix paths are resolved relative to the descriptor file.
    Returns (family, box, eps, meta).
    """
    path = Path(path)
    with open(path) as fh:
        doc = json.load(fh)
    base = path.parent
    known = {"type", "A", "B", "C", "k_lower", "k_upper", "eps", "d", "terms",
             "lower", "upper", "name"}
    unknown = set(doc) - known
    if unknown:
        raise ContractViolation(f"unknown descriptor keys: {sorted(unknown)}")
    eps = float(doc.get("eps", 0.2))
    if eps <= 0:
        raise ContractViolation("eps must be positive")
    kind = doc.get("type", "sof")
    if kind == "sof":
        prob = SofProblem(
            A=read_matrix(base / doc["A"]),
            B=np.asarray(read_matrix(base / doc["B"])),
            C=np.asarray(read_matrix(base / doc["C"])),
            k_lower=doc.get("k_lower"),
            k_upper=doc.get("k_upper"),
            eps=eps,
        )
        return sof_to_family(prob), prob.box(), eps, {"type": "sof", "name": doc.get("name")}
    if kind == "affine":
        d = int(doc["d"])
        terms = []
        for t in doc["terms"]:
            A = read_matrix(base / t["matrix"])
            terms.append((A, *_scalar_fn_from_spec(t["function"], d)))
        box = ParameterBox(doc["lower"], doc["upper"])
        if box.d != d:
            raise ContractViolation("box dimension differs from d")
        return AffineMatrixFamily(terms, d=d), box, eps, {"type": "affine", "name": doc.get("name")}
    raise ContractViolation(f"unknown descriptor type {kind!r}")

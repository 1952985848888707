import json

import numpy as np
import pytest
import scipy.io as sio
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from psamin.families import (AffineMatrixFamily, ContractViolation,
                             ParameterBox, RankOne, SofProblem, constant_fn,
                             coordinate_fn, load_descriptor, polynomial_fn,
                             read_matrix, sof_to_family)
from psamin.operators import SparsePlusLowRank


def make_family(rng, n=6, d=2):
    terms = [(rng.standard_normal((n, n)), *constant_fn(2.0)),
             (rng.standard_normal((n, n)), *coordinate_fn(0)),
             (rng.standard_normal((n, n)),
              *polynomial_fn([(1.5, (1, 1)), (-0.5, (0, 2))]))]
    return AffineMatrixFamily(terms, d=d)


def naive_eval(family, x):
    out = np.zeros((family.n, family.n))
    for c, (A, _, _) in zip(family.coefficients(x), family.terms):
        Ad = A.todense() if hasattr(A, "todense") and not isinstance(A, np.ndarray) else A
        out = out + c * np.asarray(Ad.toarray() if sp.issparse(Ad) else Ad)
    return out


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_eval_matches_naive_sum(xvals):
    rng = np.random.default_rng(7)
    fam = make_family(rng)
    x = np.array(xvals)
    assert np.allclose(fam.eval(x), naive_eval(fam, x), atol=1e-12)


def test_eval_partial_matches_fd(rng):
    fam = make_family(rng)
    x = np.array([0.3, -0.7])
    h = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (naive_eval(fam, x + e) - naive_eval(fam, x - e)) / (2 * h)
        assert np.allclose(fam.eval_partial(x, j), fd, atol=1e-6)


def test_eval_partial_out_of_range(rng):
    fam = make_family(rng)
    with pytest.raises(ContractViolation):
        fam.eval_partial(np.zeros(2), 2)


def test_matmat_matches_eval(rng):
    fam = make_family(rng)
    x = np.array([0.1, 0.2])
    X = rng.standard_normal((fam.n, 3))
    assert np.allclose(fam.matmat(x, X), naive_eval(fam, x) @ X, atol=1e-12)


def test_rank_one_term_stays_factored_for_large_n():
    n = 800
    rng = np.random.default_rng(2)
    A = sp.identity(n, format="csr") * -1.0
    b = rng.standard_normal(n)
    c = rng.standard_normal(n)
    fam = AffineMatrixFamily(
        [(A, *constant_fn(1.0)), (RankOne(b, c), *coordinate_fn(0))], d=1)
    M = fam.eval(np.array([0.5]))
    assert isinstance(M, SparsePlusLowRank)
    v = rng.standard_normal(n)
    assert np.allclose(M.matmat(v), -v + 0.5 * b * (c @ v), atol=1e-10)


def test_parameter_box_clip_contains_sample(rng):
    box = ParameterBox(np.array([-1.0, 0.0]), np.array([1.0, 2.0]))
    assert box.d == 2
    assert np.allclose(box.clip([5.0, -5.0]), [1.0, 0.0])
    assert box.contains([0.0, 1.0])
    assert not box.contains([0.0, 3.0])
    pts = box.sample(rng, 50)
    assert pts.shape == (50, 2)
    assert all(box.contains(p) for p in pts)


def test_sof_conversion_row_major(rng):
    n, m, p = 5, 2, 3
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((p, n))
    prob = SofProblem(A=A, B=B, C=C,
                      k_lower=-np.ones((m, p)), k_upper=np.ones((m, p)),
                      eps=0.1)
    fam = sof_to_family(prob)
    K = rng.standard_normal((m, p))
    closed_loop = A + B @ K @ C
    assert np.allclose(naive_eval(fam, K.ravel()), closed_loop, atol=1e-12)
    box = prob.box()
    assert box.d == m * p


def test_descriptor_roundtrip(tmp_path):
    sio.mmwrite(tmp_path / "a0.mtx", sp.csr_matrix(np.diag([0.0, -2.0])))
    sio.mmwrite(tmp_path / "a1.mtx", sp.csr_matrix(np.diag([1.0, 0.0])))
    doc = {"type": "affine", "d": 1, "eps": 0.1,
           "terms": [
               {"matrix": "a0.mtx", "function": {"kind": "constant", "value": 1.0}},
               {"matrix": "a1.mtx",
                "function": {"kind": "polynomial",
                             "terms": [{"coeff": 1.0, "powers": [2]}]}}],
           "lower": [-1.0], "upper": [1.0]}
    path = tmp_path / "fam.json"
    path.write_text(json.dumps(doc))
    fam, box, eps, meta = load_descriptor(path)
    assert eps == 0.1 and meta["type"] == "affine"
    got = fam.eval(np.array([0.5]))
    got = got.toarray() if sp.issparse(got) else np.asarray(got)
    assert np.allclose(got, np.diag([0.25, -2.0]))


def test_descriptor_rejects_unknown_keys(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"type": "affine", "zzz": 1}))
    with pytest.raises(ContractViolation):
        load_descriptor(path)


def test_descriptor_rejects_bad_eps(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"type": "affine", "eps": -1.0}))
    with pytest.raises(ContractViolation):
        load_descriptor(path)


def test_read_matrix_mtx(tmp_path, rng):
    M = sp.random(10, 10, density=0.3, random_state=3)
    sio.mmwrite(tmp_path / "m.mtx", M)
    back = read_matrix(tmp_path / "m.mtx")
    assert sp.issparse(back)
    assert np.allclose(back.toarray(), M.toarray())

import json
import math

import numpy as np
import pytest

from conftest import random_affine_family, unit_box
from psamin.abscissa import psa_square, compress_reduced, psa_rect
from psamin.families import (AffineMatrixFamily, ParameterBox, constant_fn,
                             coordinate_fn, polynomial_fn)
from psamin.optimizers import ObjectiveOracle, OptimizerConfig
from psamin.subspace import (DegenerateGradientError, FrameworkConfig,
                             ProjectionBasis, grad_alpha, grad_alpha_reduced,
                             hessian_fd, minimize, minimize_extended,
                             stagnation_certificate)


def alpha_of(family, x, eps):
    A = np.asarray(family.eval(np.atleast_1d(x), dense=True))
    return psa_square(A, eps)


def test_grad_alpha_worked_diagonal_case():
    fam = AffineMatrixFamily(
        [(np.diag([0.0, -2.0]), *constant_fn(1.0)),
         (np.diag([1.0, 0.0]), *coordinate_fn(0))], d=1)
    res = alpha_of(fam, [-1.0], 0.1)
    g, mu = grad_alpha(fam, np.array([-1.0]), res.triplet)
    assert abs(res.z - (-0.9)) <= 1e-10
    assert abs(g[0] - 1.0) <= 1e-8
    assert abs(mu - 1.0) <= 1e-8


def test_grad_alpha_vanishing_partial(rng):
    # second parameter enters no scalar function
    fam = AffineMatrixFamily(
        [(rng.standard_normal((6, 6)) - 2 * np.eye(6), *constant_fn(1.0)),
         (rng.standard_normal((6, 6)), *coordinate_fn(0))], d=2)
    res = alpha_of(fam, [0.2, 0.7], 0.1)
    g, _ = grad_alpha(fam, np.array([0.2, 0.7]), res.triplet)
    assert g[1] == 0.0


def test_grad_alpha_matches_finite_differences(rng):
    eps = 0.15
    fam = random_affine_family(rng, n=20, d=2)
    x = np.array([0.3, -0.2])
    res = alpha_of(fam, x, eps)
    g, mu = grad_alpha(fam, x, res.triplet)
    h = 1e-6
    fd = np.zeros(2)
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd[j] = (alpha_of(fam, x + e, eps).alpha
                 - alpha_of(fam, x - e, eps).alpha) / (2 * h)
    assert np.linalg.norm(g - fd) <= 1e-6 * (1 + np.linalg.norm(g))
    uv = np.vdot(res.triplet.u, res.triplet.v)
    assert abs(uv.imag) <= 1e-8
    assert uv.real < 0
    assert abs(mu - (-1.0 / uv)) <= 1e-12 * abs(mu)


def test_grad_alpha_reduced_full_space_equals_full(rng):
    eps = 0.2
    fam = random_affine_family(rng, n=12, d=1)
    x = np.array([0.4])
    res = alpha_of(fam, x, eps)
    g_full, _ = grad_alpha(fam, x, res.triplet)
    V = np.eye(12, dtype=complex)
    pencil = compress_reduced(V, np.asarray(fam.eval(x, dense=True)) @ V)
    red = psa_rect(pencil, eps)
    g_red, _ = grad_alpha_reduced(fam, V, x, red.z, red.triplet.v)
    assert np.linalg.norm(g_full - g_red) <= 1e-6 * (1 + np.linalg.norm(g_full))


def test_grad_alpha_reduced_matches_finite_differences(rng):
    eps = 0.2
    fam = random_affine_family(rng, n=18, d=2)
    V, _ = np.linalg.qr(rng.standard_normal((18, 4)))
    V = V.astype(complex)
    x = np.array([0.1, -0.3])

    def reduced_alpha(xx):
        AV = np.asarray(fam.eval(xx, dense=True)) @ V
        return psa_rect(compress_reduced(V, AV), eps)

    # pick eps so the projected level set is certainly nonempty
    probe = compress_reduced(V, np.asarray(fam.eval(x, dense=True)) @ V)
    eps = 1.5 * probe.sigma_min(0.0)

    red = reduced_alpha(x)
    g, _ = grad_alpha_reduced(fam, V, x, red.z, red.triplet.v)
    h = 1e-6
    fd = np.zeros(2)
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd[j] = (reduced_alpha(x + e).alpha - reduced_alpha(x - e).alpha) / (2 * h)
    assert np.linalg.norm(g - fd) <= 1e-6 * (1 + np.linalg.norm(g))


def test_hessian_fd_quadratic_exact():
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])

    def oracle(x):
        return float(0.5 * x @ Q @ x), Q @ x

    H = hessian_fd(oracle, np.array([0.3, -0.1]), step=1e-5)
    assert np.linalg.norm(H - Q) <= 1e-7
    assert np.allclose(H, H.T)


def test_hessian_fd_normal_family():
    # alpha_eps of diag(x^2, -2) is x^2 + eps near x = 0.5
    fam = AffineMatrixFamily(
        [(np.diag([0.0, -2.0]), *constant_fn(1.0)),
         (np.diag([1.0, 0.0]), *polynomial_fn([(1.0, (2,))]))], d=1)
    eps = 0.1

    def oracle(x):
        res = alpha_of(fam, x, eps)
        g, _ = grad_alpha(fam, x, res.triplet)
        return res.alpha, g

    H = hessian_fd(oracle, np.array([0.5]), step=1e-5)
    assert abs(H[0, 0] - 2.0) <= 1e-5


def test_projection_basis_extend_and_reject(rng):
    V = np.linalg.qr(rng.standard_normal((10, 3)))[0].astype(complex)
    basis = ProjectionBasis(V=V)
    assert basis.orthonormality_defect() <= 1e-12
    assert not basis.extend(V[:, 0])       # already in span
    assert basis.extend(rng.standard_normal(10))
    assert basis.k == 4
    assert basis.orthonormality_defect() <= 1e-10


def test_minimize_trivial_normal_family():
    fam = AffineMatrixFamily(
        [(np.diag([0.0, -2.0]), *constant_fn(1.0)),
         (np.diag([1.0, 0.0]), *polynomial_fn([(1.0, (2,))]))], d=1)
    box = ParameterBox(np.array([-1.0]), np.array([1.0]))
    x, z, a, trace = minimize(fam, box, FrameworkConfig(eps=0.1, seed=0))
    assert abs(x[0]) <= 1e-6
    assert abs(a - 0.1) <= 1e-8
    assert len(trace.records) <= 3
    assert trace.converged


def test_minimize_trace_invariants(rng):
    fam = random_affine_family(rng, n=25, d=1)
    box = unit_box(1)
    eps = 0.1
    x, z, a, trace = minimize(fam, box, FrameworkConfig(eps=eps, seed=1))
    reds = [r.reduced_opt for r in trace.records if math.isfinite(r.reduced_opt)]
    # monotone nondecreasing reduced optima
    assert all(reds[i] >= reds[i - 1] - 1e-9 for i in range(1, len(reds)))
    # reduced optimum never exceeds the full value at the same iterate
    for r in trace.records:
        if math.isfinite(r.reduced_opt):
            assert r.reduced_opt <= r.full_alpha + 1e-7
    # final value consistent with an independent full solve
    res = alpha_of(fam, x, eps)
    assert abs(res.alpha - a) <= 1e-7 * (1 + abs(a))
    # u*v real and negative at the full rightmost point
    uv = np.vdot(res.triplet.u, res.triplet.v)
    assert abs(uv.imag) <= 1e-8 and uv.real < 0


def test_minimize_hermite_interpolation(rng):
    eps = 0.15
    fam = random_affine_family(rng, n=20, d=1)
    box = unit_box(1)
    x, z, a, trace = minimize(fam, box, FrameworkConfig(eps=eps, seed=2))
    # at the final iterate the projected objective interpolates the full
    # one: the recorded reduced optimum agrees with the full value there
    last = trace.records[-1]
    if not last.degenerate and math.isfinite(last.reduced_opt):
        assert abs(last.full_alpha - last.reduced_opt) <= 1e-6 * (1 + abs(last.full_alpha))


def test_minimize_determinism(rng):
    fam = random_affine_family(rng, n=15, d=2)
    box = unit_box(2)
    cfg = FrameworkConfig(eps=0.2, seed=7, eta=4, max_iters=5)
    r1 = minimize(fam, box, cfg)
    r2 = minimize(fam, box, FrameworkConfig(eps=0.2, seed=7, eta=4, max_iters=5))
    assert np.array_equal(r1[0], r2[0])
    assert r1[2] == r2[2]


def test_minimize_extended_d1_consistent(rng):
    fam = random_affine_family(rng, n=20, d=1)
    box = unit_box(1)
    x1, _, a1, t1 = minimize(fam, box, FrameworkConfig(eps=0.1, seed=3))
    x2, _, a2, t2 = minimize_extended(
        fam, box, FrameworkConfig(eps=0.1, seed=3, extended=True))
    assert abs(a1 - a2) <= 1e-6 * (1 + abs(a1))
    assert len(t2.records) <= len(t1.records)


def test_config_validation():
    with pytest.raises(Exception):
        FrameworkConfig(eps=-1.0).validate()
    with pytest.raises(Exception):
        FrameworkConfig(eps=0.1, max_iters=2).validate()


def test_stagnation_certificate_flags():
    from psamin.subspace import IterationRecord, MinimizationTrace

    def rec(k, x, red):
        return IterationRecord(k=k, x=[x], z_re=0.0, z_im=0.0,
                               reduced_opt=red, full_alpha=red + 0.1,
                               subspace_dim=k, t_reduced=0, t_full=0,
                               t_triplet=0)

    trace = MinimizationTrace(records=[rec(1, 0.5, -1.0), rec(2, 0.2, -0.9),
                                       rec(3, 0.1, -0.85), rec(4, 0.1, -0.85)])
    report = stagnation_certificate(trace)
    assert report.monotone
    assert report.global_minimizer_flag     # x^(3) == x^(4)
    assert (3, 4) in report.coincident_pairs
    # fault injection: a decreasing reduced optimum must be reported
    trace.records[-1].reduced_opt = -2.0
    bad = stagnation_certificate(trace)
    assert not bad.monotone
    assert bad.monotone_violations


def test_trace_serialization(tmp_path, rng):
    fam = random_affine_family(rng, n=10, d=1)
    box = unit_box(1)
    _, _, _, trace = minimize(fam, box, FrameworkConfig(eps=0.2, seed=5, eta=3))
    jpath = tmp_path / "trace.json"
    cpath = tmp_path / "trace.csv"
    trace.to_json(jpath)
    trace.to_csv(cpath)
    doc = json.loads(jpath.read_text())
    assert doc["converged"] == trace.converged
    assert len(doc["iterations"]) == len(trace.records)
    header = cpath.read_text().splitlines()[0]
    assert header.startswith("k,x,z_re,z_im,reduced_opt,full_alpha")

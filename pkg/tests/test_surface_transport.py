from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twohol import algebra as alg
from twohol.bundle import Atlas, Chart, perturb, trivial_bundle
from twohol.checks import curved_patch, inner_fields
from twohol.connection import LocalConnection, zero_form1, zero_form2
from twohol.fields import random_form1, random_form2
from twohol.numerics import StepSpec, convergence_order
from twohol.path_transport import ParamPath, loop_holonomy_u
from twohol.scenarios import abelian_stokes, gauss_legendre_2d, pullback2
from twohol.surface_transport import (FakeFlatnessWarning, composition_residuals, cylinder_residual,
                                      gauge_cube_residual, hcompose_local, local_2_holonomy, vcompose_local)
from twohol.connection import identity_gauge

S64 = StepSpec(64)


@pytest.fixture(scope="module")
def fields():
    return inner_fields(0)


def _overlap_path():
    return ParamPath(lambda t: np.stack([0.3 + 0.2 * t, -0.5 + 0.4 * t + 0.05 * np.sin(3 * t)], -1), (0.0, 1.0),
                     lambda t: np.stack([0.2 + 0 * t, 0.4 + 0.15 * np.cos(3 * t)], -1))


def test_zero_connection():
    L = local_2_holonomy(LocalConnection(zero_form1(2, 2), zero_form2(2, 2)), curved_patch(), StepSpec(16), alg.inner(2))
    assert np.array_equal(L.H, np.eye(2)) and np.array_equal(L.arrow.source, np.eye(2))


@pytest.mark.parametrize("rect", [((0.0, 1.0), (0.0, 1.0)), ((0.2, 0.7), (0.1, 0.55))])
def test_abelian_pair_against_double_quadrature(rect):
    sc = abelian_stokes(0)
    patch = sc.loop.patch().sub(*rect[0], *rect[1])
    L = local_2_holonomy(sc.bundle.connections[0], patch, S64, sc.cm)
    assert abs(L.H[0, 0] - sc.oracles["surface"](rect)) < 1e-6


def test_abelian_gerbe_against_double_quadrature():
    # G trivial, H = U(1): H = exp(int int gamma*B) with the orientation d_t ^ d_s
    cm = alg.abelian_gerbe()
    rng = np.random.default_rng(5)
    B = random_form2(rng, 2, lambda r: np.array([[1j * r.normal()]]), amp=0.8)
    patch = curved_patch()
    L = local_2_holonomy(LocalConnection(zero_form1(2, 1), B), patch, S64, cm)
    ref = np.exp(gauss_legendre_2d(pullback2(B, patch), 48)[0, 0])
    assert abs(L.H[0, 0] - ref) < 1e-6
    assert abs(abs(L.H[0, 0]) - 1) < 1e-10


def test_alpha_of_H_inverse_is_u(fields):
    cm, conn, _, _ = fields
    patch = curved_patch()
    L = local_2_holonomy(conn, patch, S64, cm)
    assert np.abs(cm.alpha_group(np.linalg.inv(L.H)) - loop_holonomy_u(conn.A, patch, 1.0, 1.0, S64)).max() < 1e-6
    assert L.residual < 1e-6


def test_target_matching_order(fields):
    cm, conn, _, _ = fields
    errs = [(1.0 / n, local_2_holonomy(conn, curved_patch(), StepSpec(n), cm).residual) for n in (8, 16, 32)]
    assert convergence_order(errs) > 3.5


@settings(max_examples=6, deadline=None)
@given(st.floats(0.15, 0.85), st.floats(0.15, 0.85))
def test_composition_any_split(ts, ss):
    cm, conn, _, _ = inner_fields(0)
    res = composition_residuals(conn, curved_patch(), ts, ss, StepSpec(48), cm)
    assert res["horizontal"] < 1e-6 and res["vertical"] < 1e-6


def test_degenerate_pieces(fields):
    cm, conn, _, _ = fields
    patch = curved_patch()
    whole = local_2_holonomy(conn, patch, StepSpec(32), cm)
    thin_t = local_2_holonomy(conn, patch.sub(1.0, 1.0, 0.0, 1.0), StepSpec(32), cm)
    thin_s = local_2_holonomy(conn, patch.sub(0.0, 1.0, 1.0, 1.0), StepSpec(32), cm)
    assert np.array_equal(thin_t.H, np.eye(2))
    assert np.abs(hcompose_local(whole, thin_t, cm).h - whole.H).max() < 1e-14
    assert np.abs(vcompose_local(whole, thin_s, cm).h - whole.H).max() < 1e-14


def test_adjacency_mismatch(fields):
    cm, conn, _, _ = fields
    patch = curved_patch()
    a = local_2_holonomy(conn, patch.sub(0.0, 0.5, 0.0, 1.0), StepSpec(16), cm)
    b = local_2_holonomy(conn, patch.sub(0.6, 1.0, 0.0, 1.0), StepSpec(16), cm)
    with pytest.raises(ValueError):
        hcompose_local(a, b, cm)
    with pytest.raises(ValueError):
        vcompose_local(a, b, cm)


def test_abelian_composition_is_multiplication():
    sc = abelian_stokes(0)
    conn, patch = sc.bundle.connections[0], sc.loop.patch()
    L = local_2_holonomy(conn, patch.sub(0, 0.4, 0, 1), S64, sc.cm)
    R = local_2_holonomy(conn, patch.sub(0.4, 1, 0, 1), S64, sc.cm)
    assert abs(hcompose_local(L, R, sc.cm).h[0, 0] - L.H[0, 0] * R.H[0, 0]) < 1e-15
    assert abs(L.H[0, 0] * R.H[0, 0] - sc.oracles["surface"]()) < 1e-6


def test_fake_flatness_warning_still_runs(fields):
    cm, conn, _, _ = fields
    bad = LocalConnection(conn.A, zero_form2(2, 2))
    with pytest.warns(FakeFlatnessWarning):
        L = local_2_holonomy(bad, curved_patch(), StepSpec(32), cm, fake_flat_bound=1e-6, fd_step=1e-4)
    assert L.notes and L.residual > 1e-3


def test_cube_identity_gauge(fields):
    cm, conn, _, _ = fields
    assert gauge_cube_residual(conn, identity_gauge(2, cm), curved_patch(), StepSpec(32), cm, fd_step=1e-4) < 1e-12


def test_cube_abelian_gerbe():
    cm = alg.abelian_gerbe()
    rng = np.random.default_rng(8)
    B = random_form2(rng, 2, lambda r: np.array([[1j * r.normal()]]))
    gt = identity_gauge(2, cm)
    gt.phi = random_form1(rng, 2, lambda r: np.array([[1j * r.normal()]]))
    res = gauge_cube_residual(LocalConnection(zero_form1(2, 1), B), gt, curved_patch(), StepSpec(64), cm)
    assert res < 1e-6


def test_cube_inner(fields):
    cm, conn, _, gt = fields
    assert gauge_cube_residual(conn, gt, curved_patch(), StepSpec(128), cm, fd_step=1e-4) < 1e-5


def test_cylinder_trivial_bundle():
    cm = alg.inner(2)
    atlas = Atlas([Chart(i, lambda p: np.ones(np.shape(p)[:-1], bool)) for i in range(3)])
    b = trivial_bundle(cm, atlas, dim=2)
    assert cylinder_residual(b, 0, 1, 2, _overlap_path(), StepSpec(16), cm) == 0.0


def test_cylinder_synthesized(three_charts):
    b = three_charts.bundle
    for ijk in [(0, 1, 2), (2, 1, 0), (1, 0, 2)]:
        assert cylinder_residual(b, *ijk, _overlap_path(), StepSpec(64), b.cm) < 1e-6


def test_cylinder_negative_control_linear(three_charts):
    b = three_charts.bundle
    res = [cylinder_residual(perturb(b, "a", eps, pair=(0, 2)), 0, 1, 2, _overlap_path(), StepSpec(64), b.cm)
           for eps in (1e-3, 2e-3, 4e-3)]
    assert res[0] > 1e-4
    ratios = np.array(res[1:]) / np.array(res[:-1])
    assert np.all(np.abs(ratios - 2) < 0.05)


def test_cylinder_order(three_charts):
    b = three_charts.bundle
    errs = [(1.0 / n, cylinder_residual(b, 0, 1, 2, _overlap_path(), StepSpec(n), b.cm)) for n in (4, 8, 16)]
    assert convergence_order(errs) >= 2

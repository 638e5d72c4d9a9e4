from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from twohol import algebra as alg
from twohol.checks import curved_patch, inner_fields, wavy_path
from twohol.connection import Form1, LocalConnection, apply_gauge, zero_form1, zero_form2
from twohol.fields import constant_form1, random_form1
from twohol.numerics import StepSpec, convergence_order
from twohol.path_transport import (ChartError, ParamPath, concatenate, gauge_target_residual, gauge_transport_h,
                                   holonomy1, loop_holonomy_u, script_A, script_B, second_variation_check,
                                   transition_psi, u_decomposition_residual, wreath_holonomy, wreath_loop_crosscheck)
from twohol.scenarios import abelian_stokes, gauss_legendre_1d

from conftest import repeat

S128 = StepSpec(128)
N = np.array([[0.0, 1.0], [0.0, 0.0]])


def _line(a=(0.0, 0.0), b=(1.0, 0.0)):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return ParamPath(lambda t: a + np.asarray(t)[..., None] * (b - a), (0.0, 1.0),
                     lambda t: np.broadcast_to(b - a, np.shape(t) + (2,)))


@pytest.fixture(scope="module")
def fields():
    return inner_fields(0)


def test_zero_connection_is_identity():
    assert np.array_equal(holonomy1(zero_form1(2, 2), wavy_path(), S128).value, np.eye(2))


def test_constant_nilpotent_pullback():
    A = constant_form1(2, np.stack([N, np.zeros((2, 2))]))
    F = holonomy1(A, _line(), StepSpec(16)).value
    assert np.abs(F - [[1, 1], [0, 1]]).max() < 1e-14


def test_chart_violation_names_parameter():
    rho = _line((0, 0), (2, 0))
    rho = ParamPath(rho.map, rho.interval, rho.velocity, region=lambda p: p[..., 0] < 1.0, chart=4)
    with pytest.raises(ChartError, match=r"chart 4 at parameter 0\.5"):
        holonomy1(zero_form1(2, 2), rho, StepSpec(8))


@pytest.mark.parametrize("split", [0.37, 0.5, 0.91])
def test_composition_at_split(fields, split):
    cm, conn, _, _ = fields
    rho = wavy_path()
    whole = holonomy1(conn.A, rho, S128).value
    pieces = holonomy1(conn.A, rho.restrict(0, split), S128).value @ holonomy1(conn.A, rho.restrict(split, 1), S128).value
    assert np.abs(whole - pieces).max() < 1e-9


def test_concatenation_matches_product(fields):
    _, conn, _, _ = fields
    rho = wavy_path()
    joined = concatenate(rho.restrict(0, 0.4), rho.restrict(0.4, 1.0))
    F = holonomy1(conn.A, joined, StepSpec(256)).value
    assert np.abs(F - holonomy1(conn.A, rho, S128).value).max() < 1e-9


@repeat(4)
def test_reversal_is_inverse(rng):
    A = random_form1(rng, 2, alg.inner(2).sample_g)
    rho = wavy_path()
    F, R = holonomy1(A, rho, S128).value, holonomy1(A, rho.reversed(), S128).value
    assert np.abs(F @ R - np.eye(2)).max() < 1e-9


def test_commuting_generators_give_exponential():
    # A takes values in span{I, N}, which is abelian: F = exp(int A)
    def comp(p):
        x, y = p[..., 0], p[..., 1]
        out = np.zeros(p.shape[:-1] + (2, 2, 2))
        out[..., 0, :, :] = np.sin(y)[..., None, None] * N + 0.3 * np.eye(2)
        out[..., 1, :, :] = x[..., None, None] * N
        return out
    A = Form1(comp)
    rho = wavy_path()
    integral = gauss_legendre_1d(lambda t: np.einsum("tm,tmij->tij", rho.velocities(t), comp(rho.points(t))), 0, 1, 48)
    assert np.abs(holonomy1(A, rho, S128).value - expm(integral)).max() < 1e-9


def test_loop_u_trivial_cases(fields):
    _, conn, _, _ = fields
    patch = curved_patch()
    assert np.array_equal(loop_holonomy_u(zero_form1(2, 2), patch, 0.6, 0.7, StepSpec(32)), np.eye(2))
    for t, s in ((0.0, 0.6), (0.6, 0.0)):
        assert np.abs(loop_holonomy_u(conn.A, patch, t, s, StepSpec(32)) - np.eye(2)).max() < 1e-12


@pytest.mark.parametrize("ts", [(1.0, 1.0), (0.55, 0.8), (0.3, 0.25)])
def test_abelian_loop_is_stokes(ts):
    sc = abelian_stokes(0)
    u = loop_holonomy_u(sc.bundle.connections[0].A, sc.loop.patch(), *ts, StepSpec(64))
    assert abs(u[0, 0] - sc.oracles["loop"](*ts)) < 1e-6


def test_script_B_trivial_and_abelian():
    sc = abelian_stokes(0)
    patch, conn, cm = sc.loop.patch(), sc.bundle.connections[0], sc.cm
    zero = LocalConnection(conn.A, zero_form2(2, 1))
    assert np.abs(script_B(zero, patch, 0.7, 0.5, StepSpec(32), cm)).max() == 0.0
    # trivial action: B_t(s) is the plain tau-integral of gamma*B(d_tau, d_s)
    def integrand(tau):
        dt, ds = patch.tangents(tau, 0.5 + 0 * tau)
        return np.einsum("tm,tn,tmnij->tij", dt, ds, conn.B.components(patch.point(tau, 0.5 + 0 * tau)))
    ref = gauss_legendre_1d(integrand, 0.0, 0.7, 48)
    assert np.abs(script_B(conn, patch, 0.7, 0.5, StepSpec(64), cm) - ref).max() < 1e-8


@pytest.mark.parametrize("ts", [(1.0, 1.0), (0.4, 0.7)])
def test_alpha_of_B_equals_A(fields, ts):
    cm, conn, _, _ = fields
    patch = curved_patch()
    a = script_A(conn.A, patch, *ts, StepSpec(64), fd_step=1e-4)
    b = script_B(conn, patch, *ts, StepSpec(64), cm)
    assert np.abs(cm.alpha_algebra(b) - a).max() < 1e-6


def test_gauge_transport_trivial_and_abelian():
    cm = alg.ab_pair()
    rho = wavy_path()
    A = random_form1(np.random.default_rng(1), 2, cm.sample_g)
    r0 = gauge_transport_h(A, zero_form1(2, 1), rho, StepSpec(32), cm)
    assert np.array_equal(r0.value, np.eye(1))
    phi = random_form1(np.random.default_rng(2), 2, cm.sample_h)
    integral = gauss_legendre_1d(lambda t: np.einsum("tm,tmij->tij", rho.velocities(t), phi.components(rho.points(t))),
                                 0, 1, 48)
    h = gauge_transport_h(A, phi, rho, S128, cm).value
    assert abs(h[0, 0] - np.exp(integral[0, 0])) < 1e-9


def test_gauge_target_matching(fields):
    cm, conn, _, gt = fields
    new = apply_gauge(conn, gt, cm, fd_step=1e-4)
    assert gauge_target_residual(conn.A, new.A, gt.g, gt.phi, wavy_path(), S128, cm) < 1e-6


def test_gauge_transport_composition(fields):
    cm, conn, phi, _ = fields
    rho, t = wavy_path(), 0.45
    whole = gauge_transport_h(conn.A, phi, rho, S128, cm).value
    first = gauge_transport_h(conn.A, phi, rho.restrict(0, t), S128, cm)
    second = gauge_transport_h(conn.A, phi, rho.restrict(t, 1), S128, cm).value
    assert np.abs(whole - cm.act_GH(first.companion, second) @ first.value).max() < 1e-9


def test_wreath_matches_pair(fields):
    cm, conn, phi, _ = fields
    w = wreath_holonomy(conn.A, phi, wavy_path(), S128, cm)
    r = gauge_transport_h(conn.A, phi, wavy_path(), S128, cm)
    assert np.abs(w.g - holonomy1(conn.A, wavy_path(), S128).value).max() < 1e-8
    assert np.abs(w.h - r.value).max() < 1e-8
    z = wreath_holonomy(zero_form1(2, 2), zero_form1(2, 2), wavy_path(), StepSpec(8), cm)
    assert np.array_equal(z.g, np.eye(2)) and np.array_equal(z.h, np.eye(2))


def test_wreath_loop_crosscheck(fields):
    cm, conn, phi, _ = fields
    assert wreath_loop_crosscheck(conn.A, phi, curved_patch(), 0.8, 0.7, StepSpec(64), cm) < 1e-6


def test_transition_trivial_cases(fields):
    cm, conn, _, _ = fields
    rho = wavy_path()
    eye = lambda p: np.broadcast_to(np.eye(2), np.shape(p)[:-1] + (2, 2)).copy()
    psi = transition_psi(conn.A, eye, zero_form1(2, 2), rho, S128, cm)
    # the companion transport runs on a grid twice as fine
    assert np.abs(psi.source - holonomy1(conn.A, rho, S128).value).max() < 1e-8
    assert np.array_equal(psi.h, np.eye(2))
    g = lambda p: np.broadcast_to(2 * np.eye(2), np.shape(p)[:-1] + (2, 2)).copy()
    pt = transition_psi(conn.A, g, zero_form1(2, 2), rho.restrict(0.3, 0.3), S128, cm)
    assert np.array_equal(pt.source, 2 * np.eye(2)) and np.array_equal(pt.h, np.eye(2))


def test_u_decomposition(fields):
    _, conn, _, _ = fields
    assert u_decomposition_residual(conn.A, curved_patch(), 0.9, 0.8, 0.35, S128) < 1e-9


def test_second_variation_flat_and_order():
    # flat connection: the mixed derivative vanishes
    Aflat = constant_form1(2, np.stack([N, 2 * N]))
    assert second_variation_check(Aflat, curved_patch(), 0.5, 0.4, StepSpec(64)) < 1e-8
    sc = abelian_stokes(0)
    errs = [(eps, second_variation_check(sc.bundle.connections[0].A, sc.loop.patch(), 0.5, 0.4, StepSpec(256), eps=eps))
            for eps in (0.04, 0.02, 0.01)]
    assert errs[-1][1] < 1e-3
    assert convergence_order(errs) >= 1.8


def test_second_variation_sign():
    # the residual is small while the curvature term itself is not, so the
    # opposite sign would leave a residual of twice the curvature term
    from twohol.connection import curvature1
    _, conn, _, _ = inner_fields(0)
    patch = curved_patch()
    good = second_variation_check(conn.A, patch, 0.5, 0.4, StepSpec(128), eps=0.01, fd_step=1e-4)
    dt, ds = patch.tangents(np.array([0.5]), np.array([0.4]))
    om = np.einsum("...m,...n,...mnij->...ij", dt, ds, curvature1(conn.A, 1e-4).components(patch.point(0.5, 0.4)[None]))
    assert good < 1e-3
    assert np.abs(om).max() > 100 * good


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 0.95))
def test_composition_property(split):
    cm = alg.inner(2)
    A = random_form1(np.random.default_rng(3), 2, cm.sample_g)
    rho = wavy_path()
    pieces = holonomy1(A, rho.restrict(0, split), S128).value @ holonomy1(A, rho.restrict(split, 1), S128).value
    assert np.abs(pieces - holonomy1(A, rho, S128).value).max() < 1e-8

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twohol import algebra as alg
from twohol.bundle import Atlas, Chart, perturb, trivial_bundle
from twohol.checks import curved_patch, inner_fields
from twohol.global_holonomy import (GluingError, Mesh, MeshError, SurfaceLoop, boundary_check, build_mesh,
                                    candidate_charts, equivalent_mod_GH, glue, invariance_under_reassignment,
                                    invariance_under_refinement, order_comparison, reassign,
                                    reparametrization_residual, sphere_kernel_check)
from twohol.numerics import StepSpec, convergence_order
from twohol.path_transport import ChartError
from twohol.scenarios import SHEAR, inner_sphere, sphere_gerbe, sphere_map, torus_in_plane
from twohol.surface_transport import local_2_holonomy

S32, S64 = StepSpec(32), StepSpec(64)
EVERYWHERE = lambda p: np.ones(np.shape(p)[:-1], dtype=bool)


@pytest.fixture(scope="module")
def single_chart():
    """INNER(2) connection on one chart and a non-closed patch."""
    cm, conn, _, _ = inner_fields(0)
    atlas = Atlas([Chart(0, EVERYWHERE)])
    b = trivial_bundle(cm, atlas, dim=2, conn=conn)
    P = curved_patch()
    return cm, b, SurfaceLoop(P.map, P.jacobian), local_2_holonomy(conn, P, S64, cm)


def test_surface_loop_closure():
    assert max(torus_in_plane().closure_residual().values()) < 1e-12
    assert max(sphere_map().closure_residual().values()) < 1e-12


def test_mesh_validation():
    with pytest.raises(MeshError):
        Mesh(np.array([0.0, 0.5, 0.5, 1.0]), np.array([0.0, 1.0]))
    m = Mesh.uniform(2, 3).refined()
    assert m.shape == (4, 6) and np.allclose(m.ts, np.linspace(0, 1, 5))


def test_trivial_bundle_is_identity():
    cm = alg.inner(2)
    b = trivial_bundle(cm, Atlas([Chart(0, EVERYWHERE), Chart(1, EVERYWHERE)]), dim=2)
    loop = torus_in_plane()
    mesh = Mesh.uniform(3, 3)
    assign = np.array([[0, 1, 0], [1, 1, 1], [0, 0, 0]])
    H = glue(loop, b, mesh, assign, StepSpec(8), cm)
    assert np.array_equal(H.hol, np.eye(2)) and np.array_equal(H.source, np.eye(2))
    assert invariance_under_refinement(loop, b, mesh, assign, StepSpec(8), cm).class_distance == 0.0


def test_single_chart_mesh_is_one_cell(single_chart):
    cm, b, loop, _ = single_chart
    mesh, assign = build_mesh(loop, b.atlas, (1, 1))
    assert mesh.shape == (1, 1) and assign.tolist() == [[0]]


@pytest.mark.parametrize("shape", [(1, 1), (2, 3), (4, 4)])
def test_single_chart_collapses_to_local(single_chart, shape):
    cm, b, loop, L = single_chart
    H = glue(loop, b, Mesh.uniform(*shape), np.zeros(shape, int), S64, cm, closure=False)
    assert np.abs(H.hol - L.H).max() < 1e-6
    assert boundary_check(H, loop, b, S64) < 1e-9


def test_single_chart_refinement(single_chart):
    cm, b, loop, _ = single_chart
    c = invariance_under_refinement(loop, b, Mesh.uniform(2, 2), np.zeros((2, 2), int), S64, cm, closure=False)
    assert c.raw_distance < 1e-6


def test_sphere_mesh_is_deterministic(sphere1):
    loop, atlas = sphere1.loop, sphere1.bundle.atlas
    m1, a1 = build_mesh(loop, atlas, (8, 8))
    m2, a2 = build_mesh(loop, atlas, (8, 8))
    assert np.array_equal(a1, a2) and set(np.unique(a1)) == {0, 1}
    # lowest id wins, first and last rows agree
    assert np.array_equal(a1[:, 0], a1[:, -1])
    for a in range(8):
        for b in range(1, 7):
            assert a1[a, b] == min(candidate_charts(loop, atlas, m1, a, b))


def test_pinhole_gap_is_reported():
    hole = np.array([1.5, 0.0])
    atlas = Atlas([Chart(0, lambda p: np.linalg.norm(p - hole, axis=-1) > 1e-3)])
    with pytest.raises(MeshError, match="cell"):
        build_mesh(torus_in_plane(r0=1.5, wobble=0.0, phase=0.0), atlas, (4, 4), max_refinements=1)


def test_equivalence_mod_GH():
    cm = alg.inner(2)
    rng = np.random.default_rng(0)
    g, h = cm.sample_G(rng), cm.sample_H(rng)
    assert equivalent_mod_GH(h, cm.act_GH(g, h), cm)
    # similar matrices with distinct eigenvalues
    P = np.array([[1.0, 2.0], [0.5, 3.0]])
    D = np.diag([2.0, 0.25])
    assert equivalent_mod_GH(D, P @ D @ np.linalg.inv(P), cm)
    # different determinants are different classes
    assert not equivalent_mod_GH(D, np.diag([2.0, 0.5]), cm)
    # H/[G,H] = GL(2)/SL(2): equal determinants are one class even when not similar
    assert equivalent_mod_GH(D, np.eye(2) * np.sqrt(0.5), cm)
    assert np.abs(cm.conjugacy_invariant(D) - cm.conjugacy_invariant(np.eye(2) * np.sqrt(0.5))).max() > 0.1
    ab = alg.abelian_gerbe()
    assert equivalent_mod_GH(np.array([[1j]]), np.array([[1j]]), ab)
    assert not equivalent_mod_GH(np.array([[1j]]), np.array([[-1j]]), ab)


def test_sphere_flux_and_kernel(sphere1):
    b = sphere1.bundle
    mesh, assign = build_mesh(sphere1.loop, b.atlas, sphere1.initial)
    H = glue(sphere1.loop, b, mesh, assign, S64)
    assert sphere_kernel_check(H, b.cm) == 0.0
    assert abs(H.hol[0, 0] - sphere1.oracles["closed_form"]()) < 1e-5
    assert abs(H.hol[0, 0] - sphere1.oracles["flux"]()) < 1e-5


@pytest.mark.parametrize("flux", [0, 0.3])
def test_sphere_flux_values(flux):
    sc = sphere_gerbe(flux)
    mesh, assign = build_mesh(sc.loop, sc.bundle.atlas, sc.initial)
    H = glue(sc.loop, sc.bundle, mesh, assign, S64)
    expected = np.exp(-2j * np.pi * flux)
    assert abs(H.hol[0, 0] - expected) < 1e-5
    assert abs(H.hol[0, 0] - sc.oracles["flux"]()) < 1e-5


def test_sphere_refinement(sphere1):
    b = sphere1.bundle
    mesh, assign = build_mesh(sphere1.loop, b.atlas, (4, 4))
    assert invariance_under_refinement(sphere1.loop, b, mesh, assign, S64).class_distance < 1e-5


def test_trivial_kernel():
    cm = alg.trivial()
    b = trivial_bundle(cm, Atlas([Chart(0, EVERYWHERE)]), dim=3)
    H = glue(sphere_map(), b, Mesh.uniform(2, 2), np.zeros((2, 2), int), StepSpec(8), cm)
    assert sphere_kernel_check(H, cm) == 0.0


def test_inner_sphere_kernel():
    sc = inner_sphere()
    mesh, assign = build_mesh(sc.loop, sc.bundle.atlas, sc.initial)
    H = glue(sc.loop, sc.bundle, mesh, assign, S64)
    assert sphere_kernel_check(H, sc.cm) < 1e-5


def test_reassign_same_chart_is_zero(annulus):
    b = annulus.bundle
    mesh, assign = build_mesh(annulus.loop, b.atlas, annulus.initial)
    cell = (3, 3)
    c = invariance_under_reassignment(annulus.loop, b, mesh, assign, cell, int(assign[cell]), S32)
    assert c.class_distance == 0.0 and c.raw_distance == 0.0


def test_reassign_rejects_foreign_chart(annulus):
    b = annulus.bundle
    mesh, assign = build_mesh(annulus.loop, b.atlas, annulus.initial)
    for a in range(mesh.shape[0]):
        c = candidate_charts(annulus.loop, b.atlas, mesh, a, 2)
        if len(c) == 1:
            with pytest.raises(ChartError):
                reassign(annulus.loop, b.atlas, mesh, assign, (a, 2), 1 - c[0])
            return
    pytest.fail("no single-chart cell found")


def test_annulus_interior_reassignment(annulus):
    b = annulus.bundle
    mesh, assign = build_mesh(annulus.loop, b.atlas, annulus.initial)
    c = invariance_under_reassignment(annulus.loop, b, mesh, assign, (4, 1), 1, S64)
    assert c.class_distance < 1e-5 and c.raw_distance < 1e-5


def test_annulus_first_row_needs_quotient(annulus):
    b = annulus.bundle
    loop = annulus.loop
    mesh, assign = build_mesh(loop, b.atlas, annulus.initial)
    M = mesh.shape[1]
    a0 = next(a for a in range(mesh.shape[0])
              if len(candidate_charts(loop, b.atlas, mesh, a, 0)) == 2 and assign[a, 0] == 0)
    c = invariance_under_reassignment(loop, b, mesh, assign, [(a0, 0), (a0, M - 1)], 1, S64)
    assert c.class_distance < 1e-5
    assert c.raw_distance > 1e-3


def test_order_independence(three_charts):
    b = three_charts.bundle
    mesh, assign = build_mesh(three_charts.loop, b.atlas, three_charts.initial)
    c = order_comparison(three_charts.loop, b, mesh, assign, S32)
    assert c.class_distance < 1e-5 and c.raw_distance < 1e-5


def test_workers_do_not_change_result(annulus):
    b = annulus.bundle
    mesh, assign = build_mesh(annulus.loop, b.atlas, annulus.initial)
    x = glue(annulus.loop, b, mesh, assign, S32, workers=1)
    y = glue(annulus.loop, b, mesh, assign, S32, workers=4)
    assert np.array_equal(x.hol, y.hol) and np.array_equal(x.source, y.source)


def test_inconsistent_data_breaks_gluing(annulus):
    b = perturb(annulus.bundle, "a", 5e-2, pair=(0, 1))
    mesh, assign = build_mesh(annulus.loop, b.atlas, annulus.initial)
    with pytest.raises(GluingError) as info:
        glue(annulus.loop, b, mesh, assign, S32)
    assert info.value.mismatch > 1e-4 and info.value.label


def test_first_last_row_constraint(annulus):
    b = annulus.bundle
    mesh, assign = build_mesh(annulus.loop, b.atlas, annulus.initial)
    bad = assign.copy()
    a0 = next(a for a in range(mesh.shape[0]) if len(candidate_charts(annulus.loop, b.atlas, mesh, a, 0)) == 2)
    bad[a0, 0] = 1 - bad[a0, 0]
    with pytest.raises(MeshError):
        glue(annulus.loop, b, mesh, bad, StepSpec(8))


def test_reparametrization_gates(sphere1):
    b = sphere1.bundle
    ident = lambda t, s: (t, s)
    ident_jac = lambda t, s: ((np.ones_like(t), np.zeros_like(t)), (np.zeros_like(t), np.ones_like(t)))
    assert reparametrization_residual(sphere1.loop, ident, b, S32, Xi_jacobian=ident_jac).class_distance == 0.0
    with pytest.raises(ValueError, match="orientation"):
        reparametrization_residual(sphere1.loop, lambda t, s: (1 - t, s), b, S32)
    with pytest.raises(ValueError, match="depends on t"):
        reparametrization_residual(sphere1.loop, lambda t, s: (t, s + 0.1 * t * (1 - t) * s * (1 - s)), b, S32)


def test_shear_breaks_annulus_closure(annulus):
    with pytest.raises(ValueError, match="closure gap"):
        reparametrization_residual(annulus.loop, SHEAR["map"], annulus.bundle, S32, Xi_jacobian=SHEAR["jacobian"])


def test_step_halving_order(sphere1):
    b = sphere1.bundle
    mesh, assign = build_mesh(sphere1.loop, b.atlas, (4, 4))
    ref = glue(sphere1.loop, b, mesh, assign, StepSpec(128)).hol
    errs = [(1 / n, abs(glue(sphere1.loop, b, mesh, assign, StepSpec(n)).hol[0, 0] - ref[0, 0])) for n in (8, 16, 32)]
    assert convergence_order(errs) >= 2


@settings(max_examples=4, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6))
def test_interior_reassignment_property(a, b_):
    from twohol.scenarios import inner_annulus
    sc = inner_annulus()
    b = sc.bundle
    mesh, assign = build_mesh(sc.loop, b.atlas, sc.initial)
    cands = candidate_charts(sc.loop, b.atlas, mesh, a, b_)
    new = cands[-1]
    c = invariance_under_reassignment(sc.loop, b, mesh, assign, (a, b_), new, StepSpec(32))
    assert c.class_distance < 1e-5

from __future__ import annotations

import numpy as np
import pytest

from twohol import algebra as alg
from twohol.bundle import (Atlas, Chart, perturb, sphere_two_chart_scenario, synthesize_bundle, tetrahedron_residual,
                           tetrahedron_two_arrow, trivial_bundle, verify_cocycle, verify_compatibility)
from twohol.connection import LocalConnection, identity_gauge, zero_form1
from twohol.fields import random_form2, random_gauge, random_group_field
from twohol.numerics import StepSpec, fd_gradient
from twohol.path_transport import ParamPath
from twohol.scenarios import _inner_bundle, plane_sampler
from twohol.surface_transport import cylinder_residual

EVERYWHERE = lambda p: np.ones(np.shape(p)[:-1], dtype=bool)


def _three_plane_charts():
    return Atlas([Chart(0, lambda p: p[..., 0] > -0.5), Chart(1, lambda p: p[..., 0] < 0.5),
                  Chart(2, lambda p: p[..., 1] < 0.3)])


def test_overlap_implies_memberships():
    atlas = _three_plane_charts()
    pts = np.random.default_rng(0).uniform(-2, 2, size=(500, 2))
    for ids in [(0, 1), (0, 2), (0, 1, 2)]:
        ov = atlas.overlap(*ids)(pts)
        for i in ids:
            assert np.all(atlas.contains(i, pts[ov]))


def test_trivial_bundle_all_zero():
    cm = alg.inner(2)
    b = trivial_bundle(cm, _three_plane_charts(), dim=2)
    b.sampler = plane_sampler()
    assert all(v == 0.0 for v in verify_cocycle(b).values())
    assert all(v == 0.0 for v in verify_compatibility(b).values())
    x, y = tetrahedron_two_arrow(b, 0, 1, 2, 0, [0.0, 0.0])
    for arrow in (x, y):
        assert np.array_equal(arrow.source, np.eye(2)) and np.array_equal(arrow.h, np.eye(2))


def test_all_gauges_trivial_gives_trivial_data():
    cm = alg.inner(2)
    atlas = _three_plane_charts()
    glob = LocalConnection(zero_form1(2, 2), random_form2(np.random.default_rng(0), 2, cm.sample_h))
    b = synthesize_bundle(cm, atlas, glob, {i: identity_gauge(2, cm) for i in atlas.ids}, dim=2, sampler=plane_sampler())
    p = b.sample_points((0, 1, 2), 8)
    assert np.abs(b.g(0, 1, p) - np.eye(2)).max() == 0.0
    assert np.abs(b.f(0, 1, 2, p) - np.eye(2)).max() == 0.0
    assert np.abs(b.a(0, 2).components(p)).max() == 0.0


def test_synthesized_inner_is_consistent(three_charts):
    b = three_charts.bundle
    coc = verify_cocycle(b)
    assert max(coc.values()) < 1e-9
    comp = verify_compatibility(b)
    assert comp["gauge_law_A"] < 1e-6 and comp["gauge_law_B"] < 1e-6 and comp["compatibility"] < 1e-6
    assert tetrahedron_residual(b) < 1e-10


def test_annulus_two_charts(annulus):
    coc = verify_cocycle(annulus.bundle)
    assert max(coc.values()) < 1e-9
    assert max(verify_compatibility(annulus.bundle).values()) < 1e-6


def test_normalization(three_charts):
    b = three_charts.bundle
    p = b.sample_points((0, 1), 8)
    cm = b.cm
    assert np.array_equal(b.g(1, 1, p), np.broadcast_to(np.eye(2), p.shape[:-1] + (2, 2)))
    assert np.array_equal(b.f(0, 0, 1, p), np.broadcast_to(np.eye(2), p.shape[:-1] + (2, 2)))
    assert np.abs(b.f(0, 1, 0, p) - cm.identity_H).max() < 1e-12


@pytest.mark.parametrize("what,key", [("f", "f_cocycle"), ("a", "compatibility")])
def test_perturbation_flagged(three_charts, what, key):
    b = three_charts.bundle
    pair = (0, 1, 2) if what == "f" else (0, 2)
    bad = perturb(b, what, 1e-3, pair=pair)
    res = verify_cocycle(bad) if what == "f" else verify_compatibility(bad)
    assert res[key] > 1e-4


def test_perturbed_f_breaks_tetrahedron(three_charts):
    bad = perturb(three_charts.bundle, "f", 1e-3, pair=(0, 1, 2))
    assert tetrahedron_residual(bad) > 1e-4


def test_tetrahedron_outside_overlap(three_charts):
    with pytest.raises(ValueError, match="overlap"):
        tetrahedron_two_arrow(three_charts.bundle, 0, 1, 2, 0, [1.5, 1.5])


def _abelian_bundle(seed=0):
    cm = alg.abelian_gerbe()
    rng = np.random.default_rng(seed)
    atlas = _three_plane_charts()
    glob = LocalConnection(zero_form1(2, 1, complex), random_form2(rng, 2, cm.sample_h))
    gauges = {i: random_gauge(rng, 2, cm) for i in atlas.ids}
    shifts = {}
    for pair in [(0, 1), (1, 2), (0, 2)]:
        k = random_group_field(rng, 2, cm.sample_h, factors=1)
        shifts[pair] = (k, k.derivative)
    return synthesize_bundle(cm, atlas, glob, gauges, 2, shifts, sampler=plane_sampler())


def test_abelian_reduction_of_compatibility():
    # trivial action: a_ij + a_jk = a_ik + d log f_ijk
    b = _abelian_bundle()
    worst = 0.0
    for (i, j, k) in [(0, 1, 2), (2, 0, 1), (1, 2, 0)]:
        p = b.sample_points((i, j, k), 16)
        f = b.f(i, j, k, p)[..., 0, 0]
        dlogf = fd_gradient(lambda q: np.log(b.f(i, j, k, q)[..., 0, 0]), p, 1e-5)
        lhs = (b.a(i, j).components(p) + b.a(j, k).components(p) - b.a(i, k).components(p))[..., 0, 0]
        worst = max(worst, float(np.abs(lhs - dlogf).max()))
        assert np.abs(np.abs(f) - 1).max() < 1e-12
    assert worst < 1e-8
    assert max(verify_compatibility(b).values()) < 1e-6
    assert max(verify_cocycle(b).values()) < 1e-12


def test_sphere_bundle():
    b, loop = sphere_two_chart_scenario(1)
    res = verify_compatibility(b)
    assert res["gauge_law_B"] < 1e-6 and res["compatibility"] == 0.0
    assert loop.sphere
    zb = verify_compatibility(perturb(b, "B_zero", pair=1))
    assert zb["gauge_law_B"] > 1e-3


def _four_chart_bundle():
    cm = alg.inner(2)
    atlas = Atlas([Chart(0, lambda p: p[..., 0] > -0.5), Chart(1, lambda p: p[..., 0] < 0.8),
                   Chart(2, lambda p: p[..., 1] < 0.5), Chart(3, lambda p: p[..., 1] > -0.8)])
    pairs = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    b, _ = _inner_bundle(np.random.default_rng(21), atlas, cm, 2, pairs, plane_sampler())
    return b


def test_fourth_cylinder_follows_from_three():
    # cylinders ijk, jkl, ijl and the tetrahedra pass; then ikl passes as well
    b = _four_chart_bundle()
    rho = ParamPath(lambda t: np.stack([-0.2 + 0.6 * t, -0.4 + 0.5 * t * t], -1), (0.0, 1.0),
                    lambda t: np.stack([0.6 + 0 * t, t], -1))
    spec = StepSpec(64)
    i, j, k, l = 0, 1, 2, 3
    given_ = [cylinder_residual(b, *c, rho, spec, b.cm) for c in [(i, j, k), (j, k, l), (i, j, l)]]
    assert max(given_) < 1e-6
    assert tetrahedron_residual(b, samples=8) < 1e-10
    assert cylinder_residual(b, i, k, l, rho, spec, b.cm) < 1e-6

"""Built-in scenarios: crossed module, bundle, surface and oracles together."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict

import numpy as np

from . import algebra as alg
from .bundle import Atlas, BundleData, Chart, synthesize_bundle, trivial_bundle
from .connection import Form1, Form2, LocalConnection, zero_form1
from .fields import fake_flat_inner, random_gauge, random_group_field, random_wave, WaveForm1
from .global_holonomy import SurfaceLoop
from .path_transport import SurfacePatch


@dataclass
class Scenario:
    name: str
    cm: alg.CrossedModule
    bundle: BundleData
    loop: SurfaceLoop
    initial: tuple = (8, 8)
    oracles: Dict[str, Callable] = field(default_factory=dict)
    extras: Dict[str, object] = field(default_factory=dict)


def gauss_legendre_2d(f: Callable, nodes: int = 48, rect=((0.0, 1.0), (0.0, 1.0))):
    """Tensor Gauss-Legendre quadrature of f(t, s) (vectorized, matrix valued allowed)."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    (t0, t1), (s0, s1) = rect
    ts = 0.5 * (t1 - t0) * (x + 1) + t0
    ss = 0.5 * (s1 - s0) * (x + 1) + s0
    T, S = np.meshgrid(ts, ss, indexing="ij")
    vals = np.asarray(f(T, S))
    W = np.outer(w, w) * 0.25 * (t1 - t0) * (s1 - s0)
    return np.tensordot(W, vals, axes=([0, 1], [0, 1]))


def gauss_legendre_1d(f: Callable, a: float, b: float, nodes: int = 48):
    x, w = np.polynomial.legendre.leggauss(nodes)
    ts = 0.5 * (b - a) * (x + 1) + a
    vals = np.asarray(f(ts))
    return 0.5 * (b - a) * np.tensordot(w, vals, axes=(0, 0))


def pullback2(form: Form2, patch: SurfacePatch):
    def f(t, s):
        p = patch.point(t, s)
        dt, ds = patch.tangents(t, s)
        return np.einsum("...m,...n,...mnij->...ij", dt, ds, form.components(p))
    return f


def pullback1_along(form: Form1, path):
    def f(ts):
        return np.einsum("...m,...mij->...ij", path.velocities(ts), form.components(path.points(ts)))
    return f


# ---------------------------------------------------------------------------
# surfaces

def torus_in_plane(r0=1.5, dr=0.3, phase=3 * np.pi / 8, wobble=0.15):
    """gamma(t, s) = R(s) (cos th, sin th), R = r0 + dr sin 2 pi s, th = 2 pi t + phase + wobble cos 2 pi s.

    R and th are out of phase in s so the t = 0 column encloses area.
    """
    tau = 2 * np.pi

    def m(t, s):
        R = r0 + dr * np.sin(tau * s)
        th = tau * t + phase + wobble * np.cos(tau * s)
        return np.stack([R * np.cos(th), R * np.sin(th)], -1)

    def jac(t, s):
        R = r0 + dr * np.sin(tau * s)
        Rs = dr * tau * np.cos(tau * s)
        th = tau * t + phase + wobble * np.cos(tau * s)
        ths = -wobble * tau * np.sin(tau * s)
        c, sn = np.cos(th), np.sin(th)
        dt = np.stack([-R * tau * sn, R * tau * c], -1)
        ds = np.stack([Rs * c - R * ths * sn, Rs * sn + R * ths * c], -1)
        return dt, ds

    return SurfaceLoop(m, jac)


def sphere_map():
    """Map of the square onto the unit sphere sending the boundary to the north pole.

    (d_t, d_s) is inward oriented, so the degree is -1 for the outward
    orientation and the total solid angle integrates to -4 pi.
    """
    pi = np.pi

    def m(t, s):
        a, b = np.sin(pi * s), np.cos(pi * s)
        c2, s2 = np.cos(2 * pi * t), np.sin(2 * pi * t)
        return np.stack([a * s2, a * b * (1 - c2), b * b + a * a * c2], -1)

    def jac(t, s):
        c2, s2 = np.cos(2 * pi * t), np.sin(2 * pi * t)
        sa, ca = np.sin(pi * s), np.cos(pi * s)
        s2s, c2s = np.sin(2 * pi * s), np.cos(2 * pi * s)
        dt = np.stack([2 * pi * sa * c2, pi * s2s * s2, -2 * pi * sa * sa * s2], -1)
        ds = np.stack([pi * ca * s2, pi * c2s * (1 - c2), -pi * s2s * (1 - c2)], -1)
        return dt, ds

    return SurfaceLoop(m, jac, sphere=True)


SPHERE_DEGREE = -1


def sphere_sampler(rng, count):
    x = rng.normal(size=(count, 3))
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# scenarios

def trivial_scenario() -> Scenario:
    cm = alg.trivial()
    atlas = Atlas([Chart(0, lambda p: np.ones(np.shape(p)[:-1], dtype=bool), "plane")])
    bundle = trivial_bundle(cm, atlas, dim=2)
    return Scenario("trivial", cm, bundle, torus_in_plane(), (4, 4))


def abelian_stokes(seed: int = 0, amp: float = 0.6) -> Scenario:
    """Single chart, G = H = positive reals, B = dA so the pair is fake-flat."""
    cm = alg.ab_pair()
    rng = np.random.default_rng(seed)
    one = np.ones((1, 1))
    wf = WaveForm1([[(random_wave(rng, 2, amp, 1.5), one) for _ in range(2)] for _ in range(2)], 1)
    A = wf.form()

    def b_comp(p):
        return A.d_components(p)

    B = Form2(b_comp)
    conn = LocalConnection(A, B, 0)
    atlas = Atlas([Chart(0, lambda p: np.ones(np.shape(p)[:-1], dtype=bool), "plane")])
    bundle = trivial_bundle(cm, atlas, dim=2, conn=conn)

    def m(t, s):
        return np.stack([t + 0.25 * s * s, s + 0.2 * np.sin(np.pi * t) * s], -1)

    def jac(t, s):
        dt = np.stack([np.ones_like(t), 0.2 * np.pi * np.cos(np.pi * t) * s], -1)
        ds = np.stack([0.5 * s, 1 + 0.2 * np.sin(np.pi * t)], -1)
        return dt, ds

    loop = SurfaceLoop(m, jac)
    patch = loop.patch()

    def surface_oracle(rect=((0.0, 1.0), (0.0, 1.0)), nodes=48):
        return np.exp(gauss_legendre_2d(pullback2(B, patch), nodes, rect)[0, 0])

    def loop_oracle(t=1.0, s=1.0, nodes=48):
        # exp of the circulation of A around the boundary of [0, t] x [0, s]
        total = 0.0
        total += gauss_legendre_1d(pullback1_along(A, patch.column(0.0, 0.0, s)), 0.0, s, nodes)[0, 0]
        total += gauss_legendre_1d(pullback1_along(A, patch.row(s, 0.0, t)), 0.0, t, nodes)[0, 0]
        total -= gauss_legendre_1d(pullback1_along(A, patch.column(t, 0.0, s)), 0.0, s, nodes)[0, 0]
        total -= gauss_legendre_1d(pullback1_along(A, patch.row(0.0, 0.0, t)), 0.0, t, nodes)[0, 0]
        return np.exp(total)

    return Scenario("abelian-stokes", cm, bundle, loop, (1, 1),
                    {"surface": surface_oracle, "loop": loop_oracle}, {"A": A, "B": B})


def _inner_bundle(rng, atlas, cm, dim, shift_pairs, sampler, amp=0.5, freq=0.8):
    A, B = fake_flat_inner(rng, dim, cm, amp=amp, freq=freq)
    glob = LocalConnection(A, B)
    gauges = {i: random_gauge(rng, dim, cm, amp_g=0.5, amp_phi=0.3, freq=freq) for i in atlas.ids}
    shifts = {}
    for pair in shift_pairs:
        k = random_group_field(rng, dim, cm.sample_h, amp=0.4, freq=freq)
        shifts[pair] = (k, k.derivative)
    bundle = synthesize_bundle(cm, atlas, glob, gauges, dim, shifts, sampler=sampler)
    return bundle, glob


def plane_sampler(lo=-2.0, hi=2.0):
    def sample(rng, count):
        return rng.uniform(lo, hi, size=(count, 2))
    return sample


def inner_annulus(seed: int = 7) -> Scenario:
    """INNER(2) on the plane, two charts split at x = -1 and x = 1, a torus mapped onto an annulus."""
    cm = alg.inner(2)
    rng = np.random.default_rng(seed)
    atlas = Atlas([Chart(0, lambda p: p[..., 0] > -1.0, "east"), Chart(1, lambda p: p[..., 0] < 1.0, "west")])
    bundle, glob = _inner_bundle(rng, atlas, cm, 2, [(0, 1)], plane_sampler())
    bundle.name = "inner-annulus"
    return Scenario("inner-annulus", cm, bundle, torus_in_plane(), (8, 8), extras={"global": glob})


def inner_three_charts(seed: int = 11) -> Scenario:
    """INNER(2) with three overlapping charts so that grid vertices see three distinct charts."""
    cm = alg.inner(2)
    rng = np.random.default_rng(seed)
    atlas = Atlas([
        Chart(0, lambda p: (p[..., 0] > 0.2) & (p[..., 1] > -0.6), "north-east"),
        Chart(1, lambda p: p[..., 0] < 0.6, "west"),
        Chart(2, lambda p: p[..., 1] < 0.0, "south"),
    ])
    bundle, glob = _inner_bundle(rng, atlas, cm, 2, [(0, 1), (1, 2), (0, 2)], plane_sampler())
    bundle.name = "inner-three-charts"
    return Scenario("inner-three-charts", cm, bundle, torus_in_plane(), (8, 8), extras={"global": glob})


def inner_sphere(seed: int = 3) -> Scenario:
    """INNER(2) bundle on R^3 restricted to the sphere, north/south charts."""
    cm = alg.inner(2)
    rng = np.random.default_rng(seed)
    atlas = Atlas([Chart(0, lambda p: p[..., 2] > -0.5, "north"), Chart(1, lambda p: p[..., 2] < 0.5, "south")])
    bundle, glob = _inner_bundle(rng, atlas, cm, 3, [(0, 1)], sphere_sampler, amp=0.4)
    bundle.name = "inner-sphere"
    return Scenario("inner-sphere", cm, bundle, sphere_map(), (8, 8), extras={"global": glob})


def _solid_angle(p):
    p = np.asarray(p, dtype=float)
    r3 = np.linalg.norm(p, axis=-1) ** 3
    eps = np.zeros((3, 3, 3))
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1.0
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1.0
    return np.einsum("lmn,...l->...mn", eps, p) / r3[..., None, None]


def sphere_gerbe(flux: float = 1, c: float = 0.5) -> Scenario:
    """Abelian gerbe on the sphere: B_N = i (flux / 2) * solid-angle form, total flux 2 pi i * flux.

    The south chart carries B_S = B_N - d a with a = i c (1 + z)(-y, x, 0) on
    the band, so the gluing has a genuine transition along the band.
    """
    cm = alg.abelian_gerbe()
    k = 0.5j * flux

    def bn(p):
        return (k * _solid_angle(p))[..., None, None]

    def a_comp(p):
        p = np.asarray(p, dtype=float)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        out = np.stack([-(1 + z) * y, (1 + z) * x, np.zeros_like(x)], -1)
        return (1j * c * out)[..., None, None]

    def a_der(p):
        p = np.asarray(p, dtype=float)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        D = np.zeros(p.shape[:-1] + (3, 3), dtype=complex)  # [lam, mu] = d_lam a_mu
        D[..., 1, 0] = -(1 + z)
        D[..., 2, 0] = -y
        D[..., 0, 1] = 1 + z
        D[..., 2, 1] = x
        return (1j * c * D)[..., None, None]

    a = Form1(a_comp, a_der)
    a_neg = Form1(lambda p: -a_comp(p), lambda p: -a_der(p))

    def bs(p):
        return bn(p) - a.d_components(p)

    A0 = zero_form1(3, 1)
    conns = {0: LocalConnection(A0, Form2(bn, fd_step=1e-4), 0), 1: LocalConnection(A0, Form2(bs, fd_step=1e-4), 1)}
    atlas = Atlas([Chart(0, lambda p: p[..., 2] > -0.5, "north"), Chart(1, lambda p: p[..., 2] < 0.5, "south")])
    one_g = lambda i, j, p: np.ones(np.shape(p)[:-1] + (1, 1))
    one_f = lambda i, j, k_, p: np.ones(np.shape(p)[:-1] + (1, 1), dtype=complex)
    dg = lambda i, j, p: np.zeros(np.shape(p)[:-1] + (3, 1, 1))
    bundle = BundleData(cm, atlas, conns, one_g, one_f, {(0, 1): a, (1, 0): a_neg}, dg, 3, 1e-4,
                        sphere_sampler, f"sphere-gerbe({flux})")
    loop = sphere_map()
    patch = loop.patch()

    def flux_quadrature(nodes=64):
        total = gauss_legendre_2d(pullback2(Form2(bn), patch), nodes)[0, 0]
        return np.exp(total)

    def flux_closed_form():
        return np.exp(2j * np.pi * flux * SPHERE_DEGREE)

    return Scenario("sphere-gerbe", cm, bundle, loop, (8, 8),
                    {"flux": flux_quadrature, "closed_form": flux_closed_form}, {"flux": flux})


SHEAR = {
    "map": lambda t, s: (t + 0.2 * t * (1 - t) * s, s * s * (3 - 2 * s)),
    "jacobian": lambda t, s: ((1 + 0.2 * (1 - 2 * t) * s, 0.2 * t * (1 - t)),
                              (np.zeros_like(t), 6 * s * (1 - s))),
}


SCENARIOS = {
    "trivial": trivial_scenario,
    "abelian-stokes": abelian_stokes,
    "inner-annulus": inner_annulus,
    "inner-three-charts": inner_three_charts,
    "inner-sphere": inner_sphere,
    "sphere-gerbe": sphere_gerbe,
}

"""Atlases, nonabelian 2-cocycles and gluing data of a 2-connection.

Normalization: g_ii = 1, f_ijk = 1 whenever i = j or j = k, a_ii = 0.
These make same-chart transitions and fillers identities, which the
gluing algorithm relies on.

Synthesized bundles start from a global connection and a gauge map T_i
per chart.  The chart connections are T_i applied to the global one and
the transition gauge maps are T_i^-1 followed by T_j, optionally shifted
by an H-valued function k_ij (i < j) that changes g_ij by alpha(k_ij).
The cocycle then reads

    f_ijk = k_ij (g0_ij |> k_jk) k_ik^-1

with g0 the unshifted transition and k_ji = g0_ji |> k_ij^-1.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Dict, Iterable, Optional, Tuple

import numpy as np

from .algebra import CrossedModule, TwoArrow, _norm, vcompose
from .connection import (Form1, GaugeTransformation, LocalConnection, apply_gauge, compose_gauge,
                         inverse_gauge, modify_gauge, zero_form1)
from .numerics import StepSpec, fd_gradient
from .path_transport import ParamPath, holonomy1, transition_psi


@dataclass(frozen=True)
class Chart:
    id: int
    contains: Callable
    name: str = ""


class Atlas:
    def __init__(self, charts: Iterable[Chart]):
        self.charts = {c.id: c for c in charts}

    @property
    def ids(self):
        return sorted(self.charts)

    def contains(self, i, points):
        return np.asarray(self.charts[i].contains(np.asarray(points, dtype=float)), dtype=bool)

    def overlap(self, *ids):
        def pred(points):
            ok = np.ones(np.shape(points)[:-1], dtype=bool)
            for i in ids:
                ok &= self.contains(i, points)
            return ok
        return pred

    def region(self, i):
        return self.charts[i].contains


@dataclass
class BundleData:
    """A 2-bundle with 2-connection given in local data.

    g(i, j, p) and f(i, j, k, p) take stacks of points; a[(i, j)] is an
    h-valued Form1; connections[i] is the chart-local (A_i, B_i).
    """
    cm: CrossedModule
    atlas: Atlas
    connections: Dict[int, LocalConnection]
    g_fn: Callable
    f_fn: Callable
    a_forms: Dict[Tuple[int, int], Form1]
    dg_fn: Optional[Callable] = None
    dim: int = 3
    fd_step: float = 1e-4
    sampler: Optional[Callable] = None
    name: str = ""

    def g(self, i, j, p):
        p = np.asarray(p, dtype=float)
        if i == j:
            eye = self.cm.identity_G
            return np.broadcast_to(eye, p.shape[:-1] + eye.shape).copy()
        return self.g_fn(i, j, p)

    def dg(self, i, j, p):
        p = np.asarray(p, dtype=float)
        if i == j:
            return np.zeros(p.shape[:-1] + (p.shape[-1], self.cm.dim_G, self.cm.dim_G), dtype=self.cm.dtype_G)
        if self.dg_fn is not None:
            return self.dg_fn(i, j, p)
        return fd_gradient(lambda q: self.g_fn(i, j, q), p, self.fd_step)

    def f(self, i, j, k, p):
        p = np.asarray(p, dtype=float)
        if i == j or j == k:
            eye = self.cm.identity_H
            return np.broadcast_to(eye, p.shape[:-1] + eye.shape).copy()
        return self.f_fn(i, j, k, p)

    def a(self, i, j) -> Form1:
        if i == j:
            return zero_form1(self.dim, self.cm.dim_H, self.cm.dtype_H)
        return self.a_forms[(i, j)]

    def gauge(self, i, j) -> GaugeTransformation:
        return GaugeTransformation(lambda p: self.g(i, j, p), self.a(i, j), lambda p: self.dg(i, j, p), self.fd_step)

    def transition(self, i, j, rho: ParamPath, spec: StepSpec) -> TwoArrow:
        """Psi_ij(rho); the identity 2-arrow on F_{A_i}(rho) when i = j."""
        if i == j:
            F = holonomy1(self.connections[i].A, rho, spec).value
            return TwoArrow(F, self.cm.identity_H.copy())
        return transition_psi(self.connections[i].A, lambda p: self.g(i, j, p), self.a(i, j), rho, spec, self.cm)

    def sample_points(self, ids, count: int, seed: int = 0, max_tries: int = 50):
        """Seeded points in the overlap of ``ids`` (rejection sampling)."""
        rng = np.random.default_rng(seed)
        pred = self.atlas.overlap(*ids)
        out = []
        have = 0
        for _ in range(max_tries):
            cand = self.sampler(rng, 4 * count) if self.sampler else rng.normal(size=(4 * count, self.dim))
            keep = cand[pred(cand)]
            out.append(keep)
            have += len(keep)
            if have >= count:
                break
        pts = np.concatenate(out)[:count] if out else np.zeros((0, self.dim))
        return pts


def trivial_bundle(cm: CrossedModule, atlas: Atlas, dim: int = 3, conn: Optional[LocalConnection] = None) -> BundleData:
    from .connection import zero_form2
    conn = conn or LocalConnection(zero_form1(dim, cm.dim_G, cm.dtype_G), zero_form2(dim, cm.dim_H, cm.dtype_H))
    conns = {i: replace(conn, chart=i) for i in atlas.ids}
    eyeG, eyeH = cm.identity_G, cm.identity_H
    g = lambda i, j, p: np.broadcast_to(eyeG, np.shape(p)[:-1] + eyeG.shape).copy()
    f = lambda i, j, k, p: np.broadcast_to(eyeH, np.shape(p)[:-1] + eyeH.shape).copy()
    dg = lambda i, j, p: np.zeros(np.shape(p)[:-1] + (dim,) + eyeG.shape, dtype=cm.dtype_G)
    ids = atlas.ids
    a = {(i, j): zero_form1(dim, cm.dim_H, cm.dtype_H) for i in ids for j in ids if i != j}
    return BundleData(cm, atlas, conns, g, f, a, dg, dim, name="trivial")


def synthesize_bundle(cm: CrossedModule, atlas: Atlas, global_conn: LocalConnection,
                      gauges: Dict[int, GaugeTransformation], dim: int = 3,
                      shifts: Optional[Dict[Tuple[int, int], Tuple[Callable, Callable]]] = None,
                      fd_step: float = 1e-4, sampler=None, name: str = "synthesized") -> BundleData:
    """Consistent bundle data from a global connection and per-chart gauge maps.

    ``shifts[(i, j)] = (k, dk)`` for i < j optionally modifies the transition
    by an H-valued function.  f is built from the shifts rather than solved
    from the g-cocycle condition, so the construction is exact for every
    crossed module.
    """
    shifts = dict(shifts or {})
    for (i, j) in shifts:
        if not i < j:
            raise ValueError("shifts are given for i < j only")
    ids = atlas.ids
    conns = {i: replace(apply_gauge(global_conn, gauges[i], cm, fd_step), chart=i) for i in ids}
    base = {}
    trans = {}
    for i in ids:
        for j in ids:
            if i == j:
                continue
            base[(i, j)] = compose_gauge(inverse_gauge(gauges[i], cm), gauges[j], cm)
    for i in ids:
        for j in ids:
            if i < j:
                T = base[(i, j)]
                if (i, j) in shifts:
                    k, dk = shifts[(i, j)]
                    T = modify_gauge(T, k, dk, conns[i].A, cm)
                trans[(i, j)] = T
                trans[(j, i)] = inverse_gauge(T, cm)

    eyeH = cm.identity_H

    def k_of(i, j, p):
        p = np.asarray(p, dtype=float)
        if i == j:
            return np.broadcast_to(eyeH, p.shape[:-1] + eyeH.shape).copy()
        if i < j:
            if (i, j) in shifts:
                return shifts[(i, j)][0](p)
            return np.broadcast_to(eyeH, p.shape[:-1] + eyeH.shape).copy()
        return cm.act_GH(base[(i, j)].g(p), np.linalg.inv(k_of(j, i, p)))

    def g_fn(i, j, p):
        return trans[(i, j)].g(p)

    def dg_fn(i, j, p):
        return trans[(i, j)].dg_at(p)

    def f_fn(i, j, k, p):
        return k_of(i, j, p) @ cm.act_GH(base[(i, j)].g(p), k_of(j, k, p)) @ np.linalg.inv(k_of(i, k, p))

    a = {key: T.phi for key, T in trans.items()}
    return BundleData(cm, atlas, conns, g_fn, f_fn, a, dg_fn, dim, fd_step, sampler, name)


def perturb(bundle: BundleData, what: str, amount: float = 1e-3, seed: int = 0,
            pair: Optional[Tuple] = None) -> BundleData:
    """Negative-control copy with f, a or one chart's B perturbed."""
    rng = np.random.default_rng(seed)
    cm = bundle.cm
    if what == "f":
        X = np.asarray(cm.sample_h(rng))
        from scipy.linalg import expm
        E = expm(amount * X / max(_norm(X), 1e-300))
        old = bundle.f_fn

        def f_fn(i, j, k, p):
            val = old(i, j, k, p)
            return val @ E if (pair is None or (i, j, k) == tuple(pair)) else val
        return replace(bundle, f_fn=f_fn)
    if what == "a":
        key = tuple(pair) if pair is not None else sorted(bundle.a_forms)[0]
        X = np.asarray(cm.sample_h(rng))
        X = amount * X / max(_norm(X), 1e-300)
        old = bundle.a_forms[key]

        def comp(p):
            c = old.components(p)
            return c + X
        new = dict(bundle.a_forms)
        new[key] = Form1(comp, (lambda p: old.derivative(p)) if old.has_derivative else None, fd_step=bundle.fd_step)
        return replace(bundle, a_forms=new)
    if what == "B_zero":
        from .connection import zero_form2
        key = pair if pair is not None else bundle.atlas.ids[-1]
        conns = dict(bundle.connections)
        conns[key] = replace(conns[key], B=zero_form2(bundle.dim, cm.dim_H, cm.dtype_H))
        return replace(bundle, connections=conns)
    raise ValueError(f"unknown perturbation {what!r}")


# ---------------------------------------------------------------------------
# verifiers

def _triples(ids):
    return [(i, j, k) for i in ids for j in ids for k in ids]


def verify_cocycle(b: BundleData, samples: int = 32, seed: int = 0) -> Dict[str, float]:
    """Max residuals of the cocycle conditions and the rearranged identity."""
    cm = b.cm
    ids = b.atlas.ids
    out = {"g_cocycle": 0.0, "f_cocycle": 0.0, "rearranged": 0.0, "normalization": 0.0}
    inv = np.linalg.inv
    for (i, j, k) in _triples(ids):
        p = b.sample_points((i, j, k), samples, seed)
        if len(p) == 0:
            continue
        lhs = cm.alpha_group(inv(b.f(i, j, k, p))) @ b.g(i, j, p) @ b.g(j, k, p)
        out["g_cocycle"] = max(out["g_cocycle"], _norm(lhs - b.g(i, k, p)))
        if i == k:
            out["normalization"] = max(out["normalization"], _norm(b.f(i, j, i, p) - cm.identity_H))
        for l in ids:
            q = b.sample_points((i, j, k, l), samples, seed)
            if len(q) == 0:
                continue
            left = cm.act_GH(b.g(i, j, q), b.f(j, k, l, q)) @ b.f(i, j, l, q)
            right = b.f(i, j, k, q) @ b.f(i, k, l, q)
            out["f_cocycle"] = max(out["f_cocycle"], _norm(left - right))
            # indices renamed (l, i, k, j)
            lhs2 = b.f(l, k, j, q) @ inv(b.f(l, i, j, q))
            rhs2 = inv(b.f(l, i, k, q)) @ cm.act_GH(b.g(l, i, q), b.f(i, k, j, q))
            out["rearranged"] = max(out["rearranged"], _norm(lhs2 - rhs2))
    return out


def verify_compatibility(b: BundleData, samples: int = 32, seed: int = 0, fd_step: Optional[float] = None) -> Dict[str, float]:
    """Residuals of the gauge law between charts and of the triple-overlap a-identity.

    a_ij + g_ij |> a_jk = f a_ik f^-1 + (A_i |> f) f^-1 + df f^-1, f = f_ijk.
    """
    cm = b.cm
    h = b.fd_step if fd_step is None else fd_step
    ids = b.atlas.ids
    inv = np.linalg.inv
    out = {"gauge_law_A": 0.0, "gauge_law_B": 0.0, "compatibility": 0.0}
    for i in ids:
        for j in ids:
            if i == j:
                continue
            p = b.sample_points((i, j), samples, seed)
            if len(p) == 0:
                continue
            moved = apply_gauge(b.connections[i], b.gauge(i, j), cm, h)
            out["gauge_law_A"] = max(out["gauge_law_A"], _norm(moved.A.components(p) - b.connections[j].A.components(p)))
            out["gauge_law_B"] = max(out["gauge_law_B"], _norm(moved.B.components(p) - b.connections[j].B.components(p)))
    for (i, j, k) in _triples(ids):
        p = b.sample_points((i, j, k), samples, seed)
        if len(p) == 0:
            continue
        f = b.f(i, j, k, p)
        fi = inv(f)[..., None, :, :]
        fb = f[..., None, :, :]
        df = fd_gradient(lambda q: b.f(i, j, k, q), p, h)
        lhs = b.a(i, j).components(p) + cm.act_Gh(b.g(i, j, p)[..., None, :, :], b.a(j, k).components(p))
        rhs = (fb @ b.a(i, k).components(p) @ fi
               + cm.act_gH(b.connections[i].A.components(p), fb) @ fi
               + df @ fi)
        out["compatibility"] = max(out["compatibility"], _norm(lhs - rhs))
    return out


def tetrahedron_two_arrow(b: BundleData, i, j, k, l, point, tol: float = 1e-8):
    """Both composites of the tetrahedron at one point of the quadruple overlap."""
    cm = b.cm
    p = np.asarray(point, dtype=float)[None]
    ok = b.atlas.overlap(i, j, k, l)(p)
    if not np.all(ok):
        raise ValueError(f"point is not in the overlap of charts {(i, j, k, l)}")
    g = lambda a, c: b.g(a, c, p)[0]
    f = lambda a, c, d: b.f(a, c, d, p)[0]
    src = g(i, j) @ g(j, k) @ g(k, l)
    first = vcompose(TwoArrow(src, cm.act_GH(g(i, j), f(j, k, l))), TwoArrow(g(i, j) @ g(j, l), f(i, j, l)), cm, tol)
    second = vcompose(TwoArrow(src, f(i, j, k)), TwoArrow(g(i, k) @ g(k, l), f(i, k, l)), cm, tol)
    return first, second


def tetrahedron_residual(b: BundleData, samples: int = 16, seed: int = 0) -> float:
    worst = 0.0
    ids = b.atlas.ids
    for i in ids:
        for j in ids:
            for k in ids:
                for l in ids:
                    pts = b.sample_points((i, j, k, l), samples, seed)
                    for p in pts:
                        x, y = tetrahedron_two_arrow(b, i, j, k, l, p, tol=-1.0)
                        worst = max(worst, _norm(x.h - y.h), _norm(x.source - y.source))
    return worst


def sphere_two_chart_scenario(flux: float = 1):
    """Abelian gerbe on the sphere with two charts; see ``scenarios.sphere_gerbe``."""
    from .scenarios import sphere_gerbe
    sc = sphere_gerbe(flux)
    return sc.bundle, sc.loop

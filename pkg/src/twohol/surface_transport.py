"""Local 2-holonomy of a rectangular patch and its composition laws.

Edge names on a patch [t0, t1] x [s0, s1]:

    row0  gamma(., s0)    row1  gamma(., s1)
    col0  gamma(t0, .)    col1  gamma(t1, .)

The 2-arrow of the patch has source F(row0) F(col1) and target
F(col0) F(row1); its H-part solves dH/ds = H . B_t(s), H(s0) = 1.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .algebra import CrossedModule, TwoArrow, _norm
from .connection import ConfigurationError, LocalConnection, apply_gauge, fake_flatness_residual, GaugeTransformation
from .numerics import StepSpec, half_grid, propagate
from .path_transport import (SurfacePatch, gauge_transport_h, holonomy1, left_edge_transport,
                             row_transports, script_B_rows)


class FakeFlatnessWarning(UserWarning):
    pass


@dataclass
class LocalTwoHolonomy:
    arrow: TwoArrow
    patch: SurfacePatch
    spec: StepSpec
    edges: Dict[str, np.ndarray]
    residual: float
    fake_flatness: Optional[float] = None
    notes: list = field(default_factory=list)

    @property
    def H(self):
        return self.arrow.h

    @property
    def source(self):
        return self.edges["row0"] @ self.edges["col1"]

    @property
    def target(self):
        return self.edges["col0"] @ self.edges["row1"]


def _fake_flat_probe(conn, patch, cm, fd_step, count=5):
    ts = np.linspace(patch.t0, patch.t1, count)
    ss = np.linspace(patch.s0, patch.s1, count)
    T, S = np.meshgrid(ts, ss, indexing="ij")
    pts = patch.point(T, S).reshape(-1, patch.point(ts[:1], ss[:1]).shape[-1])
    try:
        return fake_flatness_residual(conn, cm, pts, fd_step)
    except ConfigurationError:
        return None


def local_2_holonomy(conn: LocalConnection, patch: SurfacePatch, spec: StepSpec, cm: CrossedModule,
                     fake_flat_bound: Optional[float] = None, fd_step: Optional[float] = None) -> LocalTwoHolonomy:
    """Surface-ordered transport of (A, B) over the patch.

    Row transports are batched over every s on the RK4 half grid and reused
    by the tau quadrature; the left edge is solved on a grid twice as fine so
    it is available at the same half-grid nodes.
    """
    A = conn.A
    eyeH = cm.identity_H
    notes = []
    ff = None
    if fake_flat_bound is not None:
        ff = _fake_flat_probe(conn, patch, cm, fd_step)
        if ff is not None and ff > fake_flat_bound:
            msg = f"fake-flatness residual {ff:.3e} exceeds bound {fake_flat_bound:.3e}"
            notes.append(msg)
            warnings.warn(msg, FakeFlatnessWarning, stacklevel=2)

    t0, t1, s0, s1 = patch.t0, patch.t1, patch.s0, patch.s1
    row0 = holonomy1(A, patch.row(s0), spec).value
    col1 = holonomy1(A, patch.column(t1), spec).value
    if t0 == t1 or s0 == s1:
        col0 = holonomy1(A, patch.column(t0), spec).value
        row1 = holonomy1(A, patch.row(s1), spec).value
        edges = dict(row0=row0, row1=row1, col0=col0, col1=col1)
        arrow = TwoArrow(row0 @ col1, eyeH.copy())
        res = _norm(row0 @ col1 - col0 @ row1)
        return LocalTwoHolonomy(arrow, patch, spec, edges, res, ff, notes)

    n_t = spec.count(t1 - t0)
    n_s = spec.count(s1 - s0)
    svals = half_grid(s0, s1, n_s)
    left = left_edge_transport(A, patch, n_s, spec)
    rows = row_transports(A, patch, svals, n_t, spec, left=left)
    Bcal = script_B_rows(conn, rows, cm)
    Hs = propagate(Bcal, "right", eyeH, (s1 - s0) / n_s, spec.method, s0, spec.hook)
    H = Hs[-1]
    edges = dict(row0=rows.values[-1, 0], row1=rows.values[-1, -1], col0=left[-1], col1=col1)
    source = edges["row0"] @ edges["col1"]
    target = edges["col0"] @ edges["row1"]
    res = _norm(cm.alpha_group(np.linalg.inv(H)) @ source - target)
    return LocalTwoHolonomy(TwoArrow(source, H), patch, spec, edges, res, ff, notes)


def _same_point(p, q, tol=1e-12):
    return float(np.max(np.abs(np.asarray(p) - np.asarray(q)))) <= tol


def hcompose_local(left: LocalTwoHolonomy, right: LocalTwoHolonomy, cm: CrossedModule):
    """Glue patches side by side: H = F(row0 of left) |> H_right . H_left."""
    pl, pr = left.patch, right.patch
    if pl.t1 != pr.t0 or pl.rect[1] != pr.rect[1]:
        raise ValueError("patches are not horizontally adjacent")
    H = cm.act_GH(left.edges["row0"], right.H) @ left.H
    return TwoArrow(left.edges["row0"] @ right.source, H)


def vcompose_local(first: LocalTwoHolonomy, second: LocalTwoHolonomy, cm: CrossedModule):
    """Stack ``second`` on top of ``first`` in s: H = H_first . F(col0 of first) |> H_second."""
    pf, ps = first.patch, second.patch
    if pf.s1 != ps.s0 or pf.rect[0] != ps.rect[0]:
        raise ValueError("patches are not vertically adjacent")
    H = first.H @ cm.act_GH(first.edges["col0"], second.H)
    return TwoArrow(first.source @ second.edges["col1"], H)


def composition_residuals(conn: LocalConnection, patch: SurfacePatch, t_split: float, s_split: float,
                          spec: StepSpec, cm: CrossedModule) -> Dict[str, float]:
    """Union patch against both composition formulas, same step grid."""
    whole = local_2_holonomy(conn, patch, spec, cm)
    L = local_2_holonomy(conn, patch.sub(patch.t0, t_split, patch.s0, patch.s1), spec, cm)
    R = local_2_holonomy(conn, patch.sub(t_split, patch.t1, patch.s0, patch.s1), spec, cm)
    D = local_2_holonomy(conn, patch.sub(patch.t0, patch.t1, patch.s0, s_split), spec, cm)
    U = local_2_holonomy(conn, patch.sub(patch.t0, patch.t1, s_split, patch.s1), spec, cm)
    return {
        "horizontal": _norm(hcompose_local(L, R, cm).h - whole.H),
        "vertical": _norm(vcompose_local(D, U, cm).h - whole.H),
    }


def gauge_cube_residual(conn: LocalConnection, gt: GaugeTransformation, patch: SurfacePatch, spec: StepSpec,
                        cm: CrossedModule, fd_step: Optional[float] = None) -> float:
    """|| g(gamma(t0, s0)) |> H' - h(gamma^+)^-1 H h(gamma^-) || for (A', B') the gauge transform."""
    new = apply_gauge(conn, gt, cm, fd_step)
    H = local_2_holonomy(conn, patch, spec, cm)
    Hn = local_2_holonomy(new, patch, spec, cm)
    A, phi = conn.A, gt.phi

    def h_of(path):
        return gauge_transport_h(A, phi, path, spec, cm).value

    e = H.edges
    h_plus = cm.act_GH(e["row0"], h_of(patch.column(patch.t1))) @ h_of(patch.row(patch.s0))
    h_minus = cm.act_GH(e["col0"], h_of(patch.row(patch.s1))) @ h_of(patch.column(patch.t0))
    g00 = np.asarray(gt.g(patch.point(patch.t0, patch.s0)[None]))[0]
    lhs = cm.act_GH(g00, Hn.H)
    rhs = np.linalg.inv(h_plus) @ H.H @ h_minus
    return _norm(lhs - rhs)


def cylinder_residual(bundle, i, j, k, rho, spec: StepSpec, cm: CrossedModule) -> float:
    """|| g_ij(x) |> psi_jk - psi_ij^-1 (F_{A_i} |> f_ijk(y)) psi_ik f_ijk(x)^-1 ||, x = rho(a), y = rho(b)."""

    x = rho.start()[None]
    y = rho.end()[None]
    psi_ij = bundle.transition(i, j, rho, spec)
    psi_jk = bundle.transition(j, k, rho, spec)
    psi_ik = bundle.transition(i, k, rho, spec)
    F_i = holonomy1(bundle.connections[i].A, rho, spec).value
    fx = bundle.f(i, j, k, x)[0]
    fy = bundle.f(i, j, k, y)[0]
    gx = bundle.g(i, j, x)[0]
    lhs = cm.act_GH(gx, psi_jk.h)
    rhs = np.linalg.inv(psi_ij.h) @ cm.act_GH(F_i, fy) @ psi_ik.h @ np.linalg.inv(fx)
    return _norm(lhs - rhs)

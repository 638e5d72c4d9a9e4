"""Transports along parametrized curves.

Conventions.  For a path rho on [a, b] the 1-holonomy solves

    F' = F . A(rho'),  F(a) = 1,

the gauge transport of an h-valued 1-form phi solves the left-sided ODE

    h' = (F |> phi(rho')) . h,  h(a) = 1,

and on a patch gamma(t, s) with corner (t0, s0) the two boundary paths
of the sub-rectangle [t0, t] x [s0, s] are

    gamma^-  = left edge (s0 -> s) then top row (t0 -> t)
    gamma^+  = bottom row (t0 -> t) then right edge (s0 -> s).

The loop holonomy is u = F(gamma^-) F(gamma^+)^-1.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Tuple

import numpy as np

from .algebra import CrossedModule, TwoArrow, WreathElement, _norm
from .connection import Form1, LocalConnection, curvature1
from .numerics import StepSpec, half_grid, propagate, simpson_weights, _check_finite


class ChartError(ValueError):
    """A path or patch leaves the chart its data lives on."""


def _finite_velocity(fun, ts, h):
    return (np.asarray(fun(ts + h)) - np.asarray(fun(ts - h))) / (2 * h)


@dataclass(frozen=True)
class ParamPath:
    """A path rho: [a, b] -> R^n.

    ``map`` and ``velocity`` must accept a 1-d array of times and return
    shape (m, n).  Without a velocity, central differences with step fd_h
    are used.  ``region`` is an optional predicate on points (vectorized)
    checked on every sampled point.
    """
    map: Callable
    interval: Tuple[float, float] = (0.0, 1.0)
    velocity: Optional[Callable] = None
    region: Optional[Callable] = None
    chart: Optional[int] = None
    fd_h: float = 1e-6

    @property
    def length(self) -> float:
        return float(self.interval[1] - self.interval[0])

    def points(self, ts):
        return np.asarray(self.map(np.asarray(ts, dtype=float)), dtype=float)

    def velocities(self, ts):
        ts = np.asarray(ts, dtype=float)
        if self.velocity is not None:
            return np.asarray(self.velocity(ts), dtype=float)
        return _finite_velocity(self.map, ts, self.fd_h)

    def start(self):
        return self.points(np.array([self.interval[0]]))[0]

    def end(self):
        return self.points(np.array([self.interval[1]]))[0]

    def reversed(self) -> "ParamPath":
        return replace(self, interval=(self.interval[1], self.interval[0]))

    def restrict(self, a: float, b: float) -> "ParamPath":
        return replace(self, interval=(float(a), float(b)))

    def check_region(self, ts, pts):
        if self.region is None:
            return
        ok = np.asarray(self.region(pts), dtype=bool)
        if not np.all(ok):
            bad = float(np.asarray(ts)[np.argmin(ok)])
            raise ChartError(f"path leaves chart {self.chart} at parameter {bad:.6g}")


@dataclass(frozen=True)
class SurfacePatch:
    """gamma: [t0, t1] x [s0, s1] -> R^n, vectorized in broadcast (t, s).

    ``jacobian(t, s)`` returns the pair of tangents (d_t gamma, d_s gamma).
    """
    map: Callable
    rect: Tuple[Tuple[float, float], Tuple[float, float]] = ((0.0, 1.0), (0.0, 1.0))
    jacobian: Optional[Callable] = None
    region: Optional[Callable] = None
    chart: Optional[int] = None
    fd_h: float = 1e-6

    @property
    def t0(self):
        return self.rect[0][0]

    @property
    def t1(self):
        return self.rect[0][1]

    @property
    def s0(self):
        return self.rect[1][0]

    @property
    def s1(self):
        return self.rect[1][1]

    def point(self, t, s):
        t, s = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
        return np.asarray(self.map(t, s), dtype=float)

    def tangents(self, t, s):
        t, s = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
        if self.jacobian is not None:
            dt, ds = self.jacobian(t, s)
            return np.asarray(dt, float), np.asarray(ds, float)
        h = self.fd_h
        dt = (self.point(t + h, s) - self.point(t - h, s)) / (2 * h)
        ds = (self.point(t, s + h) - self.point(t, s - h)) / (2 * h)
        return dt, ds

    def sub(self, t0, t1, s0, s1) -> "SurfacePatch":
        return replace(self, rect=((float(t0), float(t1)), (float(s0), float(s1))))

    def with_chart(self, chart, region) -> "SurfacePatch":
        return replace(self, chart=chart, region=region)

    def row(self, s: float, t0=None, t1=None) -> ParamPath:
        """Horizontal path t -> gamma(t, s)."""
        t0 = self.t0 if t0 is None else t0
        t1 = self.t1 if t1 is None else t1
        return ParamPath(lambda ts: self.point(ts, s), (float(t0), float(t1)),
                         lambda ts: self.tangents(ts, s)[0], self.region, self.chart)

    def column(self, t: float, s0=None, s1=None) -> ParamPath:
        """Vertical path s -> gamma(t, s)."""
        s0 = self.s0 if s0 is None else s0
        s1 = self.s1 if s1 is None else s1
        return ParamPath(lambda ss: self.point(t, ss), (float(s0), float(s1)),
                         lambda ss: self.tangents(t, ss)[1], self.region, self.chart)

    def check_region(self, t, s, pts):
        if self.region is None:
            return
        ok = np.asarray(self.region(pts), dtype=bool)
        if not np.all(ok):
            idx = np.unravel_index(np.argmin(ok), ok.shape)
            tb, sb = np.broadcast_arrays(t, s)
            raise ChartError(f"patch leaves chart {self.chart} at (t, s) = ({float(tb[idx]):.6g}, {float(sb[idx]):.6g})")


@dataclass
class TransportResult:
    value: np.ndarray
    times: np.ndarray
    trace: np.ndarray
    spec: StepSpec
    drift: float = 0.0
    companion: Optional[np.ndarray] = None


def _pullback1(form: Form1, pts, vel):
    return np.einsum("...m,...mij->...ij", vel, form.components(pts))


def _path_samples(form: Form1, rho: ParamPath, n: int, refine: int = 1):
    """Pullback of ``form`` on the (2n*refine + 1)-point grid of rho."""
    a, b = rho.interval
    ts = np.linspace(a, b, 2 * n * refine + 1)
    pts = rho.points(ts)
    rho.check_region(ts, pts)
    gens = _pullback1(form, pts, rho.velocities(ts))
    _check_finite(gens, a)
    return ts, gens


def _identity_like(d, dtype):
    return np.eye(d, dtype=dtype)


def holonomy1(A: Form1, rho: ParamPath, spec: StepSpec = StepSpec(), cm: Optional[CrossedModule] = None) -> TransportResult:
    """F_A(rho) by RK4 (or midpoint) on the right-sided ODE."""
    a, b = rho.interval
    if a == b:
        p = rho.start()[None]
        d = A.components(p).shape[-1]
        eye = _identity_like(d, A.components(p).dtype)
        return TransportResult(eye, np.array([a]), eye[None], spec)
    n = spec.count(b - a)
    ts, gens = _path_samples(A, rho, n)
    d = gens.shape[-1]
    trace = propagate(gens, "right", np.eye(d, dtype=gens.dtype), (b - a) / n, spec.method, a, spec.hook)
    F = trace[-1]
    drift = cm.g_residual(F) if cm is not None else 0.0
    return TransportResult(F, ts[::2], trace, spec, drift)


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3 - 2 * x), 6 * x * (1 - x)


def concatenate(p1: ParamPath, p2: ParamPath) -> ParamPath:
    """p1 followed by p2 on [0, 2]; p1 must end where p2 starts.

    Each piece is run through a smoothstep so the velocity vanishes on both
    sides of the junction.  Without that the integrand jumps at t = 1 and a
    step starting there samples the wrong piece, costing an order.
    """
    (a1, b1), (a2, b2) = p1.interval, p2.interval

    def m(ts):
        ts = np.asarray(ts, float)
        u1 = a1 + (b1 - a1) * _smoothstep(ts)[0]
        u2 = a2 + (b2 - a2) * _smoothstep(ts - 1)[0]
        return np.where((ts <= 1)[..., None], np.asarray(p1.map(u1)), np.asarray(p2.map(u2)))

    def v(ts):
        ts = np.asarray(ts, float)
        s1, d1 = _smoothstep(ts)
        s2, d2 = _smoothstep(ts - 1)
        first = ((b1 - a1) * d1)[..., None] * p1.velocities(a1 + (b1 - a1) * s1)
        second = ((b2 - a2) * d2)[..., None] * p2.velocities(a2 + (b2 - a2) * s2)
        return np.where((ts <= 1)[..., None], first, second)

    return ParamPath(m, (0.0, 2.0), v)


def loop_holonomy_u(A: Form1, patch: SurfacePatch, t: float, s: float, spec: StepSpec = StepSpec()) -> np.ndarray:
    """u_A(t, s) = F(gamma^-) F(gamma^+)^-1 on [t0, t] x [s0, s]."""
    t0, s0 = patch.t0, patch.s0
    left = holonomy1(A, patch.column(t0, s0, s), spec).value
    top = holonomy1(A, patch.row(s, t0, t), spec).value
    bottom = holonomy1(A, patch.row(s0, t0, t), spec).value
    right = holonomy1(A, patch.column(t, s0, s), spec).value
    return left @ top @ np.linalg.inv(bottom @ right)


def loop_holonomy_based(A: Form1, patch: SurfacePatch, t: float, s: float, base: float,
                        spec: StepSpec = StepSpec()) -> np.ndarray:
    """u_{A, base}(t, s): the loop on [t0, t] x [base, s] read from the corner (t0, base)."""
    t0 = patch.t0
    lft = holonomy1(A, patch.column(t0, base, s), spec).value
    top = holonomy1(A, patch.row(s, t0, t), spec).value
    rgt = holonomy1(A, patch.column(t, base, s), spec).value
    bot = holonomy1(A, patch.row(base, t0, t), spec).value
    return lft @ top @ np.linalg.inv(rgt) @ np.linalg.inv(bot)


# ---------------------------------------------------------------------------
# row engine

@dataclass
class RowTransport:
    """Batched horizontal transports F(gamma_{[t0, tau]; s}) for many s.

    values[k, j] is the transport to the k-th full tau node at s = svals[j];
    left[j] is the left-edge transport F(gamma_{t0; [s0, s_j]}).
    """
    taus: np.ndarray
    svals: np.ndarray
    values: np.ndarray
    left: np.ndarray
    points: np.ndarray
    dtau: np.ndarray
    dsig: np.ndarray


def left_edge_transport(A: Form1, patch: SurfacePatch, n_s: int, spec: StepSpec) -> np.ndarray:
    """Left-edge transports at the 2 n_s + 1 half-grid values of s (solved on a grid twice as fine)."""
    s0, s1 = patch.s0, patch.s1
    if s0 == s1:
        d = A.components(patch.point(patch.t0, s0)[None]).shape[-1]
        return np.broadcast_to(np.eye(d), (2 * n_s + 1, d, d)).copy()
    col = patch.column(patch.t0)
    ts, gens = _path_samples(A, col, 2 * n_s)
    d = gens.shape[-1]
    return propagate(gens, "right", np.eye(d, dtype=gens.dtype), (s1 - s0) / (2 * n_s), spec.method, s0, spec.hook)


def row_transports(A: Form1, patch: SurfacePatch, svals, n_t: int, spec: StepSpec, t_end=None,
                   left: Optional[np.ndarray] = None) -> RowTransport:
    """Transport along every row s in ``svals`` from t0 to t_end with n_t steps."""
    t0 = patch.t0
    t_end = patch.t1 if t_end is None else t_end
    svals = np.asarray(svals, dtype=float)
    taus = half_grid(t0, t_end, n_t)
    T, S = np.meshgrid(taus, svals, indexing="ij")
    pts = patch.point(T, S)
    patch.check_region(T, S, pts)
    dt, ds = patch.tangents(T, S)
    gens = _pullback1(A, pts, dt)
    _check_finite(gens, t0)
    d = gens.shape[-1]
    if t_end == t0:
        vals = np.broadcast_to(np.eye(d), (1, len(svals), d, d)).copy()
    else:
        vals = propagate(gens, "right", np.eye(d, dtype=gens.dtype), (t_end - t0) / n_t, spec.method, t0, spec.hook)
    if left is None:
        left = np.broadcast_to(np.eye(d), (len(svals), d, d))
    return RowTransport(taus[::2], svals, vals, left, pts[::2], dt[::2], ds[::2])


def script_B_rows(conn: LocalConnection, rows: RowTransport, cm: CrossedModule) -> np.ndarray:
    """B_t(s) for every row: Simpson over tau of (F_left F_row) |> gamma*B(d_tau, d_s)."""
    B = np.einsum("...m,...n,...mnij->...ij", rows.dtau, rows.dsig, conn.B.components(rows.points))
    F = rows.left[None] @ rows.values
    acted = cm.act_Gh(F, B)
    length = rows.taus[-1] - rows.taus[0]
    if len(rows.taus) < 2 or length == 0:
        return np.zeros_like(acted[0])
    w = simpson_weights(len(rows.taus), length)
    return np.tensordot(w, acted, axes=(0, 0))


def script_A_rows(A: Form1, rows: RowTransport, fd_step=None) -> np.ndarray:
    Om = curvature1(A, fd_step)
    C = np.einsum("...m,...n,...mnij->...ij", rows.dtau, rows.dsig, Om.components(rows.points))
    F = rows.left[None] @ rows.values
    acted = F @ C @ np.linalg.inv(F)
    length = rows.taus[-1] - rows.taus[0]
    if len(rows.taus) < 2 or length == 0:
        return np.zeros_like(acted[0])
    w = simpson_weights(len(rows.taus), length)
    return np.tensordot(w, acted, axes=(0, 0))


def _single_row(A, patch, t, s, spec):
    n_t = spec.count(t - patch.t0)
    left = holonomy1(A, patch.column(patch.t0, patch.s0, s), spec).value
    return row_transports(A, patch, [s], n_t, spec, t_end=t, left=left[None])


def script_A(A: Form1, patch: SurfacePatch, t: float, s: float, spec: StepSpec = StepSpec(), fd_step=None) -> np.ndarray:
    """A_t(s) = int_t0^t Ad_{F(gamma^-_{tau; s})} gamma*Omega^A(d_tau, d_s) dtau."""
    return script_A_rows(A, _single_row(A, patch, t, s, spec), fd_step)[0]


def script_B(conn: LocalConnection, patch: SurfacePatch, t: float, s: float, spec: StepSpec, cm: CrossedModule) -> np.ndarray:
    """B_t(s) = int_t0^t F(gamma^-_{tau; s}) |> gamma*B(d_tau, d_s) dtau."""
    return script_B_rows(conn, _single_row(conn.A, patch, t, s, spec), cm)[0]


# ---------------------------------------------------------------------------
# gauge transport and the wreath connection

def gauge_transport_h(A: Form1, phi: Form1, rho: ParamPath, spec: StepSpec, cm: CrossedModule) -> TransportResult:
    """h(rho): left-sided ODE h' = (F_A |> phi(rho')) h with h(a) = 1_H.

    F_A is needed at the half-step nodes, so it is integrated on a grid
    twice as fine; its endpoint is returned as ``companion``.
    """
    a, b = rho.interval
    eyeH = cm.identity_H
    if a == b:
        return TransportResult(eyeH.copy(), np.array([a]), eyeH[None].copy(), spec,
                               companion=cm.identity_G.copy())
    n = spec.count(b - a)
    ts, gA = _path_samples(A, rho, 2 * n)
    eyeG = np.eye(gA.shape[-1], dtype=gA.dtype)
    F = propagate(gA, "right", eyeG, (b - a) / (2 * n), spec.method, a, spec.hook)   # on the half grid
    half = ts[::2]
    pts = rho.points(half)
    Y = _pullback1(phi, pts, rho.velocities(half))
    gens = cm.act_Gh(F, Y)
    trace = propagate(gens, "left", eyeH, (b - a) / n, spec.method, a, spec.hook)
    return TransportResult(trace[-1], half[::2], trace, spec, cm.h_residual(trace[-1]), companion=F[-1])


def wreath_holonomy(A: Form1, phi: Form1, rho: ParamPath, spec: StepSpec, cm: CrossedModule) -> WreathElement:
    """Transport of the wreath connection (A, phi) on G x| H.

    Solves the single ODE (g, h)' = (g, h) . (A(rho'), phi(rho')) with the
    product (g, h)(X, Y) = (g X, (g |> Y) h), by RK4 on the pair.
    """
    a, b = rho.interval
    if a == b:
        return WreathElement(cm.identity_G.copy(), cm.identity_H.copy())
    n = spec.count(b - a)
    h = (b - a) / n
    ts = half_grid(a, b, n)
    pts = rho.points(ts)
    rho.check_region(ts, pts)
    vel = rho.velocities(ts)
    X = _pullback1(A, pts, vel)
    Y = _pullback1(phi, pts, vel)

    def rhs(g, hh, j):
        return g @ X[j], cm.act_Gh(g, Y[j]) @ hh

    g = np.eye(X.shape[-1], dtype=X.dtype)
    hh = cm.identity_H.copy()
    for i in range(n):
        j0, jm, j1 = 2 * i, 2 * i + 1, 2 * i + 2
        if spec.method == "rk4":
            k1 = rhs(g, hh, j0)
            k2 = rhs(g + 0.5 * h * k1[0], hh + 0.5 * h * k1[1], jm)
            k3 = rhs(g + 0.5 * h * k2[0], hh + 0.5 * h * k2[1], jm)
            k4 = rhs(g + h * k3[0], hh + h * k3[1], j1)
            g = g + (h / 6) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            hh = hh + (h / 6) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        else:
            k1 = rhs(g, hh, j0)
            k2 = rhs(g + 0.5 * h * k1[0], hh + 0.5 * h * k1[1], jm)
            g, hh = g + h * k2[0], hh + h * k2[1]
        _check_finite(g, a + (i + 1) * h)
        _check_finite(hh, a + (i + 1) * h)
    return WreathElement(g, hh)


def transition_psi(A_i: Form1, g_ij: Callable, a_ij: Form1, rho: ParamPath, spec: StepSpec,
                   cm: CrossedModule) -> TwoArrow:
    """Psi_ij(rho) = (F_{A_i}(rho) g_ij(rho(b)), psi_ij(rho)).

    Its target is g_ij(rho(a)) F_{A_j}(rho) when A_j is the gauge transform
    of A_i by (g_ij, a_ij).
    """
    a, b = rho.interval
    end = rho.end()[None]
    if a == b:
        return TwoArrow(np.asarray(g_ij(end))[0], cm.identity_H.copy())
    res = gauge_transport_h(A_i, a_ij, rho, spec, cm)
    return TwoArrow(res.companion @ np.asarray(g_ij(end))[0], res.value)


def gauge_target_residual(A: Form1, A_new: Form1, g: Callable, phi: Form1, rho: ParamPath, spec: StepSpec,
                          cm: CrossedModule) -> float:
    """|| alpha(h^-1) F_A(rho) g(rho(b)) - g(rho(a)) F_{A'}(rho) ||."""
    psi = transition_psi(A, g, phi, rho, spec, cm)
    rhs = np.asarray(g(rho.start()[None]))[0] @ holonomy1(A_new, rho, spec).value
    return _norm(psi.target(cm) - rhs)


def second_variation_check(A: Form1, patch: SurfacePatch, t: float, s0: float, spec: StepSpec = StepSpec(),
                           eps: float = 1e-2, fd_step=None) -> float:
    """Mixed difference quotient of u_{A,s0} at (t, s0) against
    -Ad_{F_A(gamma_{[t0,t]; s0})} gamma*Omega^A(d_t, d_s)."""
    def u(tt, ss):
        return loop_holonomy_based(A, patch, tt, ss, s0, spec)

    mixed = (u(t + eps, s0 + eps) - u(t - eps, s0 + eps) - u(t + eps, s0 - eps) + u(t - eps, s0 - eps)) / (4 * eps * eps)
    F = holonomy1(A, patch.row(s0, patch.t0, t), spec).value
    p = patch.point(t, s0)[None]
    dt, ds = patch.tangents(np.array([t]), np.array([s0]))
    Om = curvature1(A, fd_step).components(p)
    om = np.einsum("...m,...n,...mnij->...ij", dt, ds, Om)[0]
    expected = -F @ om @ np.linalg.inv(F)
    return _norm(mixed - expected)


def u_decomposition_residual(A: Form1, patch: SurfacePatch, t: float, s: float, s_mid: float,
                             spec: StepSpec = StepSpec()) -> float:
    """u_A(t, s) = Ad_{F(gamma_{t0; [s0, s_mid]})} u_{A, s_mid}(t, s) . u_A(t, s_mid)."""
    full = loop_holonomy_u(A, patch, t, s, spec)
    lower = loop_holonomy_u(A, patch, t, s_mid, spec)
    based = loop_holonomy_based(A, patch, t, s, s_mid, spec)
    L = holonomy1(A, patch.column(patch.t0, patch.s0, s_mid), spec).value
    return _norm(full - L @ based @ np.linalg.inv(L) @ lower)


def wreath_loop_crosscheck(A: Form1, phi: Form1, patch: SurfacePatch, t: float, s: float, spec: StepSpec,
                           cm: CrossedModule) -> float:
    """H-part of the wreath loop holonomy against h(gamma^-) . g~ |> h(gamma^+)^-1,
    with g~ = alpha(h(gamma^-)^-1) F_A(gamma^-) F_A(gamma^+)^-1 (the interchange form)."""
    from .algebra import wreath_inv, wreath_mul

    t0, s0 = patch.t0, patch.s0
    legs_m = [patch.column(t0, s0, s), patch.row(s, t0, t)]
    legs_p = [patch.row(s0, t0, t), patch.column(t, s0, s)]

    def along(legs):
        w = WreathElement(cm.identity_G.copy(), cm.identity_H.copy())
        for leg in legs:
            w = wreath_mul(w, wreath_holonomy(A, phi, leg, spec, cm), cm, check=False)
        return w

    def h_along(legs):
        F = cm.identity_G.copy()
        hh = cm.identity_H.copy()
        for leg in legs:
            r = gauge_transport_h(A, phi, leg, spec, cm)
            hh = cm.act_GH(F, r.value) @ hh
            F = F @ r.companion
        return F, hh

    wm, wp = along(legs_m), along(legs_p)
    loop = wreath_mul(wm, wreath_inv(wp, cm), cm, check=False)
    Fm, hm = h_along(legs_m)
    Fp, hp = h_along(legs_p)
    gt = cm.alpha_group(np.linalg.inv(hm)) @ Fm @ np.linalg.inv(Fp)
    expected = hm @ cm.act_GH(gt, np.linalg.inv(hp))
    return _norm(loop.h - expected)

"""Lie-algebra valued forms, local 2-connections and 2-gauge transformations.

A form is a field: it is evaluated at a point together with tangent
vectors.  Internally each form is given by a component function on a
coordinate patch of R^n,

    Form1:  p -> A_mu(p),       shape (..., n, d, d)
    Form2:  p -> B_{mu nu}(p),  shape (..., n, n, d, d), antisymmetric
    Form3:  p -> C_{lam mu nu}(p)

and an optional derivative of the components (the 1-form derivative has
[lam, mu] = d_lam A_mu).  Exterior derivatives use it when present and a
fourth-order central difference when the caller authorizes one.

Gauge conventions (kept exactly as the transformation law is written):

    g |> A' = -alpha(phi) + A + dg g^-1
    g |> B' = B - dphi - A |> phi + phi ^ phi

where g |> acts by Ad_g on g-valued forms.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .algebra import CrossedModule
from .numerics import fd_gradient


class ConfigurationError(RuntimeError):
    pass


def _contract1(comps, u):
    # sum_mu u^mu C_mu, comps (..., n, d, d), u (..., n)
    return np.einsum("...m,...mij->...ij", u, comps)


def _contract2(comps, u, v):
    return np.einsum("...m,...n,...mnij->...ij", u, v, comps)


def _contract3(comps, u, v, w):
    return np.einsum("...l,...m,...n,...lmnij->...ij", u, v, w, comps)


class Form1:
    """A matrix-valued 1-form given by its components."""

    degree = 1

    def __init__(self, components: Callable, derivative: Optional[Callable] = None, fd_step: Optional[float] = None):
        self.components = components
        self._derivative = derivative
        self.fd_step = fd_step

    def __call__(self, p, u):
        p = np.asarray(p, dtype=float)
        return _contract1(self.components(p), np.asarray(u, dtype=float))

    @property
    def has_derivative(self) -> bool:
        return self._derivative is not None

    def derivative(self, p, fd_step: Optional[float] = None):
        """[lam, mu] = d_lam A_mu at p."""
        if self._derivative is not None:
            return self._derivative(np.asarray(p, dtype=float))
        h = fd_step if fd_step is not None else self.fd_step
        if h is None:
            raise ConfigurationError("1-form has no analytic derivative and finite differences are not enabled")
        return fd_gradient(self.components, p, h)

    def d_components(self, p, fd_step=None):
        D = self.derivative(p, fd_step)
        return D - np.swapaxes(D, -3, -4)

    def exterior_derivative(self, p, u, v, fd_step=None):
        return _contract2(self.d_components(p, fd_step), np.asarray(u, float), np.asarray(v, float))

    def uses_fd(self) -> bool:
        return self._derivative is None


class Form2:
    """A matrix-valued 2-form; components antisymmetric in the two form slots."""

    degree = 2

    def __init__(self, components: Callable, derivative: Optional[Callable] = None, fd_step: Optional[float] = None):
        self.components = components
        self._derivative = derivative
        self.fd_step = fd_step

    def __call__(self, p, u, v):
        p = np.asarray(p, dtype=float)
        return _contract2(self.components(p), np.asarray(u, float), np.asarray(v, float))

    def derivative(self, p, fd_step=None):
        """[lam, mu, nu] = d_lam B_{mu nu} at p."""
        if self._derivative is not None:
            return self._derivative(np.asarray(p, dtype=float))
        h = fd_step if fd_step is not None else self.fd_step
        if h is None:
            raise ConfigurationError("2-form has no analytic derivative and finite differences are not enabled")
        return fd_gradient(self.components, p, h)

    def d_components(self, p, fd_step=None):
        D = self.derivative(p, fd_step)
        # d_lam B_{mu nu} + d_mu B_{nu lam} + d_nu B_{lam mu}
        return D + np.moveaxis(D, (-5, -4, -3), (-4, -3, -5)) + np.moveaxis(D, (-5, -4, -3), (-3, -5, -4))

    def uses_fd(self) -> bool:
        return self._derivative is None


class Form3:
    degree = 3

    def __init__(self, components: Callable):
        self.components = components

    def __call__(self, p, u, v, w):
        p = np.asarray(p, dtype=float)
        return _contract3(self.components(p), np.asarray(u, float), np.asarray(v, float), np.asarray(w, float))


def zero_form1(n: int, d: int, dtype=float) -> Form1:
    comp = lambda p: np.zeros(np.shape(p)[:-1] + (n, d, d), dtype=dtype)
    der = lambda p: np.zeros(np.shape(p)[:-1] + (n, n, d, d), dtype=dtype)
    return Form1(comp, der)


def zero_form2(n: int, d: int, dtype=float) -> Form2:
    comp = lambda p: np.zeros(np.shape(p)[:-1] + (n, n, d, d), dtype=dtype)
    der = lambda p: np.zeros(np.shape(p)[:-1] + (n, n, n, d, d), dtype=dtype)
    return Form2(comp, der)


def exterior_derivative1(A: Form1, fd_step=None) -> Form2:
    return Form2(lambda p: A.d_components(p, fd_step))


def exterior_derivative2(B: Form2, fd_step=None) -> Form3:
    return Form3(lambda p: B.d_components(p, fd_step))


def wedge(K: Form1, M: Form1) -> Form2:
    """(K ^ M)(u, v) = K(u) M(v) - K(v) M(u)."""
    def comp(p):
        k, m = K.components(p), M.components(p)
        prod = np.einsum("...mij,...njk->...mnik", k, m)
        return prod - np.swapaxes(prod, -3, -4)
    return Form2(comp)


def form_act(K: Form1, Psi, cm: CrossedModule):
    """K |> Psi for a g-valued 1-form K and an h-valued 1- or 2-form Psi."""
    def act(x, y):
        return cm.act_gh(x, y)

    if Psi.degree == 1:
        def comp(p):
            k, q = K.components(p), Psi.components(p)
            t = act(k[..., :, None, :, :], q[..., None, :, :, :])
            return t - np.swapaxes(t, -3, -4)
        return Form2(comp)
    if Psi.degree == 2:
        def comp3(p):
            k, q = K.components(p), Psi.components(p)
            # K_lam |> Q_{mu nu}, then cyclic sum
            t = act(k[..., :, None, None, :, :], q[..., None, :, :, :, :])
            return t + np.moveaxis(t, (-5, -4, -3), (-4, -3, -5)) + np.moveaxis(t, (-5, -4, -3), (-3, -5, -4))
        return Form3(comp3)
    raise ValueError("form_act supports 1- and 2-forms")


def two_form_act(F: Form2, phi: Form1, cm: CrossedModule) -> Form3:
    """F |> phi for a g-valued 2-form and an h-valued 1-form (cyclic sum)."""
    def comp(p):
        f, q = F.components(p), phi.components(p)
        t = cm.act_gh(f[..., :, :, None, :, :], q[..., None, None, :, :, :])
        return t + np.moveaxis(t, (-5, -4, -3), (-4, -3, -5)) + np.moveaxis(t, (-5, -4, -3), (-3, -5, -4))
    return Form3(comp)


@dataclass
class LocalConnection:
    """A chart-local 2-connection (A, B)."""
    A: Form1
    B: Form2
    chart: Optional[int] = None


@dataclass
class GaugeTransformation:
    """A 2-gauge transformation (g, phi).

    g maps points to G; dg maps points to the stack d_mu g, shape (..., n, d, d).
    phi is an h-valued Form1 whose own derivative supplies dphi.
    """
    g: Callable
    phi: Form1
    dg: Optional[Callable] = None
    fd_step: Optional[float] = None

    def dg_at(self, p, fd_step=None):
        if self.dg is not None:
            return self.dg(np.asarray(p, dtype=float))
        h = fd_step if fd_step is not None else self.fd_step
        if h is None:
            raise ConfigurationError("gauge transformation has no dg and finite differences are not enabled")
        return fd_gradient(self.g, p, h)


def curvature1(A: Form1, fd_step=None) -> Form2:
    """Omega^A = dA + A ^ A."""
    def comp(p):
        a = A.components(p)
        prod = np.einsum("...mij,...njk->...mnik", a, a)
        return A.d_components(p, fd_step) + prod - np.swapaxes(prod, -3, -4)
    return Form2(comp)


def curvature2(conn: LocalConnection, cm: CrossedModule, fd_step=None) -> Form3:
    """Omega_2 = dB + A |> B."""
    AB = form_act(conn.A, conn.B, cm)
    return Form3(lambda p: conn.B.d_components(p, fd_step) + AB.components(p))


def fake_curvature(conn: LocalConnection, cm: CrossedModule, fd_step=None) -> Form2:
    Om = curvature1(conn.A, fd_step)
    return Form2(lambda p: Om.components(p) - cm.alpha_algebra(conn.B.components(p)))


def fake_flatness_residual(conn: LocalConnection, cm: CrossedModule, points, fd_step=None) -> float:
    vals = fake_curvature(conn, cm, fd_step).components(np.asarray(points, dtype=float))
    return float(np.max(np.abs(vals))) if vals.size else 0.0


def _inv(x):
    return np.linalg.inv(x)


def apply_gauge(conn: LocalConnection, gt: GaugeTransformation, cm: CrossedModule, fd_step=None) -> LocalConnection:
    """Solve the gauge law for (A', B').

    A' = Ad_{g^-1}(A - alpha(phi) + dg g^-1)
    B' = g^-1 |> (B - dphi - A |> phi + phi ^ phi)
    """
    A, B, phi = conn.A, conn.B, gt.phi
    Aphi = form_act(A, phi, cm)
    pp = wedge(phi, phi)

    def a_comp(p):
        g = gt.g(p)
        gi = _inv(g)
        dg = gt.dg_at(p, fd_step)
        inner = A.components(p) - cm.alpha_algebra(phi.components(p)) + dg @ gi[..., None, :, :]
        return gi[..., None, :, :] @ inner @ g[..., None, :, :]

    def b_comp(p):
        g = gt.g(p)
        gi = _inv(g)
        inner = B.components(p) - phi.d_components(p, fd_step) - Aphi.components(p) + pp.components(p)
        return cm.act_Gh(gi[..., None, None, :, :], inner)

    return LocalConnection(Form1(a_comp, fd_step=fd_step), Form2(b_comp, fd_step=fd_step), conn.chart)


def identity_gauge(n: int, cm: CrossedModule) -> GaugeTransformation:
    eye = cm.identity_G

    def g(p):
        return np.broadcast_to(eye, np.shape(p)[:-1] + eye.shape).copy()

    def dg(p):
        return np.zeros(np.shape(p)[:-1] + (n,) + eye.shape, dtype=eye.dtype)

    return GaugeTransformation(g, zero_form1(n, cm.dim_H, cm.dtype_H), dg)


def _acted_form(k: Callable, dk: Callable, phi: Form1, cm: CrossedModule, sign: float = 1.0) -> Form1:
    """The h-valued 1-form sign * (k |> phi) with its derivative from the product rule."""
    def comp(p):
        kk = k(p)
        return sign * cm.act_Gh(kk[..., None, :, :], phi.components(p))

    if not phi.has_derivative:
        return Form1(comp, fd_step=phi.fd_step)

    def der(p):
        kk = k(p)
        ki = _inv(kk)
        acted = cm.act_Gh(kk[..., None, :, :], phi.components(p))                # (..., mu)
        rot = dk(p) @ ki[..., None, :, :]                                      # (..., lam)
        first = cm.act_gh(rot[..., :, None, :, :], acted[..., None, :, :, :])
        second = cm.act_Gh(kk[..., None, None, :, :], phi.derivative(p))
        return sign * (first + second)

    return Form1(comp, der)


def inverse_gauge(gt: GaugeTransformation, cm: CrossedModule) -> GaugeTransformation:
    """(g^-1, -g^-1 |> phi)."""
    def g(p):
        return _inv(gt.g(p))

    def dg(p):
        gi = _inv(gt.g(p))
        return -gi[..., None, :, :] @ gt.dg_at(p) @ gi[..., None, :, :]

    return GaugeTransformation(g, _acted_form(g, dg, gt.phi, cm, -1.0), dg if (gt.dg or gt.fd_step) else None,
                               gt.fd_step)


def compose_gauge(first: GaugeTransformation, second: GaugeTransformation, cm: CrossedModule) -> GaugeTransformation:
    """Gauge map equal to applying ``first`` and then ``second``: (g1 g2, phi1 + g1 |> phi2)."""
    def g(p):
        return first.g(p) @ second.g(p)

    def dg(p):
        g1, g2 = first.g(p), second.g(p)
        return first.dg_at(p) @ g2[..., None, :, :] + g1[..., None, :, :] @ second.dg_at(p)

    acted = _acted_form(first.g, first.dg_at, second.phi, cm)
    p1 = first.phi

    def comp(p):
        return p1.components(p) + acted.components(p)

    der = None
    if p1.has_derivative and acted.has_derivative:
        der = lambda p: p1.derivative(p) + acted.derivative(p)
    return GaugeTransformation(g, Form1(comp, der, fd_step=p1.fd_step), dg, first.fd_step)


def modify_gauge(gt: GaugeTransformation, k: Callable, dk: Callable, A: Form1, cm: CrossedModule) -> GaugeTransformation:
    """Another gauge map with the same endpoints, shifted by an H-valued function k:

        (alpha(k) g,  k phi k^-1 + (A |> k) k^-1 + dk k^-1)

    where A is the connection 1-form of the source.  The derivative of the
    new phi is left to finite differences.
    """
    alpha = cm.alpha_group

    def g(p):
        return alpha(k(p)) @ gt.g(p)

    def dg(p):
        kk = k(p)
        ki = _inv(kk)
        ak = alpha(kk)
        rot = cm.alpha_algebra(dk(p) @ ki[..., None, :, :])
        return rot @ (ak @ gt.g(p))[..., None, :, :] + ak[..., None, :, :] @ gt.dg_at(p)

    def comp(p):
        kk = k(p)
        ki = _inv(kk)[..., None, :, :]
        kb = kk[..., None, :, :]
        return (kb @ gt.phi.components(p) @ ki
                + cm.act_gH(A.components(p), kb) @ ki
                + dk(p) @ ki)

    return GaugeTransformation(g, Form1(comp, fd_step=1e-4), dg, gt.fd_step)


def curvature_covariance_residual(conn: LocalConnection, gt: GaugeTransformation, cm: CrossedModule,
                                  points, fd_step: float = 1e-4, second_law: bool = True) -> dict:
    """Residuals of the two transformation laws of the curvatures:

        Omega^{A'} - alpha(B') = g^-1 |> (Omega^A - alpha(B))
        Omega_2' = g^-1 |> Omega_2 + [Omega^{A'} - alpha(B')] |> phi
    """
    pts = np.asarray(points, dtype=float)
    new = apply_gauge(conn, gt, cm, fd_step)
    fk_new = fake_curvature(new, cm, fd_step).components(pts)
    fk_old = fake_curvature(conn, cm, fd_step).components(pts)
    g = gt.g(pts)
    gi = _inv(g)[..., None, None, :, :]
    law1 = fk_new - gi @ fk_old @ g[..., None, None, :, :]
    out = {"fake_curvature_law": float(np.max(np.abs(law1)))}
    if second_law:
        om_new = curvature2(new, cm, fd_step).components(pts)
        om_old = curvature2(conn, cm, fd_step).components(pts)
        extra = two_form_act(fake_curvature(new, cm, fd_step), gt.phi, cm).components(pts)
        ginv = _inv(g)[..., None, None, None, :, :]
        law2 = om_new - cm.act_Gh(ginv, om_old) - extra
        out["two_curvature_law"] = float(np.max(np.abs(law2)))
    return out

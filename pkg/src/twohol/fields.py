"""Smooth synthetic fields with analytic derivatives.

Everything here is vectorized over leading batch axes of the point
argument p, shape (..., n).  The builders are used by the scenarios and
the test-suite to get connections and gauge maps whose exterior
derivatives are exact, so finite differences are only needed where the
formulas genuinely require them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import expm

from .connection import Form1, Form2, GaugeTransformation


@dataclass(frozen=True)
class Wave:
    """amp * sin(k . p + phase) with gradient amp * cos(k . p + phase) k."""
    amp: float
    k: np.ndarray
    phase: float

    def __call__(self, p):
        return self.amp * np.sin(np.asarray(p, dtype=float) @ self.k + self.phase)

    def grad(self, p):
        c = self.amp * np.cos(np.asarray(p, dtype=float) @ self.k + self.phase)
        return c[..., None] * self.k

    def hess(self, p):
        s = -self.amp * np.sin(np.asarray(p, dtype=float) @ self.k + self.phase)
        return s[..., None, None] * np.outer(self.k, self.k)


def random_wave(rng: np.random.Generator, n: int, amp: float = 1.0, freq: float = 1.0) -> Wave:
    return Wave(amp * rng.normal(), freq * rng.normal(size=n), rng.uniform(0, 2 * np.pi))


class WaveForm1:
    """A 1-form sum_{mu, j} w_{mu j}(p) X_{mu j} dx^mu with wave coefficients."""

    def __init__(self, terms: Sequence[Sequence[tuple]], d: int, dtype=float):
        self.terms = [list(t) for t in terms]
        self.n = len(self.terms)
        self.d = d
        self.dtype = dtype

    def components(self, p):
        p = np.asarray(p, dtype=float)
        out = np.zeros(p.shape[:-1] + (self.n, self.d, self.d), dtype=self.dtype)
        for mu, terms in enumerate(self.terms):
            for w, X in terms:
                out[..., mu, :, :] += w(p)[..., None, None] * X
        return out

    def derivative(self, p):
        p = np.asarray(p, dtype=float)
        out = np.zeros(p.shape[:-1] + (self.n, self.n, self.d, self.d), dtype=self.dtype)
        for mu, terms in enumerate(self.terms):
            for w, X in terms:
                out[..., :, mu, :, :] += w.grad(p)[..., None, None] * X
        return out

    def form(self) -> Form1:
        return Form1(self.components, self.derivative)


def random_form1(rng, n: int, sample_alg, terms: int = 2, amp: float = 0.5, freq: float = 1.0,
                 d: Optional[int] = None, dtype=float) -> Form1:
    """Random smooth 1-form with coefficients in the algebra produced by ``sample_alg``."""
    probe = np.asarray(sample_alg(rng))
    d = probe.shape[-1] if d is None else d
    dtype = np.result_type(probe, dtype)
    tl = [[(random_wave(rng, n, amp, freq), np.asarray(sample_alg(rng))) for _ in range(terms)] for _ in range(n)]
    return WaveForm1(tl, d, dtype).form()


class WaveForm2:
    """A 2-form sum_{mu<nu} sum_j w(p) X (dx^mu ^ dx^nu)."""

    def __init__(self, terms: dict, n: int, d: int, dtype=float):
        self.terms = terms  # (mu, nu) -> [(wave, X)]
        self.n, self.d, self.dtype = n, d, dtype

    def components(self, p):
        p = np.asarray(p, dtype=float)
        out = np.zeros(p.shape[:-1] + (self.n, self.n, self.d, self.d), dtype=self.dtype)
        for (mu, nu), terms in self.terms.items():
            for w, X in terms:
                v = w(p)[..., None, None] * X
                out[..., mu, nu, :, :] += v
                out[..., nu, mu, :, :] -= v
        return out

    def derivative(self, p):
        p = np.asarray(p, dtype=float)
        out = np.zeros(p.shape[:-1] + (self.n, self.n, self.n, self.d, self.d), dtype=self.dtype)
        for (mu, nu), terms in self.terms.items():
            for w, X in terms:
                v = w.grad(p)[..., None, None] * X
                out[..., :, mu, nu, :, :] += v
                out[..., :, nu, mu, :, :] -= v
        return out

    def form(self) -> Form2:
        return Form2(self.components, self.derivative)


def random_form2(rng, n: int, sample_alg, terms: int = 1, amp: float = 0.5, freq: float = 1.0) -> Form2:
    probe = np.asarray(sample_alg(rng))
    d = probe.shape[-1]
    tl = {}
    for mu in range(n):
        for nu in range(mu + 1, n):
            tl[(mu, nu)] = [(random_wave(rng, n, amp, freq), np.asarray(sample_alg(rng))) for _ in range(terms)]
    return WaveForm2(tl, n, d, probe.dtype).form()


class ExpProduct:
    """g(p) = exp(f_1(p) X_1) exp(f_2(p) X_2) ... with the exact derivative."""

    def __init__(self, factors: Sequence[tuple], d: int):
        self.factors = list(factors)
        self.d = d

    def _pieces(self, p):
        return [expm(f(p)[..., None, None] * X) for f, X in self.factors]

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        out = np.broadcast_to(np.eye(self.d), p.shape[:-1] + (self.d, self.d)).copy()
        for e in self._pieces(p):
            out = out @ e
        return out

    def derivative(self, p):
        """Stack d_mu g, shape (..., n, d, d)."""
        p = np.asarray(p, dtype=float)
        pieces = self._pieces(p)
        eye = np.broadcast_to(np.eye(self.d), p.shape[:-1] + (self.d, self.d))
        pre = [eye]
        for e in pieces:
            pre.append(pre[-1] @ e)
        post = [eye]
        for e in reversed(pieces):
            post.append(e @ post[-1])
        post = post[::-1]
        n = p.shape[-1]
        out = np.zeros(p.shape[:-1] + (n, self.d, self.d), dtype=pre[-1].dtype)
        for j, (f, X) in enumerate(self.factors):
            # d(e^{fX}) = df X e^{fX}
            mid = (X @ pieces[j])
            core = pre[j] @ mid @ post[j + 1]
            out += f.grad(p)[..., :, None, None] * core[..., None, :, :]
        return out


def random_group_field(rng, n: int, sample_alg, factors: int = 2, amp: float = 0.6, freq: float = 1.0) -> ExpProduct:
    X0 = np.asarray(sample_alg(rng))
    fl = [(random_wave(rng, n, amp, freq), X0)] + [
        (random_wave(rng, n, amp, freq), np.asarray(sample_alg(rng))) for _ in range(factors - 1)]
    return ExpProduct(fl, X0.shape[-1])


def random_gauge(rng, n: int, cm, amp_g: float = 0.6, amp_phi: float = 0.4, freq: float = 1.0) -> GaugeTransformation:
    """Smooth 2-gauge transformation with analytic dg and dphi."""
    if cm.dim_G == 1 and np.allclose(cm.alpha_group(cm.identity_H), 1.0) and cm.name in ("trivial", "abelian_gerbe"):
        gfield = ExpProduct([], 1)
    else:
        gfield = random_group_field(rng, n, cm.sample_g, amp=amp_g, freq=freq)
    phi = random_form1(rng, n, cm.sample_h, amp=amp_phi, freq=freq)
    return GaugeTransformation(gfield, phi, gfield.derivative)


def constant_form1(n: int, comps) -> Form1:
    comps = np.asarray(comps)
    return Form1(lambda p: np.broadcast_to(comps, np.shape(p)[:-1] + comps.shape).copy(),
                 lambda p: np.zeros(np.shape(p)[:-1] + (n,) + comps.shape, dtype=comps.dtype))


def curvature_of_waves(wf: WaveForm1) -> Form2:
    """Omega^A = dA + A ^ A for a wave 1-form, with the exact derivative."""
    def second(p):
        p = np.asarray(p, dtype=float)
        n = wf.n
        out = np.zeros(p.shape[:-1] + (n, n, n, wf.d, wf.d), dtype=wf.dtype)  # [lam, kap, mu] = d_lam d_kap A_mu
        for mu, terms in enumerate(wf.terms):
            for w, X in terms:
                out[..., :, :, mu, :, :] += w.hess(p)[..., None, None] * X
        return out

    def comp(p):
        a = wf.components(p)
        D = wf.derivative(p)
        prod = np.einsum("...mij,...njk->...mnik", a, a)
        return D - np.swapaxes(D, -3, -4) + prod - np.swapaxes(prod, -3, -4)

    def der(p):
        a = wf.components(p)
        D = wf.derivative(p)
        S = second(p)
        dd = S - np.swapaxes(S, -3, -4)
        prod = (np.einsum("...lmij,...njk->...lmnik", D, a) + np.einsum("...mij,...lnjk->...lmnik", a, D))
        return dd + prod - np.swapaxes(prod, -3, -4)

    return Form2(comp, der)


def fake_flat_inner(rng, n: int, cm, terms: int = 2, amp: float = 0.5, freq: float = 1.0):
    """(A, B) with B = Omega^A, fake-flat for any module with alpha = id."""
    tl = [[(random_wave(rng, n, amp, freq), np.asarray(cm.sample_g(rng))) for _ in range(terms)] for _ in range(n)]
    wf = WaveForm1(tl, cm.dim_G)
    return wf.form(), curvature_of_waves(wf)

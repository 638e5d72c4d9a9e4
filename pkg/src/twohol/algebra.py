"""Crossed modules of matrix groups and the 2-groupoid they generate.

A crossed module is a pair of matrix groups G, H with a homomorphism
alpha: H -> G and an action g |> h of G on H such that

    alpha(g |> h) = g alpha(h) g^-1,      alpha(f) |> h = f h f^-1.

2-arrows of the one-object 2-groupoid are pairs (g, h) with source g and
target alpha(h^-1) g.  Horizontal composition is the semidirect product
(g1, h1)(g2, h2) = (g1 g2, (g1 |> h2) h1); vertical composition multiplies
the H parts.

All maps stored on a CrossedModule act on stacks of matrices: leading axes
are batch axes.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Dict, Optional

import numpy as np
from scipy.linalg import expm

Array = np.ndarray


class MembershipError(ValueError):
    pass


class CompositionError(ValueError):
    def __init__(self, message: str, mismatch: float):
        super().__init__(f"{message} (mismatch {mismatch:.3e})")
        self.mismatch = mismatch


def _norm(x) -> float:
    x = np.asarray(x)
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x)))


def comm(x, y):
    return x @ y - y @ x


@dataclass(frozen=True)
class CrossedModule:
    """A crossed module (G, H, alpha, |>) of matrix groups.

    act_gH(x, h) returns the derivative of exp(s x) |> h at s = 0, a tangent
    vector at h written as a matrix; multiply by h^-1 on the right to land
    in the Lie algebra of H.
    """

    name: str
    dim_G: int
    dim_H: int
    alpha_group: Callable[[Array], Array]
    alpha_algebra: Callable[[Array], Array]
    act_GH: Callable[[Array, Array], Array]
    act_Gh: Callable[[Array, Array], Array]
    act_gH: Callable[[Array, Array], Array]
    act_gh: Callable[[Array, Array], Array]
    equivalence_invariant: Callable[[Array], Array]
    g_residual: Callable[[Array], float]
    h_residual: Callable[[Array], float]
    sample_G: Callable[[np.random.Generator], Array]
    sample_H: Callable[[np.random.Generator], Array]
    sample_g: Callable[[np.random.Generator], Array]
    sample_h: Callable[[np.random.Generator], Array]
    tolerance: float = 1e-8
    dtype_G: type = float
    dtype_H: type = float
    conjugacy_invariant: Optional[Callable[[Array], Array]] = None
    trivial_action: bool = False

    @property
    def identity_G(self) -> Array:
        return np.eye(self.dim_G, dtype=self.dtype_G)

    @property
    def identity_H(self) -> Array:
        return np.eye(self.dim_H, dtype=self.dtype_H)

    def group_check_G(self, g) -> bool:
        return bool(np.all(np.isfinite(g))) and self.g_residual(g) <= self.tolerance

    def group_check_H(self, h) -> bool:
        return bool(np.all(np.isfinite(h))) and self.h_residual(h) <= self.tolerance

    def zero_g(self) -> Array:
        return np.zeros((self.dim_G, self.dim_G), dtype=self.dtype_G)

    def zero_h(self) -> Array:
        return np.zeros((self.dim_H, self.dim_H), dtype=self.dtype_H)

    def class_distance(self, h1, h2) -> float:
        d = np.asarray(self.equivalence_invariant(h1)) - np.asarray(self.equivalence_invariant(h2))
        return float(np.linalg.norm(d))


# ---------------------------------------------------------------------------
# built-in modules

def _ones_like_stack(x, dim, dtype=float):
    shape = np.shape(x)[:-2] + (dim, dim)
    return np.broadcast_to(np.eye(dim, dtype=dtype), shape).copy()


def _zeros_like_stack(x, dim, dtype=float):
    return np.zeros(np.shape(x)[:-2] + (dim, dim), dtype=dtype)


def _entries(h):
    h = np.asarray(h)
    return h.reshape(h.shape[:-2] + (-1,))


def _det_residual(g) -> float:
    g = np.asarray(g)
    if not np.all(np.isfinite(g)):
        return np.inf
    d = np.abs(np.linalg.det(g))
    return 0.0 if np.all(d > 1e-12) else 1.0


def _orth_residual(g) -> float:
    g = np.asarray(g)
    n = g.shape[-1]
    r = np.swapaxes(g, -1, -2) @ g - np.eye(n)
    return max(_norm(r), _norm(np.linalg.det(g) - 1.0))


def char_poly(h) -> Array:
    """Coefficients of det(lambda I - h) after the leading 1."""
    h = np.asarray(h)
    ev = np.linalg.eigvals(h)
    return np.real_if_close(np.poly(ev)[1:], tol=1e6)


def _conj(g, h):
    return g @ h @ np.linalg.inv(g)


def trivial() -> CrossedModule:
    """G = H = {I} (1x1)."""
    z = lambda rng: np.zeros((1, 1))
    one = lambda rng: np.eye(1)
    return CrossedModule(
        name="trivial", dim_G=1, dim_H=1,
        alpha_group=lambda h: _ones_like_stack(h, 1),
        alpha_algebra=lambda y: _zeros_like_stack(y, 1),
        act_GH=lambda g, h: np.broadcast_to(h, np.broadcast_shapes(np.shape(g), np.shape(h))).copy(),
        act_Gh=lambda g, y: np.broadcast_to(y, np.broadcast_shapes(np.shape(g), np.shape(y))).copy(),
        act_gH=lambda x, h: np.zeros(np.broadcast_shapes(np.shape(x), np.shape(h))),
        act_gh=lambda x, y: np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y))),
        equivalence_invariant=_entries,
        g_residual=lambda g: _norm(np.asarray(g) - 1.0),
        h_residual=lambda h: _norm(np.asarray(h) - 1.0),
        sample_G=one, sample_H=one, sample_g=z, sample_h=z,
        trivial_action=True,
    )


def abelian_gerbe() -> CrossedModule:
    """G = {I}, H = U(1) as 1x1 complex matrices, alpha = I, trivial action."""
    return CrossedModule(
        name="abelian_gerbe", dim_G=1, dim_H=1,
        alpha_group=lambda h: _ones_like_stack(h, 1),
        alpha_algebra=lambda y: _zeros_like_stack(y, 1),
        act_GH=lambda g, h: np.broadcast_to(h, np.broadcast_shapes(np.shape(g), np.shape(h))).copy(),
        act_Gh=lambda g, y: np.broadcast_to(y, np.broadcast_shapes(np.shape(g), np.shape(y))).copy(),
        act_gH=lambda x, h: np.zeros(np.broadcast_shapes(np.shape(x), np.shape(h)), dtype=complex),
        act_gh=lambda x, y: np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)), dtype=complex),
        equivalence_invariant=_entries,
        g_residual=lambda g: _norm(np.asarray(g) - 1.0),
        h_residual=lambda h: _norm(np.abs(np.asarray(h)) - 1.0),
        sample_G=lambda rng: np.eye(1),
        sample_H=lambda rng: np.array([[np.exp(1j * rng.uniform(-np.pi, np.pi))]]),
        sample_g=lambda rng: np.zeros((1, 1)),
        sample_h=lambda rng: np.array([[1j * rng.normal()]]),
        dtype_H=complex,
        trivial_action=True,
    )


def inner(n: int = 2, compact: bool = False, scale: float = 0.4) -> CrossedModule:
    """G = H = GL(n, R) (or SO(n) when compact), alpha = id, |> = conjugation.

    The quotient H/[G,H] is GL(n)/SL(n) (resp. trivial for SO(n), n >= 3),
    so the class invariant is the determinant.  The finer conjugacy
    invariant (characteristic polynomial) is kept as ``conjugacy_invariant``.
    """
    def sample_alg(rng):
        x = rng.normal(size=(n, n)) * scale
        return x - x.T if compact else x

    def sample_grp(rng):
        return expm(sample_alg(rng))

    ident = lambda x: np.array(x, copy=True)
    return CrossedModule(
        name=f"inner{n}{'_compact' if compact else ''}", dim_G=n, dim_H=n,
        alpha_group=ident, alpha_algebra=ident,
        act_GH=_conj, act_Gh=_conj,
        act_gH=lambda x, h: x @ h - h @ x,
        act_gh=comm,
        equivalence_invariant=lambda h: np.linalg.det(np.asarray(h))[..., None],
        g_residual=_orth_residual if compact else _det_residual,
        h_residual=_orth_residual if compact else _det_residual,
        sample_G=sample_grp, sample_H=sample_grp, sample_g=sample_alg, sample_h=sample_alg,
        conjugacy_invariant=char_poly,
    )


def ab_pair() -> CrossedModule:
    """G = H = positive reals (1x1), alpha = id, trivial action."""
    pos = lambda x: 0.0 if np.all(np.asarray(x) > 0) else 1.0
    return CrossedModule(
        name="ab_pair", dim_G=1, dim_H=1,
        alpha_group=lambda h: np.array(h, copy=True),
        alpha_algebra=lambda y: np.array(y, copy=True),
        act_GH=lambda g, h: np.broadcast_to(h, np.broadcast_shapes(np.shape(g), np.shape(h))).copy(),
        act_Gh=lambda g, y: np.broadcast_to(y, np.broadcast_shapes(np.shape(g), np.shape(y))).copy(),
        act_gH=lambda x, h: np.zeros(np.broadcast_shapes(np.shape(x), np.shape(h))),
        act_gh=lambda x, y: np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y))),
        equivalence_invariant=_entries,
        g_residual=pos, h_residual=pos,
        sample_G=lambda rng: np.array([[np.exp(rng.normal(scale=0.5))]]),
        sample_H=lambda rng: np.array([[np.exp(rng.normal(scale=0.5))]]),
        sample_g=lambda rng: np.array([[rng.normal()]]),
        sample_h=lambda rng: np.array([[rng.normal()]]),
        trivial_action=True,
    )


BUILTIN = {
    "trivial": trivial,
    "abelian_gerbe": abelian_gerbe,
    "inner": inner,
    "ab_pair": ab_pair,
}


# ---------------------------------------------------------------------------
# wreath product and 2-arrows

@dataclass(frozen=True)
class WreathElement:
    g: Array
    h: Array


@dataclass(frozen=True)
class WreathAlgebraElement:
    x: Array
    y: Array


@dataclass(frozen=True)
class TwoArrow:
    """A 2-arrow (source, h) with target alpha(h^-1) source."""
    source: Array
    h: Array

    def target(self, cm: CrossedModule) -> Array:
        return cm.alpha_group(np.linalg.inv(self.h)) @ self.source

    def as_wreath(self) -> WreathElement:
        return WreathElement(self.source, self.h)


def _check_member(a: WreathElement, cm: CrossedModule, what: str):
    if not cm.group_check_G(a.g):
        raise MembershipError(f"{what}: g component is not in G (residual {cm.g_residual(a.g):.3e})")
    if not cm.group_check_H(a.h):
        raise MembershipError(f"{what}: h component is not in H (residual {cm.h_residual(a.h):.3e})")


def wreath_mul(a: WreathElement, b: WreathElement, cm: CrossedModule, check: bool = True) -> WreathElement:
    if check:
        _check_member(a, cm, "left factor")
        _check_member(b, cm, "right factor")
    return WreathElement(a.g @ b.g, cm.act_GH(a.g, b.h) @ a.h)


def wreath_inv(a: WreathElement, cm: CrossedModule) -> WreathElement:
    gi = np.linalg.inv(a.g)
    return WreathElement(gi, cm.act_GH(gi, np.linalg.inv(a.h)))


def wreath_ad(a: WreathElement, v: WreathAlgebraElement, cm: CrossedModule) -> WreathAlgebraElement:
    """Adjoint action of (g, h) on (X, Y):
    (Ad_g X, (Ad_g X) |> h^-1 . h + Ad_{h^-1}(g |> Y))."""
    g, h = a.g, a.h
    hi = np.linalg.inv(h)
    x = g @ v.x @ np.linalg.inv(g)
    y = cm.act_gH(x, hi) @ h + hi @ cm.act_Gh(g, v.y) @ h
    return WreathAlgebraElement(x, y)


def wreath_alg_mul(v: WreathAlgebraElement, w: WreathAlgebraElement, cm: CrossedModule) -> WreathAlgebraElement:
    """(X, Y)(X', Y') = (X X', X |> Y' + Y' Y) in the enveloping algebra."""
    return WreathAlgebraElement(v.x @ w.x, cm.act_gh(v.x, w.y) + w.y @ v.y)


def group_times_algebra(a: WreathElement, v: WreathAlgebraElement, cm: CrossedModule) -> WreathAlgebraElement:
    """(g, h)(X, Y) = (g X, (g |> Y) h)."""
    return WreathAlgebraElement(a.g @ v.x, cm.act_Gh(a.g, v.y) @ a.h)


def algebra_times_group(v: WreathAlgebraElement, a: WreathElement, cm: CrossedModule) -> WreathAlgebraElement:
    """(X, Y)(g, h) = (X g, X |> h + h Y)."""
    return WreathAlgebraElement(v.x @ a.g, cm.act_gH(v.x, a.h) + a.h @ v.y)


def wreath_exp(v: WreathAlgebraElement, s: float, cm: CrossedModule) -> WreathElement:
    return WreathElement(expm(s * v.x), expm(s * v.y))


def identity_arrow(g, cm: CrossedModule) -> TwoArrow:
    return TwoArrow(np.asarray(g), cm.identity_H)


def vcompose(a: TwoArrow, b: TwoArrow, cm: CrossedModule, tol: Optional[float] = None) -> TwoArrow:
    """(g, h) #1 (g', h') = (g, h h'), requiring g' = alpha(h^-1) g."""
    tol = cm.tolerance if tol is None else tol
    if tol >= 0:
        mismatch = _norm(a.target(cm) - b.source)
        if mismatch > tol:
            raise CompositionError("vertical composition: target of first != source of second", mismatch)
    return TwoArrow(a.source, a.h @ b.h)


def hcompose(a: TwoArrow, b: TwoArrow, cm: CrossedModule) -> TwoArrow:
    """(g, h) #0 (g', h') = (g g', (g |> h') h)."""
    return TwoArrow(a.source @ b.source, cm.act_GH(a.source, b.h) @ a.h)


def whisker_left(g, b: TwoArrow, cm: CrossedModule) -> TwoArrow:
    return TwoArrow(g @ b.source, cm.act_GH(g, b.h))


def whisker_right(a: TwoArrow, g) -> TwoArrow:
    return TwoArrow(a.source @ g, a.h)


def vinverse(a: TwoArrow, cm: CrossedModule) -> TwoArrow:
    return TwoArrow(a.target(cm), np.linalg.inv(a.h))


# ---------------------------------------------------------------------------
# axiom residuals

def _d_ds(fun, eps=1e-3):
    # five-point central stencil
    return (-fun(2 * eps) + 8 * fun(eps) - 8 * fun(-eps) + fun(-2 * eps)) / (12 * eps)


# checks computed purely by multiplication/inversion; the rest go through
# finite differences and get the looser bound
EXACT_CHECKS = (
    "alpha_equivariance", "peiffer", "action_composition", "action_product",
    "alpha_homomorphism", "diff_equivariance", "diff_peiffer", "identity_action",
    "wreath_associativity", "wreath_inverse", "hcompose_is_wreath_mul",
    "unit_laws", "vertical_associativity", "horizontal_associativity",
    "interchange", "interchange_composability", "interchange_identity", "class_function",
)
FD_CHECKS = ("alpha_differential", "act_Gh_differential", "act_gH_differential",
             "act_gh_differential", "wreath_ad")


def axioms_report(cm: CrossedModule, samples: int = 200, seed: int = 0) -> Dict[str, float]:
    """Max residual of every crossed-module and 2-groupoid identity over
    ``samples`` pseudo-random elements."""
    rng = np.random.default_rng(seed)
    res = {k: 0.0 for k in EXACT_CHECKS + FD_CHECKS}
    inv = np.linalg.inv
    alpha = cm.alpha_group
    dal = cm.alpha_algebra

    def upd(key, val):
        res[key] = max(res[key], _norm(val))

    for _ in range(samples):
        g, g2 = cm.sample_G(rng), cm.sample_G(rng)
        h, h2, f = cm.sample_H(rng), cm.sample_H(rng), cm.sample_H(rng)
        x, v = cm.sample_g(rng), cm.sample_g(rng)
        y, u = cm.sample_h(rng), cm.sample_h(rng)
        upd("alpha_equivariance", alpha(cm.act_GH(g, h)) - g @ alpha(h) @ inv(g))
        upd("peiffer", cm.act_GH(alpha(f), h) - f @ h @ inv(f))
        upd("action_composition", cm.act_GH(g @ g2, h) - cm.act_GH(g, cm.act_GH(g2, h)))
        upd("action_product", cm.act_GH(g, h @ h2) - cm.act_GH(g, h) @ cm.act_GH(g, h2))
        upd("alpha_homomorphism", alpha(h @ h2) - alpha(h) @ alpha(h2))
        upd("diff_equivariance", dal(cm.act_gh(x, u)) - comm(x, dal(u)))
        upd("diff_peiffer", cm.act_gh(dal(y), u) - comm(y, u))
        upd("identity_action", cm.act_gH(x, cm.identity_H))
        upd("class_function", np.asarray(cm.equivalence_invariant(cm.act_GH(g, h)))
            - np.asarray(cm.equivalence_invariant(h)))

        # differentials against the group maps
        upd("alpha_differential", _d_ds(lambda s: alpha(expm(s * y))) - dal(y))
        upd("act_Gh_differential", _d_ds(lambda s: cm.act_GH(g, expm(s * y))) - cm.act_Gh(g, y))
        upd("act_gH_differential", _d_ds(lambda s: cm.act_GH(expm(s * x), h)) - cm.act_gH(x, h))
        upd("act_gh_differential", _d_ds(lambda s: cm.act_Gh(expm(s * x), y)) - cm.act_gh(x, y))

        a, b, c = WreathElement(g, h), WreathElement(g2, h2), WreathElement(cm.sample_G(rng), f)
        ab_c = wreath_mul(wreath_mul(a, b, cm, False), c, cm, False)
        a_bc = wreath_mul(a, wreath_mul(b, c, cm, False), cm, False)
        upd("wreath_associativity", ab_c.g - a_bc.g)
        upd("wreath_associativity", ab_c.h - a_bc.h)
        e = wreath_mul(a, wreath_inv(a, cm), cm, False)
        upd("wreath_inverse", e.g - cm.identity_G)
        upd("wreath_inverse", e.h - cm.identity_H)
        hc = hcompose(TwoArrow(g, h), TwoArrow(g2, h2), cm)
        wm = wreath_mul(a, b, cm, False)
        upd("hcompose_is_wreath_mul", hc.source - wm.g)
        upd("hcompose_is_wreath_mul", hc.h - wm.h)

        # Lemma on the adjoint action, against the derivative of conjugation
        w = WreathAlgebraElement(x, y)
        ai = wreath_inv(a, cm)

        def conj(s):
            m = wreath_mul(wreath_mul(a, wreath_exp(w, s, cm), cm, False), ai, cm, False)
            return np.concatenate([m.g.ravel(), m.h.ravel()])

        ad = wreath_ad(a, w, cm)
        upd("wreath_ad", _d_ds(conj) - np.concatenate([ad.x.ravel(), ad.y.ravel()]))

        # strict 2-category axioms
        phi = TwoArrow(g, h)
        one_src = identity_arrow(g, cm)
        one_tgt = identity_arrow(phi.target(cm), cm)
        for lhs in (vcompose(one_src, phi, cm, -1), vcompose(phi, one_tgt, cm, -1)):
            upd("unit_laws", lhs.h - phi.h)
            upd("unit_laws", lhs.source - phi.source)
        one_G = identity_arrow(cm.identity_G, cm)
        for lhs in (hcompose(one_G, phi, cm), hcompose(phi, one_G, cm)):
            upd("unit_laws", lhs.h - phi.h)
            upd("unit_laws", lhs.source - phi.source)
        p2 = TwoArrow(phi.target(cm), h2)
        p3 = TwoArrow(p2.target(cm), f)
        l = vcompose(vcompose(phi, p2, cm, -1), p3, cm, -1)
        r = vcompose(phi, vcompose(p2, p3, cm, -1), cm, -1)
        upd("vertical_associativity", l.h - r.h)
        q1, q2, q3 = TwoArrow(g, h), TwoArrow(g2, h2), TwoArrow(cm.sample_G(rng), f)
        l = hcompose(hcompose(q1, q2, cm), q3, cm)
        r = hcompose(q1, hcompose(q2, q3, cm), cm)
        upd("horizontal_associativity", l.h - r.h)
        upd("horizontal_associativity", l.source - r.source)

        # compatibility of #0 and #1 on a composable quadruple
        beta, beta_p = TwoArrow(g, h), TwoArrow(g2, h2)
        gamma = TwoArrow(beta.target(cm), cm.sample_H(rng))
        gamma_p = TwoArrow(beta_p.target(cm), cm.sample_H(rng))
        top = hcompose(beta, beta_p, cm)
        bot = hcompose(gamma, gamma_p, cm)
        upd("interchange_composability", top.target(cm) - bot.source)
        lhs = vcompose(top, bot, cm, -1)
        rhs = hcompose(vcompose(beta, gamma, cm, -1), vcompose(beta_p, gamma_p, cm, -1), cm)
        upd("interchange", lhs.h - rhs.h)
        upd("interchange", lhs.source - rhs.source)
        # (g g', g |> h' . h) = (g g', h . [alpha(h^-1) g] |> h')
        upd("interchange_identity", cm.act_GH(g, h2) @ h - h @ cm.act_GH(alpha(inv(h)) @ g, h2))
    return res


def corrupt_alpha(cm: CrossedModule, amount: float = 0.1) -> CrossedModule:
    """A copy of ``cm`` whose alpha is deliberately wrong (negative control)."""
    twist = np.eye(cm.dim_G) + amount * np.triu(np.ones((cm.dim_G, cm.dim_G)), 1) if cm.dim_G > 1 \
        else np.array([[1.0 + amount]])
    orig = cm.alpha_group

    def alpha(h):
        return twist @ orig(h)

    return replace(cm, name=cm.name + "_corrupt", alpha_group=alpha)

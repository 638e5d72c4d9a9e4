"""Verifier suites, one function per group of checks.

Every suite appends ``Check`` records to a ``Report``; the CLI prints
them and the acceptance tests assert on them.  Anchors are the identity
being checked, written out as a formula.
"""
from __future__ import annotations

import numpy as np

from . import algebra as alg
from .bundle import perturb, tetrahedron_residual, verify_cocycle, verify_compatibility
from .connection import LocalConnection, apply_gauge
from .fields import fake_flat_inner, random_form1, random_gauge
from .global_holonomy import (GluingError, MeshError, build_mesh, candidate_charts, compare, glue,
                              invariance_under_reassignment, invariance_under_refinement, order_comparison,
                              refine_assignment, reparametrization_residual, sphere_kernel_check)
from .numerics import StepSpec, convergence_order
from .path_transport import (ChartError, ParamPath, SurfacePatch, gauge_target_residual, gauge_transport_h, holonomy1,
                             loop_holonomy_u, script_A, script_B, second_variation_check, u_decomposition_residual,
                             wreath_holonomy, wreath_loop_crosscheck)
from .report import Report
from .scenarios import SHEAR, abelian_stokes, inner_annulus, inner_sphere, inner_three_charts, sphere_gerbe, trivial_scenario
from .surface_transport import (composition_residuals, cylinder_residual, gauge_cube_residual, local_2_holonomy)

_norm = alg._norm
PIPELINE_ERRORS = (GluingError, MeshError, ChartError, ValueError, FloatingPointError)


# ---------------------------------------------------------------------------
# shared test geometry

def wavy_path():
    """A smooth planar path with analytic velocity."""
    def m(t):
        return np.stack([0.8 * np.cos(2.5 * t) + 0.1 * t, 0.6 * np.sin(3.0 * t) - 0.2 * t * t], -1)

    def v(t):
        return np.stack([-2.0 * np.sin(2.5 * t) + 0.1, 1.8 * np.cos(3.0 * t) - 0.4 * t], -1)
    return ParamPath(m, (0.0, 1.0), v)


def curved_patch():
    """(t, s) -> (t + 0.25 s^2, s + 0.2 s sin(pi t)) on the unit square."""
    def m(t, s):
        return np.stack([t + 0.25 * s * s, s + 0.2 * np.sin(np.pi * t) * s], -1)

    def jac(t, s):
        dt = np.stack([np.ones_like(t), 0.2 * np.pi * np.cos(np.pi * t) * s], -1)
        ds = np.stack([0.5 * s, 1 + 0.2 * np.sin(np.pi * t)], -1)
        return dt, ds
    return SurfacePatch(m, ((0.0, 1.0), (0.0, 1.0)), jac)


def inner_fields(seed: int = 0, n: int = 2):
    """Fake-flat INNER(2) pair obtained by gauge transforming (A, Omega^A), plus an h-valued 1-form."""
    cm = alg.inner(2)
    rng = np.random.default_rng(seed)
    A0, B0 = fake_flat_inner(rng, n, cm, amp=0.5, freq=0.8)
    gt = random_gauge(rng, n, cm, amp_g=0.5, amp_phi=0.3, freq=0.8)
    conn = apply_gauge(LocalConnection(A0, B0), gt, cm)
    phi = random_form1(rng, n, cm.sample_h, amp=0.4, freq=0.8)
    gt2 = random_gauge(rng, n, cm, amp_g=0.4, amp_phi=0.3, freq=0.8)
    return cm, conn, phi, gt2


# ---------------------------------------------------------------------------
# algebra

def algebra_suite(r: Report, samples: int = 200, seed: int = 0, exact_tol: float = 1e-12, fd_tol: float = 1e-9):
    for name, make in alg.BUILTIN.items():
        cm = make()
        rep = alg.axioms_report(cm, samples, seed)
        for key in alg.EXACT_CHECKS:
            r.add(f"{name}: {key}", ANCHORS.get(key, key), lambda v=rep[key]: v, exact_tol)
        for key in alg.FD_CHECKS:
            r.add(f"{name}: {key}", ANCHORS.get(key, key), lambda v=rep[key]: v, fd_tol)
    bad = alg.corrupt_alpha(alg.inner(2), 0.1)
    rep = alg.axioms_report(bad, 20, seed)
    r.add("corrupted alpha flagged", "alpha(g|>h) != g alpha(h) g^-1", lambda: rep["alpha_equivariance"], 1e-3,
          above=True)


ANCHORS = {
    "alpha_equivariance": "alpha(g|>h) = g alpha(h) g^-1",
    "peiffer": "alpha(f)|>h = f h f^-1",
    "action_composition": "(g g')|>h = g|>(g'|>h)",
    "action_product": "g|>(h h') = (g|>h)(g|>h')",
    "alpha_homomorphism": "alpha(h h') = alpha(h) alpha(h')",
    "diff_equivariance": "alpha(X|>Y) = [X, alpha(Y)]",
    "diff_peiffer": "alpha(Y)|>Y' = [Y, Y']",
    "identity_action": "X|>1_H = 0",
    "wreath_associativity": "((a b) c) = (a (b c)) in G x| H",
    "wreath_inverse": "(g, h)^-1 = (g^-1, g^-1|>h^-1)",
    "hcompose_is_wreath_mul": "(g,h) #0 (g',h') = (g g', g|>h' h)",
    "unit_laws": "1 #1 a = a = a #1 1",
    "vertical_associativity": "(a #1 b) #1 c = a #1 (b #1 c)",
    "horizontal_associativity": "(a #0 b) #0 c = a #0 (b #0 c)",
    "interchange": "(a #0 b) #1 (c #0 d) = (a #1 c) #0 (b #1 d)",
    "interchange_composability": "target(a #0 b) = source(c #0 d)",
    "interchange_identity": "g|>h' h = h [alpha(h^-1) g]|>h'",
    "class_function": "inv(g|>h) = inv(h)",
    "alpha_differential": "d/ds alpha(exp sY) = alpha(Y)",
    "act_Gh_differential": "d/ds g|>exp(sY) = g|>Y",
    "act_gH_differential": "d/ds exp(sX)|>h = X|>h",
    "act_gh_differential": "d/ds exp(sX)|>Y = X|>Y",
    "wreath_ad": "d/ds a exp(s w) a^-1 = Ad_a w",
}


# ---------------------------------------------------------------------------
# transport

def transport_suite(r: Report, spec: StepSpec = StepSpec(128), seed: int = 0, tol: float = 1e-6,
                    order_min: float = 2.0):
    cm, conn, phi, _ = inner_fields(seed)
    A = conn.A
    rho = wavy_path()
    patch = curved_patch()

    def composition():
        whole = holonomy1(A, rho, spec).value
        return _norm(whole - holonomy1(A, rho.restrict(0, 0.37), spec).value
                     @ holonomy1(A, rho.restrict(0.37, 1), spec).value)

    r.add("path composition", "F(rho#rho') = F(rho) F(rho')", composition, tol)
    r.add("path reversal", "F(rho^-1) = F(rho)^-1",
          lambda: _norm(holonomy1(A, rho.reversed(), spec).value @ holonomy1(A, rho, spec).value - np.eye(2)), tol)
    r.add("u decomposition", "u(t,s) = Ad_F u_{s0}(t,s) u(t,s0)",
          lambda: u_decomposition_residual(A, patch, 0.7, 0.8, 0.35, spec), tol)
    r.add("alpha(B) = A-script", "alpha(Bcal_t(s)) = Acal_t(s)",
          lambda: _norm(cm.alpha_algebra(script_B(conn, patch, 0.8, 0.6, spec, cm)) - script_A(A, patch, 0.8, 0.6, spec, fd_step=1e-4)),
          tol)
    gt = random_gauge(np.random.default_rng(seed + 1), 2, cm, amp_g=0.5, amp_phi=0.3, freq=0.8)
    moved = apply_gauge(conn, gt, cm)
    r.add("gauge target matching", "alpha(h^-1) F_A g(y) = g(x) F_A'",
          lambda: gauge_target_residual(A, moved.A, gt.g, gt.phi, rho, spec, cm), tol)

    def h_composition():
        whole = gauge_transport_h(A, phi, rho, spec, cm).value
        first = gauge_transport_h(A, phi, rho.restrict(0, 0.37), spec, cm)
        second = gauge_transport_h(A, phi, rho.restrict(0.37, 1), spec, cm)
        return _norm(whole - cm.act_GH(first.companion, second.value) @ first.value)

    r.add("gauge transport composition", "h(rho#rho') = F(rho)|>h(rho') h(rho)", h_composition, tol)

    def pair():
        w = wreath_holonomy(A, phi, rho, spec, cm)
        return max(_norm(w.g - holonomy1(A, rho, spec).value), _norm(w.h - gauge_transport_h(A, phi, rho, spec, cm).value))

    r.add("wreath holonomy vs pair", "(F, h) solves one ODE on G x| H", pair, tol)
    r.add("wreath loop cross-check", "pr_H u = h(g-) g~|>h(g+)^-1",
          lambda: wreath_loop_crosscheck(A, phi, patch, 0.7, 0.8, spec, cm), tol)

    # convergence order of F under step halving
    ref = holonomy1(A, rho, StepSpec(1024)).value
    errs = [(1.0 / n, _norm(holonomy1(A, rho, StepSpec(n)).value - ref)) for n in (4, 8, 16, 32)]
    r.add("1-holonomy order", "|F_h - F| = O(h^p), p >= 2", lambda: convergence_order(errs), order_min, above=True)
    errs = [(e, second_variation_check(A, patch, 0.5, 0.5, spec, eps=e, fd_step=1e-4)) for e in (0.04, 0.02, 0.01)]
    r.add("second variation sign", "d_s d_t u = -Ad_F gamma*Omega^A, O(eps^2)",
          lambda: convergence_order(errs), 1.8, above=True)


# ---------------------------------------------------------------------------
# surface

def surface_suite(r: Report, spec: StepSpec = StepSpec(128), seed: int = 0, tol: float = 1e-5, order_min: float = 2.0,
                  cube: bool = True):
    cm, conn, _, gt = inner_fields(seed)
    patch = curved_patch()
    L = local_2_holonomy(conn, patch, spec, cm)
    r.add("surface target matching", "alpha(H^-1) F(row0) F(col1) = F(col0) F(row1)", lambda: L.residual, tol)
    comp = composition_residuals(conn, patch, 0.43, 0.61, spec, cm)
    r.add("horizontal gluing", "H = F(row0_L)|>H_R H_L", lambda: comp["horizontal"], tol)
    r.add("vertical gluing", "H = H_D F(col0_D)|>H_U", lambda: comp["vertical"], tol)
    r.add("alpha(H^-1) = u", "alpha(H(t,s)^-1) = u_A(t,s)",
          lambda: _norm(cm.alpha_group(np.linalg.inv(L.H)) - loop_holonomy_u(conn.A, patch, 1.0, 1.0, spec)), tol)
    if cube:
        r.add("gauge cube", "g(x0)|>H' = h+^-1 H h-", lambda: gauge_cube_residual(conn, gt, patch, spec, cm), tol)
    sc = inner_three_charts()
    b = sc.bundle

    def path():
        return ParamPath(lambda t: np.stack([0.3 + 0.2 * t, -0.5 + 0.4 * t + 0.05 * np.sin(3 * t)], -1), (0.0, 1.0),
                         lambda t: np.stack([0.2 + 0 * t, 0.4 + 0.15 * np.cos(3 * t)], -1))

    def cylinders():
        return max(cylinder_residual(b, i, j, k, path(), spec, b.cm)
                   for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1), (0, 2, 1)])

    r.add("transition cylinder", "g_ij|>psi_jk = psi_ij^-1 (F_i|>f(y)) psi_ik f(x)^-1", cylinders, tol)
    errs = [(1.0 / n, local_2_holonomy(conn, patch, StepSpec(n), cm).residual) for n in (8, 16, 32)]
    r.add("surface order", "target mismatch = O(h^p), p >= 2", lambda: convergence_order(errs), order_min, above=True)


# ---------------------------------------------------------------------------
# bundle

def bundle_suite(r: Report, seed: int = 0, analytic_tol: float = 1e-10, fd_tol: float = 1e-6):
    sc = inner_three_charts()
    b = sc.bundle
    coc = verify_cocycle(b, seed=seed)
    r.add("g cocycle", "alpha(f_ijk^-1) g_ij g_jk = g_ik", lambda: coc["g_cocycle"], analytic_tol)
    r.add("f cocycle", "g_ij|>f_jkl f_ijl = f_ijk f_ikl", lambda: coc["f_cocycle"], analytic_tol)
    r.add("f cocycle rearranged", "f_lkj f_lij^-1 = f_lik^-1 g_li|>f_ikj", lambda: coc["rearranged"], analytic_tol)
    r.add("normalization", "f_iji = 1", lambda: coc["normalization"], analytic_tol)
    comp = verify_compatibility(b, seed=seed)
    r.add("gauge law A", "A_j = Ad_{g^-1}(A_i - alpha(a) + dg g^-1)", lambda: comp["gauge_law_A"], fd_tol)
    r.add("gauge law B", "B_j = g^-1|>(B_i - da - A|>a + a^a)", lambda: comp["gauge_law_B"], fd_tol)
    r.add("a compatibility", "a_ij + g|>a_jk = f a_ik f^-1 + (A|>f) f^-1 + df f^-1", lambda: comp["compatibility"], fd_tol)
    r.add("tetrahedron", "both composites of the tetrahedron agree", lambda: tetrahedron_residual(b, seed=seed),
          analytic_tol)
    bad_f = perturb(b, "f", 1e-3, seed, pair=(0, 1, 2))
    r.add("perturbed f flagged", "g_ij|>f_jkl f_ijl != f_ijk f_ikl",
          lambda: verify_cocycle(bad_f, seed=seed)["f_cocycle"], 1e-5, above=True)
    bad_a = perturb(b, "a", 1e-3, seed, pair=(0, 2))
    r.add("perturbed a flagged", "a-compatibility broken",
          lambda: verify_compatibility(bad_a, seed=seed)["compatibility"], 1e-5, above=True)
    sg = sphere_gerbe(1)
    gl = verify_compatibility(sg.bundle, seed=seed)
    r.add("sphere gauge law B", "B_S = B_N - da_NS", lambda: gl["gauge_law_B"], fd_tol)
    zb = verify_compatibility(perturb(sg.bundle, "B_zero", pair=1), seed=seed)
    r.add("sphere B_S zeroed flagged", "B_S = 0 breaks B_S = B_N - da_NS", lambda: zb["gauge_law_B"], 1e-3, above=True)


# ---------------------------------------------------------------------------
# scenario runners

def _hol_outputs(r: Report, H, cm, sphere: bool = False, prefix="hol"):
    r.output(prefix, H.hol)
    r.output(prefix + "_invariant", np.asarray(cm.equivalence_invariant(H.hol)))
    if sphere:
        r.output(prefix + "_alpha_residual", sphere_kernel_check(H, cm))


def _glue_or_none(r, name, anchor, tol, loop, bundle, mesh, assign, spec, cm, **kw):
    box = {}

    def run():
        box["H"] = glue(loop, bundle, mesh, assign, spec, cm, **kw)
        return box["H"].max_mismatch

    r.add(name, anchor, run, tol, errors=PIPELINE_ERRORS)
    return box.get("H")


def run_trivial(r: Report, spec: StepSpec = StepSpec(64), tol: float = 1e-12):
    sc = trivial_scenario()
    mesh, assign = build_mesh(sc.loop, sc.bundle.atlas, sc.initial)
    H = glue(sc.loop, sc.bundle, mesh, assign, spec, sc.cm)
    r.add("trivial Hol", "Hol = 1_H", lambda: _norm(H.hol - sc.cm.identity_H), tol)
    r.add("trivial cocycle", "g = I, f = 1", lambda: max(verify_cocycle(sc.bundle).values()), tol)
    _hol_outputs(r, H, sc.cm)


def run_abelian_stokes(r: Report, spec: StepSpec = StepSpec(64), tol: float = 1e-6, seed: int = 0):
    sc = abelian_stokes(seed)
    conn = sc.bundle.connections[0]
    patch = sc.loop.patch()
    L = local_2_holonomy(conn, patch, spec, sc.cm)
    r.add("H vs double quadrature", "H = exp(int int gamma*B)", lambda: abs(L.H[0, 0] - sc.oracles["surface"]()), tol)
    r.add("u vs circulation", "u = exp(oint A)",
          lambda: abs(loop_holonomy_u(conn.A, patch, 1.0, 1.0, spec)[0, 0] - sc.oracles["loop"]()), tol)
    sub = patch.sub(0.0, 0.6, 0.0, 0.45)
    Ls = local_2_holonomy(conn, sub, spec, sc.cm)
    r.add("H vs quadrature, sub-rectangle", "H = exp(int int gamma*B)",
          lambda: abs(Ls.H[0, 0] - sc.oracles["surface"](((0.0, 0.6), (0.0, 0.45)))), tol)
    r.add("u vs circulation, sub-rectangle", "u = exp(oint A)",
          lambda: abs(loop_holonomy_u(conn.A, patch, 0.6, 0.45, spec)[0, 0] - sc.oracles["loop"](0.6, 0.45)), tol)
    r.output("H", L.H)


def _dual_cell(loop, atlas, mesh, assign, rows, cols=None):
    """First cell (row by row) whose image also lies in a second chart, with that chart."""
    N, _ = mesh.shape
    for b in rows:
        for a in (range(N) if cols is None else cols):
            others = [c for c in candidate_charts(loop, atlas, mesh, a, b) if c != assign[a, b]]
            if others:
                return (a, b), others[0]
    return None, None


def _compared(r: Report, tag: str, what: str, anchors, tol: float, fn, raw: bool = True):
    """Record the class distance of ``fn()`` and, optionally, its raw distance."""
    box = {}

    def cls():
        box["c"] = fn()
        return box["c"].class_distance

    r.add(f"{tag}: {what}", anchors[0], cls, tol, errors=PIPELINE_ERRORS)
    if raw and "c" in box:
        r.add(f"{tag}: {what} raw", anchors[1], lambda: box["c"].raw_distance, tol)
    return box.get("c")


def theorem_battery(r: Report, sc, spec: StepSpec = StepSpec(64), tol: float = 1e-5, first_row: bool = True,
                    interior=None, workers: int = 1):
    """Refinement, reassignment and order invariance of Hol in H/[G,H] for one scenario.

    Class distances are the invariant of Theorem-level interest.  Where the
    class test is weak (det for the inner module) the raw distance is
    recorded too, except for reassignments that move Hol by an element of
    [G,H] by design (closure column and first/last row).  For the inner
    module that element is not a conjugate of Hol, so a similarity test
    would reject it.
    """
    cm, b, loop = sc.cm, sc.bundle, sc.loop
    mesh, assign = build_mesh(loop, b.atlas, sc.initial)
    tag = sc.name
    H = _glue_or_none(r, f"{tag}: gluing composability", "target(a) = source(b) at every #1", 1e-4,
                      loop, b, mesh, assign, spec, cm, workers=workers)
    if H is None:
        return None
    kw = dict(workers=workers)
    N, M = mesh.shape
    _compared(r, tag, "refinement", ("[Hol] = [Hol on 2x mesh]", "Hol = Hol on 2x mesh"), tol,
              lambda: invariance_under_refinement(loop, b, mesh, assign, spec, cm, **kw))
    cell, new = interior if interior is not None else _dual_cell(loop, b.atlas, mesh, assign, range(1, M - 1),
                                                                 range(1, N - 1))
    if cell is not None:
        _compared(r, tag, f"interior reassignment {cell}->{new}",
                  ("[Hol] independent of chart choice", "Hol independent of interior chart choice"), tol,
                  lambda: invariance_under_reassignment(loop, b, mesh, assign, cell, new, spec, cm, **kw))
    col, newc = _dual_cell(loop, b.atlas, mesh, assign, range(M), [0])
    if col is not None:
        cells = [(0, k) for k in range(M) if newc in candidate_charts(loop, b.atlas, mesh, 0, k)]
        if ((0, 0) in cells) != ((0, M - 1) in cells):
            cells = [c for c in cells if 0 < c[1] < M - 1]
        if cells:
            _compared(r, tag, f"closure-column reassignment ({len(cells)} cells)->{newc}",
                      ("[Hol] independent of closure column chart", ""), tol,
                      lambda: invariance_under_reassignment(loop, b, mesh, assign, cells, newc, spec, cm, **kw),
                      raw=False)
    if first_row:
        (a0, _), new0 = _dual_cell(loop, b.atlas, mesh, assign, [0], range(1, N - 1))
        box = {}

        def first():
            box["c"] = invariance_under_reassignment(loop, b, mesh, assign, [(a0, 0), (a0, M - 1)], new0, spec, cm,
                                                     **kw)
            return box["c"].class_distance

        r.add(f"{tag}: first-row reassignment class", "[Hol] = [Hol'] in H/[G,H]", first, tol, errors=PIPELINE_ERRORS)
        if "c" in box:
            r.add(f"{tag}: first-row reassignment raw separation", "Hol != Hol' before the quotient",
                  lambda: box["c"].raw_distance, 1e-3, above=True)
    _compared(r, tag, "column-major order", ("[Hol_rows] = [Hol_columns]", "Hol_rows = Hol_columns"), tol,
              lambda: order_comparison(loop, b, mesh, assign, spec, cm, **kw))
    return H


def run_inner_annulus(r: Report, spec: StepSpec = StepSpec(64), tol: float = 1e-5, workers: int = 1,
                      local: bool = True, seed: int = 0):
    sc = inner_annulus(7 + seed)
    H = theorem_battery(r, sc, spec, tol, first_row=True, workers=workers)
    if local:
        b = sc.bundle
        r.add("inner-annulus: cocycle", "alpha(f^-1) g_ij g_jk = g_ik", lambda: max(verify_cocycle(b).values()), 1e-10)
        r.add("inner-annulus: compatibility", "A_j, B_j = gauge transform of A_i, B_i by (g_ij, a_ij)",
              lambda: max(verify_compatibility(b).values()), 1e-6)
        rho = ParamPath(lambda t: np.stack([0.2 * np.cos(2 * t) - 0.1, 1.3 + 0.3 * t], -1))
        r.add("inner-annulus: cylinder", "g_ij|>psi_jk = psi_ij^-1 (F_i|>f(y)) psi_ik f(x)^-1",
              lambda: max(cylinder_residual(b, i, j, k, rho, spec, b.cm) for (i, j, k) in [(0, 1, 0), (1, 0, 1), (0, 1, 1)]),
              tol)
    if H is not None:
        _hol_outputs(r, H, sc.cm)
    return H


def run_sphere_gerbe(r: Report, flux: float = 1, spec: StepSpec = StepSpec(64), tol: float = 1e-5, workers: int = 1):
    sc = sphere_gerbe(flux)
    H = theorem_battery(r, sc, spec, tol, first_row=False, workers=workers)
    if H is None:
        return None
    r.add("sphere-gerbe: kernel", "alpha(Hol) = 1_G", lambda: sphere_kernel_check(H, sc.cm), tol)
    r.add("sphere-gerbe: flux quadrature", "Hol = exp(int int gamma*B_N)",
          lambda: abs(H.hol[0, 0] - sc.oracles["flux"]()), tol)
    if float(flux).is_integer():
        r.add("sphere-gerbe: closed-form flux", "Hol = exp(2 pi i n deg) = 1",
              lambda: abs(H.hol[0, 0] - sc.oracles["closed_form"]()), tol)
    _hol_outputs(r, H, sc.cm, sphere=True)
    return H


def run_inner_sphere(r: Report, spec: StepSpec = StepSpec(64), tol: float = 1e-5, workers: int = 1, seed: int = 0):
    sc = inner_sphere(3 + seed)
    mesh, assign = build_mesh(sc.loop, sc.bundle.atlas, sc.initial)
    H = _glue_or_none(r, "inner-sphere: gluing composability", "target(a) = source(b) at every #1", 1e-4,
                      sc.loop, sc.bundle, mesh, assign, spec, sc.cm, workers=workers)
    if H is not None:
        r.add("inner-sphere: kernel", "alpha(Hol) = 1_G", lambda: sphere_kernel_check(H, sc.cm), tol)
    return H


def run_reparam_shear(r: Report, spec: StepSpec = StepSpec(128), tol: float = 1e-4, workers: int = 1, seed: int = 0):
    for sc in (sphere_gerbe(1), inner_sphere(3 + seed)):
        r.add(f"{sc.name}: shear reparametrization", "[Hol(gamma)] = [Hol(gamma o Xi)]",
              lambda sc=sc: reparametrization_residual(sc.loop, SHEAR["map"], sc.bundle, spec, sc.cm,
                                                       Xi_jacobian=SHEAR["jacobian"], workers=workers).class_distance,
              tol, errors=PIPELINE_ERRORS)
    sc = sphere_gerbe(1)

    def reversed_rejected():
        try:
            reparametrization_residual(sc.loop, lambda t, s: (1 - t, s), sc.bundle, spec, sc.cm)
        except ValueError:
            return 0.0
        return 1.0

    r.add("orientation-reversing Xi rejected", "d Xi_1/dt' > 0 and d Xi_2/ds' > 0", reversed_rejected, 0.5)


def run_refinement_sweep(r: Report, spec: StepSpec = StepSpec(64), tol: float = 1e-5, levels: int = 3,
                         workers: int = 1, seed: int = 0):
    """Hol on 4x4, 8x8, 16x16, ... meshes with inherited charts, each against the coarsest."""
    sc = inner_annulus(7 + seed)
    mesh, assign = build_mesh(sc.loop, sc.bundle.atlas, (4, 4))
    base = glue(sc.loop, sc.bundle, mesh, assign, spec, sc.cm, workers=workers)
    for lvl in range(1, levels):
        mesh, assign = mesh.refined(), refine_assignment(assign)
        H = glue(sc.loop, sc.bundle, mesh, assign, spec, sc.cm, workers=workers)
        c = compare(base, H, sc.cm)
        n = mesh.shape[0]
        r.add(f"refinement {n}x{n} class", "[Hol] = [Hol refined]", lambda c=c: c.class_distance, tol)
        r.add(f"refinement {n}x{n} raw", "Hol = Hol refined", lambda c=c: c.raw_distance, tol)


def run_sweep(r: Report, spec: StepSpec = StepSpec(16), levels: int = 3, order_min: float = 2.0, workers: int = 1,
              seed: int = 0):
    """Step-halving sweep of the glued holonomy on inner-annulus and sphere-gerbe(0.3)."""
    for sc in (inner_annulus(7 + seed), sphere_gerbe(0.3)):
        mesh, assign = build_mesh(sc.loop, sc.bundle.atlas, sc.initial)
        specs = [StepSpec(spec.steps_per_unit * 2 ** k) for k in range(levels + 1)]
        hols = [glue(sc.loop, sc.bundle, mesh, assign, s, sc.cm, tol=None, workers=workers).hol for s in specs]
        ref = hols[-1]
        errs = [(1.0 / s.steps_per_unit, _norm(h - ref)) for s, h in zip(specs[:-1], hols[:-1])]
        for (h, e) in errs:
            r.output(f"{sc.name}: |Hol - Hol_ref| at {int(round(1 / h))} steps", e)
        r.add(f"{sc.name}: Hol step order", "|Hol_h - Hol| = O(h^p), p >= 2",
              lambda errs=errs: convergence_order(errs), order_min, above=True)


def run_verify(r: Report, spec: StepSpec = StepSpec(128), seed: int = 0, samples: int = 200):
    algebra_suite(r, samples, seed)
    transport_suite(r, spec, seed)
    surface_suite(r, spec, seed)
    bundle_suite(r, seed)

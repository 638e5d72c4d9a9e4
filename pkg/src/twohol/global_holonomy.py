"""Global 2-holonomy of a surface by gluing chart-local pieces.

The parameter square is cut into cells, each assigned a chart.  The glued
2-arrow is built by sweeping a path of 1-arrows across the square: the
path starts as the source boundary (the row s = 0 followed by the edge
t = 1) and ends as the target boundary (the edge t = 0 followed by the
row s = 1).  A path is a list of segments,

    ('E', chart, kind, a, b)   F_{A_chart} along edge H(a, b) or V(a, b)
    ('T', (a, b), i, j)        g_ij at the image of grid vertex (a, b)

where H(a, b) runs along s = s_b from t_a to t_{a+1} and V(a, b) along
t = t_a from s_b to s_{b+1}.  Every move replaces a contiguous window of
the path by another one carrying the same 1-holonomy up to a 2-arrow
(a cell, a transition strip or a cocycle filler); the move is whiskered
by the product P of the path before the window and composed vertically,

    acc_h <- acc_h . (P |> h_move).

After each move alpha(acc_h^-1) (source product) must equal the current
path product; a violation aborts with the label of the offending move.

With ``closure`` the columns wrap around: a phantom column N uses the
charts of column 0 along gamma(1, .) = gamma(0, .), and the transition
from the last column back to the first closes every row.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .algebra import CrossedModule, WreathElement, _norm
from .bundle import Atlas, BundleData
from .numerics import StepSpec
from .path_transport import ChartError, ParamPath, SurfacePatch, holonomy1
from .surface_transport import local_2_holonomy


class GluingError(RuntimeError):
    def __init__(self, label: str, mismatch: float):
        super().__init__(f"gluing broke at {label}: mismatch {mismatch:.3e}")
        self.label = label
        self.mismatch = mismatch


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class SurfaceLoop:
    """gamma: [0, 1]^2 -> R^n, a loop in loop space (sphere when the rows s = 0, 1 are a point)."""
    map: Callable
    jacobian: Optional[Callable] = None
    sphere: bool = False
    fd_h: float = 1e-6

    def patch(self) -> SurfacePatch:
        return SurfacePatch(self.map, ((0.0, 1.0), (0.0, 1.0)), self.jacobian, fd_h=self.fd_h)

    def point(self, t, s):
        return self.patch().point(t, s)

    def closure_residual(self, samples: int = 33) -> Dict[str, float]:
        u = np.linspace(0, 1, samples)
        P = self.patch()
        out = {
            "t_closure": _norm(P.point(0.0, u) - P.point(1.0, u)),
            "s_closure": _norm(P.point(u, 0.0) - P.point(u, 1.0)),
        }
        if self.sphere:
            base = P.point(0.0, 0.0)
            out["sphere"] = max(_norm(P.point(u, 0.0) - base), _norm(P.point(u, 1.0) - base))
        return out


@dataclass(frozen=True)
class Mesh:
    ts: np.ndarray
    ss: np.ndarray

    def __post_init__(self):
        for g in (self.ts, self.ss):
            if len(g) < 2 or np.any(np.diff(g) <= 0):
                raise MeshError("mesh grids must be strictly increasing with at least two nodes")

    @property
    def shape(self):
        return len(self.ts) - 1, len(self.ss) - 1

    @staticmethod
    def uniform(N: int, M: int) -> "Mesh":
        return Mesh(np.linspace(0, 1, N + 1), np.linspace(0, 1, M + 1))

    def refined(self) -> "Mesh":
        def mid(g):
            out = np.empty(2 * len(g) - 1)
            out[::2] = g
            out[1::2] = 0.5 * (g[1:] + g[:-1])
            return out
        return Mesh(mid(self.ts), mid(self.ss))


def _cell_samples(loop: SurfaceLoop, mesh: Mesh, a: int, b: int, sub: int):
    t = np.linspace(mesh.ts[a], mesh.ts[a + 1], sub)
    s = np.linspace(mesh.ss[b], mesh.ss[b + 1], sub)
    T, S = np.meshgrid(t, s, indexing="ij")
    return loop.point(T, S).reshape(sub * sub, -1)


def candidate_charts(loop: SurfaceLoop, atlas: Atlas, mesh: Mesh, a: int, b: int, sub: int = 7):
    pts = _cell_samples(loop, mesh, a, b, sub)
    return [i for i in atlas.ids if np.all(atlas.contains(i, pts))]


def build_mesh(loop: SurfaceLoop, atlas: Atlas, initial: Tuple[int, int] = (8, 8), max_refinements: int = 3,
               sub: int = 7):
    """Uniform mesh and the lowest-id chart assignment, refined until every cell fits.

    The first and last rows of every column get the same chart.
    """
    N, M = initial
    last = None
    for _ in range(max_refinements + 1):
        mesh = Mesh.uniform(N, M)
        assign = np.full((N, M), -1, dtype=int)
        bad = None
        for a in range(N):
            cands = [candidate_charts(loop, atlas, mesh, a, b, sub) for b in range(M)]
            for b in range(M):
                if not cands[b]:
                    bad = (a, b)
                    break
                assign[a, b] = cands[b][0]
            if bad:
                break
            common = [i for i in cands[0] if i in cands[M - 1]]
            if not common:
                bad = (a, 0)
                break
            assign[a, 0] = assign[a, M - 1] = common[0]
        if bad is None:
            return mesh, assign
        last = bad
        N, M = 2 * N, 2 * M
    raise MeshError(f"cell {last} of the {N // 2}x{M // 2} mesh is not inside any chart after {max_refinements} refinements")


def refine_assignment(assign: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(assign, 2, axis=0), 2, axis=1)


@dataclass
class GlobalHolonomy:
    arrow: WreathElement
    target: np.ndarray
    mesh: Mesh
    assignment: np.ndarray
    spec: StepSpec
    invariant: np.ndarray
    max_mismatch: float
    moves: int
    order: str = "row"

    @property
    def hol(self) -> np.ndarray:
        return self.arrow.h

    @property
    def source(self) -> np.ndarray:
        return self.arrow.g


class _Gluer:
    def __init__(self, loop, bundle, mesh, assign, spec, cm, closure, tol, workers):
        self.loop, self.bundle, self.mesh, self.spec, self.cm = loop, bundle, mesh, spec, cm
        self.assign = np.asarray(assign, dtype=int)
        self.N, self.M = mesh.shape
        if self.assign.shape != (self.N, self.M):
            raise MeshError(f"assignment shape {self.assign.shape} does not match the mesh {mesh.shape}")
        self.closure = closure
        self.tol = tol
        self.workers = workers
        self.patch = loop.patch()
        self._edges = {}
        self._g = {}
        self.max_mismatch = 0.0
        self.moves = 0

    def c(self, a, b):
        if a == self.N and self.closure:
            return int(self.assign[0, b])
        return int(self.assign[a, b])

    def vertex_point(self, v):
        a, b = v
        return self.patch.point(self.mesh.ts[a], self.mesh.ss[b])

    def edge_path(self, kind, a, b) -> ParamPath:
        ts, ss = self.mesh.ts, self.mesh.ss
        if kind == "H":
            return self.patch.row(ss[b], ts[a], ts[a + 1])
        return self.patch.column(ts[a], ss[b], ss[b + 1])

    def value(self, seg):
        if seg[0] == "E":
            key = seg[1:]
            if key not in self._edges:
                chart, kind, a, b = key
                path = replace(self.edge_path(kind, a, b), region=self.bundle.atlas.region(chart), chart=chart)
                self._edges[key] = holonomy1(self.bundle.connections[chart].A, path, self.spec).value
            return self._edges[key]
        _, v, i, j = seg
        if i == j:
            return self.cm.identity_G
        key = (v, i, j)
        if key not in self._g:
            self._g[key] = self.bundle.g(i, j, self.vertex_point(v)[None])[0]
        return self._g[key]

    def product(self, segs):
        out = self.cm.identity_G.copy()
        for s in segs:
            out = out @ self.value(s)
        return out

    # --- 2-arrows of the moves -------------------------------------------
    def cell_h(self, a, b):
        return self._cells[(a, b)].H

    def compute_cells(self):
        keys = [(a, b) for a in range(self.N) for b in range(self.M)]

        def run(key):
            a, b = key
            ch = self.c(a, b)
            p = self.patch.sub(self.mesh.ts[a], self.mesh.ts[a + 1], self.mesh.ss[b], self.mesh.ss[b + 1])
            p = p.with_chart(ch, self.bundle.atlas.region(ch))
            return local_2_holonomy(self.bundle.connections[ch], p, self.spec, self.cm)

        if self.workers and self.workers > 1:
            with ThreadPoolExecutor(self.workers) as ex:
                vals = list(ex.map(run, keys))
        else:
            vals = [run(k) for k in keys]
        self._cells = dict(zip(keys, vals))

    def psi_h(self, i, j, kind, a, b):
        if i == j:
            return self.cm.identity_H
        path = self.edge_path(kind, a, b)
        path = replace(path, region=self.bundle.atlas.overlap(i, j))
        return self.bundle.transition(i, j, path, self.spec).h

    def filler_h(self, v, l, k, i, j):
        p = self.vertex_point(v)[None]
        f = self.bundle.f
        return f(l, k, j, p)[0] @ np.linalg.inv(f(l, i, j, p)[0])

    # --- sweep -------------------------------------------------------------
    def initial_path(self):
        N, M, c = self.N, self.M, self.c
        path = []
        for a in range(N):
            if a > 0:
                path.append(("T", (a, 0), c(a - 1, 0), c(a, 0)))
            path.append(("E", c(a, 0), "H", a, 0))
        col = (lambda b: c(0, b)) if self.closure else (lambda b: c(N - 1, b))
        if self.closure:
            path.append(("T", (N, 0), c(N - 1, 0), c(0, 0)))
        for b in range(M):
            if b > 0:
                path.append(("T", (N, b), col(b - 1), col(b)))
            path.append(("E", col(b), "V", N, b))
        return path

    def final_path(self):
        N, M, c = self.N, self.M, self.c
        path = []
        for b in range(M):
            if b > 0:
                path.append(("T", (0, b), c(0, b - 1), c(0, b)))
            path.append(("E", c(0, b), "V", 0, b))
        for a in range(N):
            if a > 0:
                path.append(("T", (a, M), c(a - 1, M - 1), c(a, M - 1)))
            path.append(("E", c(a, M - 1), "H", a, M))
        if self.closure:
            path.append(("T", (N, M), c(N - 1, M - 1), c(0, M - 1)))
        return path

    def apply(self, src, dst, h, label):
        L = len(src)
        idx = None
        for k in range(len(self.path) - L + 1):
            if self.path[k:k + L] == src:
                idx = k
                break
        if idx is None:
            raise GluingError(f"{label} (window not found on the current path)", math.inf)
        P = self.product(self.path[:idx])
        self.acc = self.acc @ self.cm.act_GH(P, h)
        self.path[idx:idx + L] = dst
        self.moves += 1
        if self.tol is not None:
            lhs = self.cm.alpha_group(np.linalg.inv(self.acc)) @ self.S
            mism = _norm(lhs - self.product(self.path))
            self.max_mismatch = max(self.max_mismatch, mism)
            if mism > self.tol:
                raise GluingError(label, mism)

    def move_cell(self, a, b):
        ch = self.c(a, b)
        self.apply([("E", ch, "H", a, b), ("E", ch, "V", a + 1, b)],
                   [("E", ch, "V", a, b), ("E", ch, "H", a, b + 1)],
                   self.cell_h(a, b), f"cell ({a}, {b})")

    def move_vstrip(self, a, b):
        """Transition across V(a, b) between cells (a-1, b) and (a, b) (a = N is the closure)."""
        i = self.c(a - 1, b)
        j = self.c(a, b)
        h = np.linalg.inv(self.psi_h(i, j, "V", a, b))
        self.apply([("T", (a, b), i, j), ("E", j, "V", a, b)],
                   [("E", i, "V", a, b), ("T", (a, b + 1), i, j)], h, f"vertical strip at V({a}, {b})")

    def move_filler(self, a, b):
        """Cocycle filler at vertex (a, b) with cells (a-1, b-1), (a, b-1), (a-1, b), (a, b)."""
        l, k = self.c(a - 1, b - 1), self.c(a, b - 1)
        i, j = self.c(a - 1, b), self.c(a, b)
        src = [("T", (a, b), l, k), ("T", (a, b), k, j)]
        dst = [("T", (a, b), l, i), ("T", (a, b), i, j)]
        self.apply(src, dst, self.filler_h((a, b), l, k, i, j), f"filler at ({a}, {b})")

    def move_hstrip(self, a, b):
        """Transition across H(a, b) between cells (a, b-1) and (a, b)."""
        l, i = self.c(a, b - 1), self.c(a, b)
        h = self.psi_h(l, i, "H", a, b)
        self.apply([("E", l, "H", a, b), ("T", (a + 1, b), l, i)],
                   [("T", (a, b), l, i), ("E", i, "H", a, b)], h, f"horizontal strip at H({a}, {b})")

    def right_strip(self, a, b):
        # transition on the right edge of column a in row b
        if a + 1 < self.N:
            self.move_vstrip(a + 1, b)
        elif self.closure:
            self.move_vstrip(self.N, b)

    def filler_above(self, a, b):
        if a + 1 < self.N or self.closure:
            self.move_filler(a + 1, b + 1)

    def run(self, order="row"):
        self.compute_cells()
        self.path = self.initial_path()
        self.S = self.product(self.path)
        self.acc = self.cm.identity_H.copy()
        N, M = self.N, self.M
        if order == "row":
            for b in range(M):
                if self.closure:
                    self.move_vstrip(N, b)
                for a in range(N - 1, -1, -1):
                    self.move_cell(a, b)
                    if a > 0:
                        self.move_vstrip(a, b)
                if b < M - 1:
                    for a in range(N - 1, -1, -1):
                        self.filler_above(a, b)
                        self.move_hstrip(a, b + 1)
        elif order == "column":
            for a in range(N - 1, -1, -1):
                for b in range(M):
                    self.right_strip(a, b)
                    self.move_cell(a, b)
                    if b < M - 1:
                        self.filler_above(a, b)
                        self.move_hstrip(a, b + 1)
        else:
            raise ValueError(f"unknown order {order!r}")
        final = self.final_path()
        if self.path != final:
            raise GluingError("end of sweep (path is not the target boundary)", math.inf)
        return self.acc, self.S, self.product(final)


def glue(loop: SurfaceLoop, bundle: BundleData, mesh: Mesh, assignment, spec: StepSpec = StepSpec(),
         cm: Optional[CrossedModule] = None, order: str = "row", closure: bool = True,
         tol: Optional[float] = 1e-4, workers: int = 1) -> GlobalHolonomy:
    """Glue local 2-holonomies, transition 2-arrows and cocycle fillers over the mesh."""
    cm = cm or bundle.cm
    assignment = np.asarray(assignment, dtype=int)
    if closure:
        M = mesh.shape[1]
        if np.any(assignment[:, 0] != assignment[:, M - 1]):
            raise MeshError("first and last rows must use the same chart in every column")
    g = _Gluer(loop, bundle, mesh, assignment, spec, cm, closure, tol, workers)
    acc, S, T = g.run(order)
    return GlobalHolonomy(WreathElement(S, acc), T, mesh, assignment, spec,
                          np.asarray(cm.equivalence_invariant(acc)), g.max_mismatch, g.moves, order)


def equivalent_mod_GH(h1, h2, cm: CrossedModule, tolerance: float = 1e-6) -> bool:
    return cm.class_distance(h1, h2) <= tolerance


@dataclass(frozen=True)
class Comparison:
    class_distance: float
    raw_distance: float
    first: Optional[GlobalHolonomy] = None
    second: Optional[GlobalHolonomy] = None

    def __float__(self):
        return self.class_distance


def compare(x: GlobalHolonomy, y: GlobalHolonomy, cm: CrossedModule) -> Comparison:
    return Comparison(cm.class_distance(x.hol, y.hol), _norm(x.hol - y.hol), x, y)


def invariance_under_refinement(loop, bundle, mesh, assignment, spec=StepSpec(), cm=None, **kw) -> Comparison:
    cm = cm or bundle.cm
    coarse = glue(loop, bundle, mesh, assignment, spec, cm, **kw)
    fine = glue(loop, bundle, mesh.refined(), refine_assignment(np.asarray(assignment)), spec, cm, **kw)
    return compare(coarse, fine, cm)


def reassign(loop, atlas: Atlas, mesh: Mesh, assignment, cells, new_chart: int, sub: int = 7) -> np.ndarray:
    out = np.array(assignment, dtype=int, copy=True)
    cells = [cells] if isinstance(cells, tuple) and len(cells) == 2 and np.isscalar(cells[0]) else list(cells)
    for (a, b) in cells:
        pts = _cell_samples(loop, mesh, a, b, sub)
        if not np.all(atlas.contains(new_chart, pts)):
            raise ChartError(f"chart {new_chart} does not contain the image of cell {(a, b)}")
        out[a, b] = new_chart
    return out


def invariance_under_reassignment(loop, bundle, mesh, assignment, cells, new_chart, spec=StepSpec(), cm=None,
                                  **kw) -> Comparison:
    cm = cm or bundle.cm
    other = reassign(loop, bundle.atlas, mesh, assignment, cells, new_chart)
    x = glue(loop, bundle, mesh, assignment, spec, cm, **kw)
    y = glue(loop, bundle, mesh, other, spec, cm, **kw)
    return compare(x, y, cm)


def order_comparison(loop, bundle, mesh, assignment, spec=StepSpec(), cm=None, **kw) -> Comparison:
    cm = cm or bundle.cm
    x = glue(loop, bundle, mesh, assignment, spec, cm, order="row", **kw)
    y = glue(loop, bundle, mesh, assignment, spec, cm, order="column", **kw)
    return compare(x, y, cm)


def compose_reparametrization(loop: SurfaceLoop, Xi: Callable, Xi_jacobian: Optional[Callable] = None) -> SurfaceLoop:
    """gamma o Xi.  With Xi_jacobian(t, s) -> ((dXi1/dt, dXi1/ds), (dXi2/dt, dXi2/ds)) tangents use the chain rule."""
    P = loop.patch()

    def m(t, s):
        u, v = Xi(t, s)
        return P.point(u, v)

    jac = None
    if Xi_jacobian is not None and loop.jacobian is not None:
        def jac(t, s):
            u, v = Xi(t, s)
            gt, gs = P.tangents(u, v)
            (ut, us), (vt, vs) = Xi_jacobian(t, s)
            ut, us, vt, vs = (np.asarray(x, float)[..., None] for x in (ut, us, vt, vs))
            return gt * ut + gs * vt, gt * us + gs * vs
    return SurfaceLoop(m, jac, loop.sphere, loop.fd_h)


def check_monotone(Xi: Callable, samples: int = 33, h: float = 1e-6) -> float:
    """Smallest of dXi1/dt and dXi2/ds over interior samples; also checks Xi2 ignores t.

    Both derivatives may vanish on the boundary of the square (a smoothstep
    in s does), so only interior points are inspected.
    """
    u = np.linspace(0, 1, samples + 2)[1:-1]
    T, S = np.meshgrid(u, u, indexing="ij")
    a1, _ = Xi(T + h, S)
    a0, _ = Xi(T - h, S)
    _, b1 = Xi(T, S + h)
    _, b0 = Xi(T, S - h)
    _, c1 = Xi(T + h, S)
    _, c0 = Xi(T - h, S)
    dt = (np.asarray(a1) - np.asarray(a0)) / (2 * h)
    ds = (np.asarray(b1) - np.asarray(b0)) / (2 * h)
    cross = np.max(np.abs(np.asarray(c1) - np.asarray(c0))) / (2 * h)
    if cross > 1e-6:
        raise ValueError(f"second component of the reparametrization depends on t (slope {cross:.3e})")
    return float(min(dt.min(), ds.min()))


def reparametrization_residual(loop: SurfaceLoop, Xi: Callable, bundle: BundleData, spec=StepSpec(), cm=None,
                               initial=(8, 8), Xi_jacobian=None, max_refinements: int = 3, **kw) -> Comparison:
    cm = cm or bundle.cm
    slope = check_monotone(Xi)
    if slope <= 0:
        raise ValueError(f"reparametrization is not orientation preserving (min slope {slope:.3e})")
    other = compose_reparametrization(loop, Xi, Xi_jacobian)
    gap = max(other.closure_residual().values())
    if gap > 1e-8:
        raise ValueError(f"reparametrized surface is no longer a loop of loops (closure gap {gap:.3e})")
    mesh, assign = build_mesh(loop, bundle.atlas, initial, max_refinements)
    x = glue(loop, bundle, mesh, assign, spec, cm, **kw)
    mesh2, assign2 = build_mesh(other, bundle.atlas, initial, max_refinements)
    y = glue(other, bundle, mesh2, assign2, spec, cm, **kw)
    return compare(x, y, cm)


def sphere_kernel_check(hol: GlobalHolonomy, cm: CrossedModule) -> float:
    return _norm(cm.alpha_group(hol.hol) - cm.identity_G)


def boundary_check(hol: GlobalHolonomy, loop: SurfaceLoop, bundle: BundleData, spec=StepSpec()) -> float:
    """Source and target products against direct transports of the outer boundary.

    Only meaningful when the whole boundary lies in one chart; returns the
    larger of the two mismatches.
    """
    ch = int(hol.assignment[0, 0])
    A = bundle.connections[ch].A
    P = loop.patch()
    bottom = holonomy1(A, P.row(0.0), spec).value
    right = holonomy1(A, P.column(1.0), spec).value
    left = holonomy1(A, P.column(0.0), spec).value
    top = holonomy1(A, P.row(1.0), spec).value
    return max(_norm(hol.source - bottom @ right), _norm(hol.target - left @ top))

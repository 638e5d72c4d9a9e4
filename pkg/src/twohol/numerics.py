"""Fixed-step integrators, quadrature and finite-difference helpers.

Every transport in the package is a linear matrix ODE of the form
F' = F X(t) or F' = X(t) F.  The solvers here work on *sampled* generators:
a generator is evaluated once on the half-step grid (the nodes an RK4 or
explicit-midpoint step needs) and the stepping loop is pure matrix algebra.
Leading batch axes are carried through untouched, so many rows of a surface
patch can be transported in one sweep.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

METHODS = ("rk4", "midpoint")


class NonFiniteError(FloatingPointError):
    """Raised when an integrator produces NaN or Inf."""

    def __init__(self, time: float):
        super().__init__(f"non-finite value produced at t={time:.6g}")
        self.time = time


@dataclass(frozen=True)
class StepSpec:
    """Resolution of every fixed-step computation.

    steps_per_unit is the number of steps per unit of parameter length.
    Step counts are rounded up to an even number (at least 2) so that the
    node grid of a row always supports composite Simpson quadrature.
    ``hook`` is an optional per-step map applied to the state, meant for
    re-orthonormalization on orthogonal or unitary groups.
    """

    steps_per_unit: int = 64
    method: str = "rk4"
    hook: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if int(self.steps_per_unit) != self.steps_per_unit or self.steps_per_unit < 1:
            raise ValueError(f"steps_per_unit must be a positive integer, got {self.steps_per_unit}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")

    def count(self, length: float) -> int:
        n = math.ceil(self.steps_per_unit * abs(length) - 1e-9)
        n = max(n, 2)
        return n + (n % 2)

    def halved(self) -> "StepSpec":
        return StepSpec(self.steps_per_unit * 2, self.method, self.hook)


def _check_finite(x: np.ndarray, time: float):
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(time)


def propagate(gens: np.ndarray, side: str, initial: np.ndarray, h: float,
              method: str = "rk4", t0: float = 0.0,
              hook: Optional[Callable] = None) -> np.ndarray:
    """Step a linear matrix ODE through pre-sampled generators.

    gens has shape (2n+1, ..., d, d): the generator on the half-step grid
    t0 + j*h/2.  Returns the solution on the full grid, shape (n+1, ..., d, d).
    side='right' solves F' = F X, side='left' solves F' = X F.
    """
    gens = np.asarray(gens)
    m = gens.shape[0]
    if m % 2 != 1:
        raise ValueError("generator samples must live on a half-step grid (odd count)")
    n = (m - 1) // 2
    F = np.broadcast_to(initial, np.broadcast_shapes(np.shape(initial), gens.shape[1:])).copy()
    out = np.empty((n + 1,) + F.shape, dtype=np.result_type(F, gens))
    out[0] = F
    if side == "right":
        mul = lambda a, b: a @ b
    elif side == "left":
        mul = lambda a, b: b @ a
    else:
        raise ValueError(f"side must be 'right' or 'left', got {side!r}")
    for i in range(n):
        X0, Xm, X1 = gens[2 * i], gens[2 * i + 1], gens[2 * i + 2]
        if method == "rk4":
            k1 = mul(F, X0)
            k2 = mul(F + 0.5 * h * k1, Xm)
            k3 = mul(F + 0.5 * h * k2, Xm)
            k4 = mul(F + h * k3, X1)
            F = F + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        elif method == "midpoint":
            k1 = mul(F, X0)
            F = F + h * mul(F + 0.5 * h * k1, Xm)
        else:
            raise ValueError(f"unknown method {method!r}")
        if hook is not None:
            F = hook(F)
        _check_finite(F, t0 + (i + 1) * h)
        out[i + 1] = F
    return out


def half_grid(a: float, b: float, n: int) -> np.ndarray:
    return np.linspace(a, b, 2 * n + 1)


def integrate_linear_matrix_ode(rhs: Callable[[float], np.ndarray], side: str,
                                initial: np.ndarray, interval: Tuple[float, float],
                                spec: StepSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Solve F' = F rhs(t) (side='right') or F' = rhs(t) F (side='left').

    Returns (times, values) on the step grid, endpoints included.  The
    interval may be reversed (b < a); the solver then steps backwards.
    """
    a, b = float(interval[0]), float(interval[1])
    initial = np.asarray(initial)
    if a == b:
        return np.array([a]), initial[None].copy()
    n = spec.count(b - a)
    h = (b - a) / n
    ts = half_grid(a, b, n)
    gens = np.stack([np.broadcast_to(np.asarray(rhs(t)), initial.shape) for t in ts])
    bad = ~np.isfinite(gens).reshape(len(ts), -1).all(axis=1)
    if bad.any():
        raise NonFiniteError(float(ts[np.argmax(bad)]))
    values = propagate(gens, side, initial, h, spec.method, t0=a, hook=spec.hook)
    return ts[::2], values


def simpson_weights(nodes: int, length: float) -> np.ndarray:
    """Composite Simpson weights for odd node counts, trapezoid for even."""
    if nodes < 2:
        raise ValueError("need at least 2 nodes")
    dx = length / (nodes - 1)
    w = np.empty(nodes)
    if nodes % 2 == 1:
        w[:] = 2.0
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        return w * dx / 3.0
    w[:] = 1.0
    w[0] = w[-1] = 0.5
    return w * dx


def composite_line_integral(values: Callable[[float], np.ndarray], t: float, nodes: int) -> np.ndarray:
    """Entrywise quadrature of int_0^t values(tau) dtau on equispaced nodes."""
    taus = np.linspace(0.0, t, nodes)
    samples = np.stack([np.asarray(values(tau)) for tau in taus])
    w = simpson_weights(nodes, t)
    return np.tensordot(w, samples, axes=(0, 0))


def _tangent(surface, t, s, axis, h, domain):
    # second order in h everywhere; one-sided near the edge of the domain
    lo, hi = domain[axis]
    x = (t, s)[axis]

    def at(dx):
        return np.asarray(surface(t + dx, s) if axis == 0 else surface(t, s + dx), dtype=float)

    if x - h >= lo - 1e-15 and x + h <= hi + 1e-15:
        return (at(h) - at(-h)) / (2 * h), False
    if x - h < lo - 1e-15:
        return (-3 * at(0.0) + 4 * at(h) - at(2 * h)) / (2 * h), True
    return (3 * at(0.0) - 4 * at(-h) + at(-2 * h)) / (2 * h), True


def finite_difference_pullback(surface: Callable, field, at: Tuple[float, float], direction: str,
                               h: float = 1e-5,
                               domain: Tuple[Tuple[float, float], Tuple[float, float]] = ((0.0, 1.0), (0.0, 1.0))):
    """Pull a form back along surface(t, s) using difference-quotient tangents.

    direction is 'dt' or 'ds' for a 1-form and 'dt_ds' for a 2-form.
    Returns (value, clamped) where clamped tells whether a one-sided stencil
    had to be used because the central one left the parameter square.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    t, s = at
    p = np.asarray(surface(t, s), dtype=float)
    if direction == "dt":
        v, c = _tangent(surface, t, s, 0, h, domain)
        return field(p, v), c
    if direction == "ds":
        v, c = _tangent(surface, t, s, 1, h, domain)
        return field(p, v), c
    if direction == "dt_ds":
        u, c1 = _tangent(surface, t, s, 0, h, domain)
        v, c2 = _tangent(surface, t, s, 1, h, domain)
        return field(p, u, v), c1 or c2
    raise ValueError(f"unknown direction {direction!r}")


def fd_gradient(func: Callable[[np.ndarray], np.ndarray], p: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central derivative of a point field along each axis.

    p has shape (..., n); the result stacks d func / d x^k on a new axis
    inserted right after the batch axes, shape (..., n, *value_shape).
    """
    p = np.asarray(p, dtype=float)
    n = p.shape[-1]
    parts = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        d = (-func(p + 2 * e) + 8 * func(p + e) - 8 * func(p - e) + func(p - 2 * e)) / (12 * h)
        parts.append(d)
    return np.stack(parts, axis=p.ndim - 1)


def convergence_order(errors: Sequence[Tuple[float, float]], floor: float = 1e-14) -> float:
    """Least-squares slope of log(residual) against log(step).

    Samples whose residual is at or below ``floor`` are discarded as
    round-off.  If fewer than two samples remain the result is ``math.inf``,
    meaning "converged below floor".
    """
    pts = sorted(((float(h), float(r)) for h, r in errors), reverse=True)
    if len(pts) < 3:
        raise ValueError("need at least 3 samples")
    hs = [h for h, _ in pts]
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise ValueError("steps must be strictly decreasing")
    keep = [(h, r) for h, r in pts if r > floor]
    if len(keep) < 2:
        return math.inf
    x = np.log([h for h, _ in keep])
    y = np.log([r for _, r in keep])
    slope = np.polyfit(x, y, 1)[0]
    return float(slope)


def describe_order(order: float) -> str:
    return "converged below floor" if math.isinf(order) else f"{order:.3f}"

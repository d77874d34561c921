"""Parallel transport and cost-adjustment flows.

Two realisations of transport live here:

* the scalar case, where a connection ``A`` on the line transports a value
  ``x`` from ``p`` to ``q`` by solving ``f' + A(p + t) f = 0``;
* cost adjustments, increasing maps of the positive half-line indexed by a
  pair of times.  Those generated by a time-dependent vector field
  ``v(t, c)`` form a one-parameter group under composition.

All integration uses fixed-step classical Runge-Kutta so results are
reproducible bit for bit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize.elementwise import find_root

from .core import DEFAULT_TOL, CrossSection, UtilityFunction
from .errors import FlowEscape, NonMonotone, TimeMismatch

DEFAULT_STEPS = 1000  # RK4 steps per unit time
OVERFLOW_GUARD = 1e200
TIME_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Connection1D:
    """A connection on the real line, given as a function of position."""

    A: Callable[[float], float]

    def __call__(self, x: float) -> float:
        value = float(self.A(x))
        if not math.isfinite(value):
            raise ValueError(f"connection is not finite at x={x}")
        return value


def transport_1d(A, p: float, q: float, x: float, steps: int = DEFAULT_STEPS) -> float:
    """Transport ``x`` from ``p`` to ``q >= p`` along the connection ``A``.

    Integrates ``f'(t) = -A(p + t) f(t)``, ``f(0) = x`` over ``[0, q - p]``
    with ``steps`` RK4 steps.
    """
    if not isinstance(A, Connection1D):
        A = Connection1D(A)
    if q < p:
        raise ValueError(f"transport runs forward only: q={q} < p={p}")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    f = float(x)
    if q == p:
        return f
    h = (q - p) / steps
    for k in range(steps):
        t = p + k * h
        k1 = -A(t) * f
        k2 = -A(t + 0.5 * h) * (f + 0.5 * h * k1)
        k3 = -A(t + 0.5 * h) * (f + 0.5 * h * k2)
        k4 = -A(t + h) * (f + h * k3)
        f += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return f


@dataclass(frozen=True, eq=False)
class CostGenerator:
    """Time-dependent vector field ``v(t, c)`` on positive costs.

    ``v`` must act elementwise on an array of costs.  Its flow is the family
    of cost adjustments the generator induces.
    """

    v: Callable[[float, np.ndarray], np.ndarray]
    t_min: float = -math.inf
    t_max: float = math.inf
    label: Optional[str] = None

    def __call__(self, t: float, c) -> np.ndarray:
        return np.asarray(self.v(t, np.asarray(c, dtype=float)), dtype=float)

    def covers(self, t_a: float, t_b: float) -> bool:
        lo, hi = min(t_a, t_b), max(t_a, t_b)
        return self.t_min - TIME_TOL <= lo and hi <= self.t_max + TIME_TOL

    def lipschitz_estimate(self, t: float, c_lo: float, c_hi: float, num: int = 64) -> float:
        """Largest sampled difference quotient of ``v(t, .)`` on ``[c_lo, c_hi]``."""
        c = np.geomspace(c_lo, c_hi, num)
        return float(np.max(np.abs(np.diff(self(t, c)) / np.diff(c))))


def _rk4_step(v, t, c, h):
    k1 = v(t, c)
    k2 = v(t + 0.5 * h, c + 0.5 * h * k1)
    k3 = v(t + 0.5 * h, c + 0.5 * h * k2)
    k4 = v(t + h, c + h * k3)
    return c + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _guarded_step(v, t, c, h, depth=0):
    with np.errstate(all="ignore"):
        new = _rk4_step(v, t, c, h)
    bad = ~(np.isfinite(new) & (new > 0))
    if bad.any():
        if depth >= 16:
            raise FlowEscape(f"cost trajectory left the positive half-line near t={t:.10g}")
        sub = c[bad]
        sub = _guarded_step(v, t, sub, 0.5 * h, depth + 1)
        sub = _guarded_step(v, t + 0.5 * h, sub, 0.5 * h, depth + 1)
        new[bad] = sub
    if np.any(new > OVERFLOW_GUARD):
        raise FlowEscape(f"cost trajectory exceeded {OVERFLOW_GUARD:g} near t={t:.10g}")
    return new


def integrate_flow(v, t0: float, t1: float, c, steps_per_unit: int = DEFAULT_STEPS) -> np.ndarray:
    """Solve ``dc/dt = v(t, c)`` from ``t0`` to ``t1`` (either direction) for each start cost."""
    c = np.array(c, dtype=float, ndmin=1)
    if t0 == t1:
        return c
    if np.any(~np.isfinite(c)) or np.any(c <= 0):
        raise FlowEscape("flow started from a non-positive cost")
    steps = max(1, math.ceil(abs(t1 - t0) * steps_per_unit - 1e-9))
    h = (t1 - t0) / steps
    for k in range(steps):
        c = _guarded_step(v, t0 + k * h, c, h)
    return c


class Provenance(str, enum.Enum):
    NAIVE = "naive"
    FLOW = "flow"
    EXPLICIT = "explicit"


@dataclass(frozen=True, eq=False)
class CostAdjustment:
    """Increasing map of costs carrying time ``t_from`` to time ``t_to``.

    ``knots`` optionally holds a tabulation ``(costs, images)`` of the map;
    flow adjustments keep the generator and evaluate off-grid costs by
    integrating rather than interpolating.
    """

    t_from: float
    t_to: float
    forward: Callable[[np.ndarray], np.ndarray]
    provenance: Provenance = Provenance.EXPLICIT
    generator: Optional[CostGenerator] = None
    knots: Optional[tuple] = None

    def __call__(self, c):
        arr = np.asarray(c, dtype=float)
        out = np.asarray(self.forward(np.atleast_1d(arr)), dtype=float)
        return out.reshape(arr.shape) if arr.ndim else float(out[0])

    @property
    def is_identity(self) -> bool:
        return self.provenance is Provenance.NAIVE or self.t_from == self.t_to


def _identity(c):
    return np.array(c, dtype=float)


def naive_adjustment(t_from: float, t_to: float) -> CostAdjustment:
    """Equal cost means equal welfare: the identity map."""
    return CostAdjustment(t_from, t_to, _identity, Provenance.NAIVE)


def scaling_adjustment(factor: float, t_from: float, t_to: float) -> CostAdjustment:
    """``c -> c * factor ** (t_to - t_from)``: constant relative drift per unit time."""
    if not (math.isfinite(factor) and factor > 0):
        raise ValueError(f"scaling factor must be positive, got {factor}")
    ratio = factor ** (t_to - t_from)
    return CostAdjustment(t_from, t_to, lambda c: np.asarray(c, dtype=float) * ratio, Provenance.EXPLICIT)


def tabulated_adjustment(costs, images, t_from: float, t_to: float) -> CostAdjustment:
    """Adjustment through strictly increasing knots, joined by PCHIP cubics."""
    costs = np.asarray(costs, dtype=float)
    images = np.asarray(images, dtype=float)
    if costs.ndim != 1 or costs.shape != images.shape or costs.size < 2:
        raise ValueError("tabulated adjustment needs matching knot arrays with >= 2 entries")
    if np.any(costs <= 0) or np.any(images <= 0):
        raise ValueError("adjustment knots must be positive costs")
    if np.any(np.diff(costs) <= 0):
        raise ValueError("adjustment knots must be strictly increasing")
    if np.any(np.diff(images) <= 0):
        raise NonMonotone("adjusted costs must be strictly increasing")
    if t_from == t_to and not np.allclose(images, costs, rtol=1e-12, atol=0):
        raise ValueError("an adjustment over an empty time span must be the identity")
    spline = PchipInterpolator(costs, images, extrapolate=False)
    lo, hi = costs[0], costs[-1]

    def forward(c):
        c = np.asarray(c, dtype=float)
        if np.any(c < lo * (1 - 1e-12)) or np.any(c > hi * (1 + 1e-12)):
            raise ValueError(f"cost outside tabulated range [{lo:g}, {hi:g}]")
        return spline(np.clip(c, lo, hi))

    return CostAdjustment(t_from, t_to, forward, Provenance.EXPLICIT, knots=(costs, images))


def flow_adjustment(v: CostGenerator, t_a: float, t_b: float, c_grid,
                    steps_per_unit: int = DEFAULT_STEPS) -> CostAdjustment:
    """Cost adjustment ``t_a -> t_b`` generated by the flow of ``v``.

    The map is tabulated on ``c_grid`` (strictly increasing, positive) and
    trajectories must not cross there.  Raises :class:`FlowEscape` if a
    trajectory leaves the positive half-line.
    """
    if not isinstance(v, CostGenerator):
        v = CostGenerator(v)
    if not v.covers(t_a, t_b):
        raise ValueError(f"[{t_a}, {t_b}] is outside the generator domain [{v.t_min}, {v.t_max}]")
    grid = np.asarray(c_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("cost grid must be strictly increasing and positive")
    images = integrate_flow(v, t_a, t_b, grid, steps_per_unit)
    if np.any(np.diff(images) <= 0):
        raise NonMonotone(f"flow over [{t_a}, {t_b}] does not preserve the cost order")

    def forward(c):
        # grid costs were already integrated; anything else is integrated afresh
        c = np.array(c, dtype=float, ndmin=1)
        i = np.clip(np.searchsorted(grid, c), 0, grid.size - 1)
        hit = grid[i] == c
        out = np.empty_like(c)
        out[hit] = images[i[hit]]
        if not hit.all():
            out[~hit] = integrate_flow(v, t_a, t_b, c[~hit], steps_per_unit)
        return out

    return CostAdjustment(t_a, t_b, forward, Provenance.FLOW, generator=v, knots=(grid, images))


def flow_family(v: CostGenerator, c_grid, steps_per_unit: int = DEFAULT_STEPS):
    """Return ``(t_to, t_from) -> CostAdjustment`` for the flow of ``v``."""
    def family(t_to, t_from):
        return flow_adjustment(v, t_from, t_to, c_grid, steps_per_unit)
    return family


def compose_adjustments(later: CostAdjustment, earlier: CostAdjustment) -> CostAdjustment:
    """``later o earlier``, carrying ``earlier.t_from`` to ``later.t_to``."""
    if abs(earlier.t_to - later.t_from) > TIME_TOL * max(1.0, abs(later.t_from)):
        raise TimeMismatch(f"cannot compose: earlier ends at {earlier.t_to}, later starts at {later.t_from}")
    if earlier.provenance is Provenance.NAIVE and later.provenance is Provenance.NAIVE:
        return naive_adjustment(earlier.t_from, later.t_to)
    knots = None
    if earlier.knots is not None:
        knots = (earlier.knots[0], later.forward(earlier.knots[1]))

    def forward(c):
        return later.forward(earlier.forward(c))

    return CostAdjustment(earlier.t_from, later.t_to, forward, Provenance.EXPLICIT, knots=knots)


def _bracket(adj: CostAdjustment, y: np.ndarray):
    lo, hi = 0.5 * y, 2.0 * y
    if adj.knots is not None:
        costs, images = adj.knots
        if costs.size >= 2:
            i = np.clip(np.searchsorted(images, y, side="right") - 1, 0, costs.size - 2)
            inside = (y >= images[0]) & (y <= images[-1])
            lo = np.where(inside, costs[i], lo)
            hi = np.where(inside, costs[i + 1], hi)
    for _ in range(400):
        low_bad = adj.forward(lo) > y
        high_bad = adj.forward(hi) < y
        if not (low_bad.any() or high_bad.any()):
            return lo, hi
        lo = np.where(low_bad, 0.25 * lo, lo)
        hi = np.where(high_bad, 4.0 * hi, hi)
    raise FlowEscape("could not bracket the inverse adjustment")


def invert_adjustment(adj: CostAdjustment) -> CostAdjustment:
    """Inverse map, carrying ``t_to`` back to ``t_from``.

    The inverse is evaluated by bracketed root finding on the forward map,
    so it is exact up to the accuracy of the forward map itself.
    """
    if adj.provenance is Provenance.NAIVE:
        return naive_adjustment(adj.t_to, adj.t_from)
    if adj.knots is not None and np.any(np.diff(adj.knots[1]) <= 0):
        raise NonMonotone("adjustment is not strictly increasing on its knots")

    def backward(y):
        y = np.array(y, dtype=float, ndmin=1)
        lo, hi = _bracket(adj, y)
        res = find_root(lambda x, target: adj.forward(x) - target, (lo, hi), args=(y,))
        if not np.all(res.success):
            raise NonMonotone("inverse adjustment did not converge; the map may not be monotone")
        return res.x

    knots = None
    if adj.knots is not None:
        knots = (adj.knots[1], adj.knots[0])
    return CostAdjustment(adj.t_to, adj.t_from, backward, Provenance.EXPLICIT, knots=knots)


def generator_from_adjustments(family, t: float, c, h: float = 1e-3) -> np.ndarray:
    """Recover ``v(t, c)`` from a family of adjustments by a centred difference in time."""
    c = np.asarray(c, dtype=float)
    ahead = family(t + h, t)(c)
    behind = family(t - h, t)(c)
    return (ahead - behind) / (2.0 * h)


@dataclass(frozen=True, eq=False)
class TangentPerturbation:
    """First-order variation of a (utility, section) pair.

    ``gamma`` varies the utility at a basket; ``nu`` moves section baskets.
    """

    gamma: Callable[[np.ndarray], float]
    nu: Callable[[np.ndarray], np.ndarray]


@dataclass
class HorizontalityReport:
    passed: bool
    worst_gamma: float
    worst_cosine: float
    witness_u: Optional[float] = None
    message: str = ""

    def __bool__(self):
        return self.passed


def horizontality_check(C: UtilityFunction, X: CrossSection, pert: TangentPerturbation,
                        u_grid, tol: float = DEFAULT_TOL) -> HorizontalityReport:
    """Check that ``pert`` leaves section utilities fixed and moves section
    baskets tangentially to their level sets.

    At every section point ``q = X(u)``: ``|gamma(q)| <= tol`` and the
    cosine between ``grad C(q)`` and ``nu(q)`` is at most ``tol``.
    """
    worst_gamma, worst_cos, witness = 0.0, 0.0, None
    passed = True
    for u in u_grid:
        q = X(u)
        g = C.gradient(q)
        if g is None:
            raise ValueError("horizontality check needs the utility gradient")
        gamma = abs(float(pert.gamma(q)))
        nu = np.asarray(pert.nu(q), dtype=float)
        denom = np.linalg.norm(g) * np.linalg.norm(nu)
        cosine = abs(float(g @ nu)) / denom if denom > 0 else 0.0
        worst_gamma = max(worst_gamma, gamma)
        worst_cos = max(worst_cos, cosine)
        if (gamma > tol or cosine > tol) and passed:
            passed, witness = False, float(u)
    if passed:
        msg = "horizontal on the sampled section"
    else:
        msg = f"not horizontal at u={witness:.10g} (|gamma| <= {worst_gamma:.3g}, cos <= {worst_cos:.3g})"
    return HorizontalityReport(passed, worst_gamma, worst_cos, witness, msg)

"""Welfare maps and cost-of-living index series.

A welfare map pairs the indifference set of minimal cost ``c`` at the base
time with the indifference set of minimal cost ``adj(c)`` at time ``t``,
where ``adj`` is a cost adjustment.  The index is the ratio of the two
minimal costs.  Every index is computed twice, once from basket prices and
once as ``adj(c) / c``, and the two must agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .basket import basket_by_cost
from .core import DEFAULT_TOL, CobbDouglas, PriceFunctional, UtilityFunction
from .errors import IndexConsistencyError, KonusError, TimeMismatch
from .transport import (
    TIME_TOL,
    CostAdjustment,
    CostGenerator,
    flow_adjustment,
    naive_adjustment,
)

CROSS_ROUTE_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class Scenario:
    """Utilities and prices sampled on a strictly increasing time grid."""

    times: tuple
    utilities: tuple
    prices: tuple

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "utilities", tuple(self.utilities))
        object.__setattr__(self, "prices", tuple(self.prices))
        if not times:
            raise ValueError("scenario needs at least one time")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("time grid must be strictly increasing")
        if not (len(self.utilities) == len(self.prices) == len(times)):
            raise ValueError("need one utility and one price vector per time")
        n = self.utilities[0].n
        for t, C, P in zip(times, self.utilities, self.prices):
            if C.n != n or P.n != n:
                raise ValueError(f"number of goods changes at t={t}; scenarios with varying n are not supported")

    @classmethod
    def cobb_douglas(cls, times, exponents, prices) -> "Scenario":
        return cls(tuple(times), tuple(CobbDouglas(a) for a in exponents),
                   tuple(PriceFunctional(p) for p in prices))

    @property
    def n(self) -> int:
        return self.utilities[0].n

    def index_of(self, t: float) -> int:
        for i, s in enumerate(self.times):
            if abs(s - t) <= TIME_TOL * max(1.0, abs(t)):
                return i
        raise KeyError(f"t={t} is not on the scenario time grid")

    def at(self, t: float) -> tuple:
        i = self.index_of(t)
        return self.utilities[i], self.prices[i]

    def replace_utilities(self, utilities: Sequence[UtilityFunction]) -> "Scenario":
        return Scenario(self.times, tuple(utilities), self.prices)


def naive_welfare(s: Scenario, t_a: float, t: float, c: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Minimal basket at time ``t`` with the same cost ``c`` as at the base time."""
    s.index_of(t_a)
    C, P = s.at(t)
    return basket_by_cost(C, P, c, tol)


def _check_span(adj: CostAdjustment, t_a: float, t: float):
    if abs(adj.t_from - t_a) > TIME_TOL * max(1.0, abs(t_a)) or abs(adj.t_to - t) > TIME_TOL * max(1.0, abs(t)):
        raise TimeMismatch(f"adjustment spans [{adj.t_from}, {adj.t_to}] but [{t_a}, {t}] was requested")


def welfare(s: Scenario, adj: CostAdjustment, t_a: float, t: float, c: float,
            tol: float = DEFAULT_TOL) -> np.ndarray:
    """Minimal basket at time ``t`` whose cost is ``adj(c)``."""
    _check_span(adj, t_a, t)
    s.index_of(t_a)
    C, P = s.at(t)
    return basket_by_cost(C, P, adj(c), tol)


@dataclass(frozen=True, eq=False)
class IndexCell:
    time: float
    reference_cost: float
    index: float
    adjusted_cost: float
    basket: np.ndarray
    price_route: float


def index_cell(s: Scenario, adj: CostAdjustment, t_a: float, t: float, c: float,
               tol: float = DEFAULT_TOL) -> IndexCell:
    """Index value with its adjusted cost and welfare-equivalent basket."""
    _check_span(adj, t_a, t)
    C_a, P_a = s.at(t_a)
    C_t, P_t = s.at(t)
    adjusted = adj(c)
    basket = basket_by_cost(C_t, P_t, adjusted, tol)
    base_basket = basket_by_cost(C_a, P_a, c, tol)
    price_route = P_t(basket) / P_a(base_basket)
    ratio_route = adjusted / c
    if not abs(price_route - ratio_route) <= CROSS_ROUTE_TOL * ratio_route:
        raise IndexConsistencyError(
            f"t={t:g}, c={c:g}: basket-price ratio {price_route!r} != adjusted/base cost {ratio_route!r}")
    return IndexCell(float(t), float(c), ratio_route, adjusted, basket, price_route)


def cola_index(s: Scenario, adj: CostAdjustment, t_a: float, t: float, c: float,
               tol: float = DEFAULT_TOL) -> float:
    """Cost-of-living index at ``t`` relative to ``t_a`` for reference cost ``c``."""
    return index_cell(s, adj, t_a, t, c, tol).index


@dataclass
class IndexSeries:
    base_time: float
    reference_cost: float
    times: tuple
    values: np.ndarray
    adjusted_costs: np.ndarray
    baskets: list
    provenance: str
    errors: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors


AdjustmentFamily = Union[None, CostGenerator, Mapping[float, CostAdjustment],
                         Callable[[float, float], CostAdjustment]]


def _resolve(adj_family: AdjustmentFamily, t_a: float):
    """``(t, cost_grid) -> adjustment t_a -> t`` plus a provenance tag."""
    if adj_family is None:
        return (lambda t, grid: naive_adjustment(t_a, t)), "naive"
    if isinstance(adj_family, CostGenerator):
        return (lambda t, grid: flow_adjustment(adj_family, t_a, t, grid)), "flow"
    if isinstance(adj_family, Mapping):
        def lookup(t, grid):
            for key, adj in adj_family.items():
                if abs(key - t) <= TIME_TOL * max(1.0, abs(t)):
                    return adj
            if abs(t - t_a) <= TIME_TOL * max(1.0, abs(t)):
                return naive_adjustment(t_a, t)
            raise KeyError(f"no adjustment supplied for t={t}")
        return lookup, "explicit"
    return (lambda t, grid: adj_family(t, t_a)), "family"


def index_series(s: Scenario, adj_family: AdjustmentFamily, t_a: float, costs: Sequence[float],
                 tol: float = DEFAULT_TOL) -> list:
    """One :class:`IndexSeries` per reference cost over the whole time grid.

    ``adj_family`` is ``None`` (naive), a :class:`CostGenerator`, a mapping
    from time to the adjustment ``t_a -> t``, or a callable
    ``(t_to, t_from) -> CostAdjustment``.  A failure at one time is recorded
    in that series' ``errors`` and its value set to NaN; the batch continues.
    """
    costs = np.asarray(costs, dtype=float)
    if costs.size == 0:
        raise ValueError("cost grid empty")
    s.index_of(t_a)
    adjustment_at, provenance = _resolve(adj_family, t_a)
    grid = np.unique(costs)
    n_t = len(s.times)
    series = [IndexSeries(float(t_a), float(c), s.times, np.full(n_t, np.nan), np.full(n_t, np.nan),
                          [None] * n_t, provenance) for c in costs]
    failures = (KonusError, ValueError, KeyError)
    for i, t in enumerate(s.times):
        try:
            shared = adjustment_at(t, grid)
        except failures:
            # one bad trajectory should not sink the other reference costs
            shared = None
        for entry in series:
            try:
                adj = shared if shared is not None else adjustment_at(t, [entry.reference_cost])
                cell = index_cell(s, adj, t_a, t, entry.reference_cost, tol)
            except failures as exc:
                entry.errors[t] = str(exc).strip("'\"")
                continue
            entry.values[i] = cell.index
            entry.adjusted_costs[i] = cell.adjusted_cost
            entry.baskets[i] = cell.basket
    return series

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FAMILY_TIMES
from konus import (
    CobbDouglas,
    CostGenerator,
    GaugeMap,
    IndexConsistencyError,
    PriceFunctional,
    Scenario,
    TimeMismatch,
    apply_gauge,
    cola_index,
    compose_adjustments,
    flow_adjustment,
    index_series,
    naive_adjustment,
    naive_welfare,
    scaling_adjustment,
    welfare,
)
from konus import index as index_module

COSTS = (1.0, 2.0, 3.0, 6.0)


def relative(k):
    return CostGenerator(lambda t, c: k * c)


def three_times():
    return Scenario.cobb_douglas((1.0, 1.5, 2.0), [(1, 1), (1.5, 1), (2, 1)], [(1, 1)] * 3)


# ---------------------------------------------------------------- scenarios

def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario.cobb_douglas((1.0, 1.0), [(1, 1)] * 2, [(1, 1)] * 2)
    with pytest.raises(ValueError):
        Scenario.cobb_douglas((1.0, 2.0), [(1, 1), (1, 1, 1)], [(1, 1), (1, 1, 1)])
    with pytest.raises(ValueError):
        Scenario.cobb_douglas((1.0, 2.0), [(1, 1)] * 2, [(1, 1)])
    with pytest.raises(KeyError):
        three_times().index_of(1.2)


# ---------------------------------------------------------------- welfare maps

def test_naive_welfare_examples(family_scenario):
    assert np.allclose(naive_welfare(family_scenario, 1.0, 2.0, 3.0), [2.0, 1.0], rtol=1e-14)
    assert np.allclose(naive_welfare(family_scenario, 1.0, 1.5, 5.0), [3.0, 2.0], rtol=1e-14)
    assert np.allclose(naive_welfare(family_scenario, 1.0, 1.0, 4.0), [2.0, 2.0], rtol=1e-14)


def test_welfare_examples(family_scenario):
    s = family_scenario
    assert np.array_equal(welfare(s, naive_adjustment(1.0, 2.0), 1.0, 2.0, 3.0),
                          naive_welfare(s, 1.0, 2.0, 3.0))
    double = scaling_adjustment(2.0, 1.0, 2.0)
    assert np.allclose(welfare(s, double, 1.0, 2.0, 3.0), [4.0, 2.0], rtol=1e-14)
    flow = flow_adjustment(relative(0.3), 1.0, 2.0, COSTS)
    expected = naive_welfare(s, 1.0, 2.0, 3.0 * math.exp(0.3))
    assert np.allclose(welfare(s, flow, 1.0, 2.0, 3.0), expected, rtol=1e-8)


def test_welfare_time_span_mismatch(family_scenario):
    with pytest.raises(TimeMismatch):
        welfare(family_scenario, naive_adjustment(1.0, 1.5), 1.0, 2.0, 3.0)


# ---------------------------------------------------------------- index values

def test_cola_identity_is_one(family_scenario):
    for t in FAMILY_TIMES:
        for c in COSTS:
            assert cola_index(family_scenario, naive_adjustment(1.0, t), 1.0, t, c) == pytest.approx(1.0, abs=1e-12)


def test_cola_doubling_is_two():
    s = Scenario.cobb_douglas((0.0, 1.0), [(0.3, 2.0, 1.0), (1.7, 0.2, 0.9)], [(1, 2, 3), (4, 0.5, 2)])
    double = scaling_adjustment(2.0, 0.0, 1.0)
    for c in (0.5, 3.0, 40.0):
        assert cola_index(s, double, 0.0, 1.0, c) == pytest.approx(2.0, rel=1e-14)


def test_cola_flow_is_exponential(family_scenario):
    flow = flow_adjustment(relative(0.25), 1.0, 1.75, COSTS)
    assert cola_index(family_scenario, flow, 1.0, 1.75, 3.0) == pytest.approx(math.exp(0.25 * 0.75), rel=1e-7)


def test_cola_cross_route_is_enforced(family_scenario, monkeypatch):
    real = index_module.basket_by_cost

    def skewed(C, P, c, tol=1e-8):
        return real(C, P, c, tol) * (1.0 + 1e-5)

    monkeypatch.setattr(index_module, "basket_by_cost", skewed)
    # the skew cancels in the price ratio, so the routes still agree ...
    assert cola_index(family_scenario, naive_adjustment(1.0, 2.0), 1.0, 2.0, 3.0) == pytest.approx(1.0)

    calls = []

    def lopsided(C, P, c, tol=1e-8):
        calls.append(c)
        q = real(C, P, c, tol)
        return q * (1.0 + 1e-5) if len(calls) == 1 else q

    monkeypatch.setattr(index_module, "basket_by_cost", lopsided)
    # ... but a skew on one side only is caught
    with pytest.raises(IndexConsistencyError):
        cola_index(family_scenario, naive_adjustment(1.0, 2.0), 1.0, 2.0, 3.0)


# ---------------------------------------------------------------- series

def test_naive_series_is_one(family_scenario):
    series = index_series(family_scenario, None, 1.0, COSTS)
    assert len(series) == len(COSTS)
    for entry in series:
        assert entry.ok and entry.provenance == "naive"
        assert np.allclose(entry.values, 1.0, rtol=0, atol=1e-9)


def test_single_time_series():
    s = Scenario.cobb_douglas((3.0,), [(1, 2)], [(1, 1)])
    (entry,) = index_series(s, relative(0.5), 3.0, [2.0])
    assert list(entry.values) == [1.0]


def test_relative_generator_series():
    series = index_series(three_times(), relative(0.1), 1.0, COSTS)
    for entry in series:
        assert entry.provenance == "flow"
        assert np.allclose(entry.values, [1.0, math.exp(0.05), math.exp(0.1)], rtol=1e-6)


def test_series_accepts_mapping_and_callable(family_scenario):
    table = {t: scaling_adjustment(1.5, 1.0, t) for t in FAMILY_TIMES if t != 1.0}
    by_map = index_series(family_scenario, table, 1.0, COSTS)
    by_call = index_series(family_scenario, lambda t_to, t_from: scaling_adjustment(1.5, t_from, t_to), 1.0, COSTS)
    for a, b in zip(by_map, by_call):
        assert a.provenance == "explicit" and b.provenance == "family"
        assert np.allclose(a.values, b.values, rtol=1e-15)
        assert np.allclose(a.values, 1.5 ** (np.array(FAMILY_TIMES) - 1.0), rtol=1e-14)


def test_series_reports_failures_per_entry(family_scenario):
    # drift that pushes costs below zero before t = 2
    sink = CostGenerator(lambda t, c: -2.0 * np.ones_like(c))
    series = index_series(family_scenario, sink, 1.0, [1.0, 6.0])
    small, large = series
    assert not small.ok and large.ok
    assert 2.0 in small.errors and 1.0 not in small.errors
    assert math.isnan(small.values[-1]) and small.values[0] == 1.0


def test_series_rejects_empty_cost_grid(family_scenario):
    with pytest.raises(ValueError, match="cost grid empty"):
        index_series(family_scenario, None, 1.0, [])


def test_series_base_time_inside_grid(family_scenario):
    series = index_series(family_scenario, relative(0.2), 1.5, COSTS)
    for entry in series:
        assert entry.values[2] == 1.0
        assert np.allclose(entry.values, np.exp(0.2 * (np.array(FAMILY_TIMES) - 1.5)), rtol=1e-7)


# ---------------------------------------------------------------- properties

@st.composite
def scenarios(draw):
    n = draw(st.integers(1, 4))
    m = draw(st.integers(1, 4))
    times = np.cumsum(draw(st.lists(st.floats(0.1, 1.0), min_size=m, max_size=m)))
    vec = st.lists(st.floats(0.2, 3.0), min_size=n, max_size=n)
    exps = [draw(vec) for _ in range(m)]
    prices = [draw(vec) for _ in range(m)]
    return Scenario.cobb_douglas(times, exps, prices)


adjustment_kinds = st.one_of(
    st.just(None),
    st.builds(lambda f: (lambda t_to, t_from: scaling_adjustment(f, t_from, t_to)), st.floats(0.3, 3.0)),
    st.builds(relative, st.floats(-0.5, 0.5)),
)


@settings(max_examples=30, deadline=None)
@given(scenarios(), adjustment_kinds, st.data())
def test_index_is_one_at_base_time(s, family, data):
    i = data.draw(st.integers(0, len(s.times) - 1))
    for entry in index_series(s, family, s.times[i], [0.7, 2.0, 9.0]):
        assert entry.ok
        assert entry.values[i] == 1.0


@settings(max_examples=30, deadline=None)
@given(scenarios(), st.floats(-0.5, 0.5), st.floats(0.3, 3.0))
def test_gauge_replacement_leaves_index_unchanged(s, k, power):
    gauges = [GaugeMap.affine(3.0), GaugeMap.from_function(lambda u: u ** power + u, 1e-12, 1e12, num=512)]
    regauged = s.replace_utilities([apply_gauge(gauges[i % 2], C) for i, C in enumerate(s.utilities)])
    costs = [0.5, 4.0]
    for a, b in zip(index_series(s, relative(k), s.times[0], costs), index_series(regauged, relative(k), s.times[0], costs)):
        assert a.ok and b.ok
        assert np.allclose(a.values, b.values, rtol=1e-7)


@settings(max_examples=20, deadline=None)
@given(scenarios().filter(lambda s: len(s.times) >= 3), st.floats(-0.5, 0.5), st.floats(0.5, 5.0))
def test_chaining(s, k, c):
    v = relative(k)
    ta, tb, tc = s.times[0], s.times[1], s.times[2]
    grid = [c]
    ab = flow_adjustment(v, ta, tb, grid)
    bc = flow_adjustment(v, tb, tc, grid)
    ac = compose_adjustments(bc, ab)
    first = cola_index(s, ab, ta, tb, c)
    second = cola_index(s, bc, tb, tc, ab(c))
    assert cola_index(s, ac, ta, tc, c) == pytest.approx(first * second, rel=1e-6)


def test_naive_scenarios_with_moving_prices():
    # with equal-cost welfare, a price change does not show in the index
    s = Scenario(
        (0.0, 1.0),
        (CobbDouglas((1, 1)), CobbDouglas((1, 1))),
        (PriceFunctional((1, 1)), PriceFunctional((2, 3))),
    )
    assert cola_index(s, naive_adjustment(0.0, 1.0), 0.0, 1.0, 5.0) == pytest.approx(1.0, rel=1e-14)

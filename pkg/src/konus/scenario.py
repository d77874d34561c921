"""Scenario files: a line-oriented text format for index computations.

Grammar (``#`` starts a comment, blank lines are ignored)::

    [scenario]
    version = 1
    goods = 2                    # number of goods, 1..64
    base_time = 1
    costs = 1, 2, 3, 6           # reference costs, strictly increasing

    [adjustment]
    kind = naive                 # naive | scale | generator | tabulated
    factor = 2                   # scale: cost multiplier per unit time
    generator = relative:0.1     # zero | const:K | relative:K | tabulated
    generator_knots = 1:0.1, 10:1    # tabulated generator v(c), c:v pairs

    [time 1]                     # one section per grid time, increasing
    exponents = 1, 1             # Cobb-Douglas exponents, all > 0
    prices = 1, 1                # all > 0
    adjust = 1:1.1, 6:6.6        # tabulated kind only: c:adj(c) from base_time

Numbers are decimals with an optional exponent.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .core import CobbDouglas
from .errors import KonusError
from .index import Scenario
from .transport import CostGenerator, naive_adjustment, scaling_adjustment, tabulated_adjustment

SCHEMA_VERSION = 1
MAX_GOODS = 64
ADJUSTMENT_KINDS = ("naive", "scale", "generator", "tabulated")
GENERATORS = ("zero", "const", "relative", "tabulated")

_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


class ScenarioParseError(KonusError, ValueError):
    def __init__(self, field_name: str, message: str, line: Optional[int] = None):
        self.field = field_name
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{field_name}: {message}")


@dataclass(frozen=True)
class AdjustmentSpec:
    kind: str = "naive"
    factor: Optional[float] = None
    generator: Optional[str] = None
    rate: Optional[float] = None
    generator_knots: tuple = ()
    knots: tuple = ()  # ((time, ((c, adj_c), ...)), ...)


@dataclass(frozen=True)
class ScenarioFile:
    version: int
    goods: int
    times: tuple
    exponents: tuple
    prices: tuple
    costs: tuple
    base_time: float
    adjustment: AdjustmentSpec = field(default_factory=AdjustmentSpec)


def _number(text: str, name: str, line=None) -> float:
    text = text.strip()
    if not _NUMBER.match(text):
        raise ScenarioParseError(name, f"not a decimal number: {text!r}", line)
    return float(text)


def _vector(text: str, name: str, line=None) -> tuple:
    parts = [p for p in (s.strip() for s in text.split(",")) if p]
    return tuple(_number(p, name, line) for p in parts)


def _pairs(text: str, name: str, line=None) -> tuple:
    out = []
    for part in (s.strip() for s in text.split(",")):
        if not part:
            continue
        if part.count(":") != 1:
            raise ScenarioParseError(name, f"expected c:value pair, got {part!r}", line)
        a, b = part.split(":")
        out.append((_number(a, name, line), _number(b, name, line)))
    return tuple(out)


def _check_knots(pairs, name, line=None):
    if len(pairs) < 2:
        raise ScenarioParseError(name, "need at least two knots", line)
    xs = [x for x, _ in pairs]
    if any(x <= 0 for x in xs):
        raise ScenarioParseError(name, "knot costs must be strictly positive", line)
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ScenarioParseError(name, "knots must be strictly increasing", line)


def parse_scenario(text: str) -> ScenarioFile:
    """Parse scenario text; raises :class:`ScenarioParseError` naming the offending field."""
    sections: list = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioParseError("section", f"malformed header {line!r}", lineno)
            current = (line[1:-1].strip(), {}, lineno)
            sections.append(current)
            continue
        if current is None:
            raise ScenarioParseError("section", "key outside of any section", lineno)
        if "=" not in line:
            raise ScenarioParseError("line", f"expected key = value, got {line!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key in current[1]:
            raise ScenarioParseError(key, "duplicate key", lineno)
        current[1][key] = (value, lineno)

    head = adj_sec = None
    time_secs = []
    for name, body, lineno in sections:
        if name == "scenario":
            if head is not None:
                raise ScenarioParseError("scenario", "duplicate section", lineno)
            head = body
        elif name == "adjustment":
            if adj_sec is not None:
                raise ScenarioParseError("adjustment", "duplicate section", lineno)
            adj_sec = body
        elif name.split()[0] == "time" and len(name.split()) == 2:
            time_secs.append((_number(name.split()[1], "time", lineno), body, lineno))
        else:
            raise ScenarioParseError("section", f"unknown section [{name}]", lineno)
    if head is None:
        raise ScenarioParseError("scenario", "missing [scenario] section")

    def need(body, key, section):
        if key not in body:
            raise ScenarioParseError(key, f"missing in [{section}]")
        return body[key]

    _allowed(head, ("version", "goods", "base_time", "costs"), "scenario")
    text_v, ln = need(head, "version", "scenario")
    version = _number(text_v, "version", ln)
    if version != SCHEMA_VERSION:
        raise ScenarioParseError("version", f"unsupported schema version {text_v}", ln)
    text_n, ln = need(head, "goods", "scenario")
    goods = _number(text_n, "goods", ln)
    if goods != int(goods) or not 1 <= goods <= MAX_GOODS:
        raise ScenarioParseError("goods", f"must be an integer in 1..{MAX_GOODS}", ln)
    goods = int(goods)
    text_c, ln = need(head, "costs", "scenario")
    costs = _vector(text_c, "costs", ln)
    if not costs:
        raise ScenarioParseError("costs", "cost grid empty", ln)
    if any(c <= 0 for c in costs):
        raise ScenarioParseError("costs", "costs must be strictly positive", ln)
    if any(b <= a for a, b in zip(costs, costs[1:])):
        raise ScenarioParseError("costs", "costs must be strictly increasing", ln)

    if not time_secs:
        raise ScenarioParseError("time", "no [time T] sections")
    times, exponents, prices, knots = [], [], [], []
    for t, body, lineno in time_secs:
        if times and t <= times[-1]:
            raise ScenarioParseError("time", "time sections must be strictly increasing", lineno)
        _allowed(body, ("exponents", "prices", "adjust"), f"time {t!r}")
        ex_text, ln = need(body, "exponents", f"time {t!r}")
        a = _vector(ex_text, "exponents", ln)
        if len(a) != goods:
            raise ScenarioParseError("exponents", f"expected {goods} values, got {len(a)}", ln)
        if any(x <= 0 for x in a):
            raise ScenarioParseError("exponents", "exponents must be strictly positive", ln)
        pr_text, ln = need(body, "prices", f"time {t!r}")
        p = _vector(pr_text, "prices", ln)
        if len(p) != goods:
            raise ScenarioParseError("prices", f"expected {goods} values, got {len(p)}", ln)
        if any(x <= 0 for x in p):
            raise ScenarioParseError("prices", "prices must be strictly positive", ln)
        if "adjust" in body:
            k_text, ln = body["adjust"]
            pairs = _pairs(k_text, "adjust", ln)
            _check_knots(pairs, "adjust", ln)
            if any(y <= 0 for _, y in pairs) or any(b[1] <= a[1] for a, b in zip(pairs, pairs[1:])):
                raise ScenarioParseError("adjust", "adjusted costs must be positive and strictly increasing", ln)
            knots.append((t, pairs))
        times.append(t)
        exponents.append(a)
        prices.append(p)

    if "base_time" in head:
        bt_text, ln = head["base_time"]
        base_time = _number(bt_text, "base_time", ln)
    else:
        base_time = times[0]
    if base_time not in times:
        raise ScenarioParseError("base_time", f"{base_time!r} is not one of the grid times")

    adjustment = _parse_adjustment(adj_sec or {}, tuple(knots))
    if adjustment.kind == "tabulated":
        have = {t for t, _ in knots}
        missing = [t for t in times if t != base_time and t not in have]
        if missing:
            raise ScenarioParseError("adjust", f"tabulated adjustment missing at t={missing[0]!r}")
    elif knots:
        raise ScenarioParseError("adjust", "adjust knots given but adjustment kind is not tabulated")

    return ScenarioFile(SCHEMA_VERSION, goods, tuple(times), tuple(exponents), tuple(prices),
                        costs, base_time, adjustment)


def _allowed(body, keys, section):
    for key, (_, ln) in body.items():
        if key not in keys:
            raise ScenarioParseError(key, f"unknown key in [{section}]", ln)


def _parse_adjustment(body, knots) -> AdjustmentSpec:
    _allowed(body, ("kind", "factor", "generator", "generator_knots"), "adjustment")
    kind, ln = body.get("kind", ("naive", None))
    if kind not in ADJUSTMENT_KINDS:
        raise ScenarioParseError("kind", f"unknown adjustment kind {kind!r}", ln)
    if kind == "scale":
        if "factor" not in body:
            raise ScenarioParseError("factor", "scale adjustment needs a factor")
        factor = _number(body["factor"][0], "factor", body["factor"][1])
        if factor <= 0:
            raise ScenarioParseError("factor", "scale factor must be strictly positive", body["factor"][1])
        return AdjustmentSpec("scale", factor=factor)
    if kind == "generator":
        if "generator" not in body:
            raise ScenarioParseError("generator", "generator adjustment needs a generator")
        spec, ln = body["generator"]
        name, _, arg = spec.partition(":")
        name = name.strip()
        if name not in GENERATORS:
            raise ScenarioParseError("generator", f"unknown generator {name!r}", ln)
        rate = None
        if name in ("const", "relative"):
            if not arg:
                raise ScenarioParseError("generator", f"{name} needs a parameter, e.g. {name}:0.1", ln)
            rate = _number(arg, "generator", ln)
        elif arg:
            raise ScenarioParseError("generator", f"{name} takes no parameter", ln)
        gknots = ()
        if name == "tabulated":
            if "generator_knots" not in body:
                raise ScenarioParseError("generator_knots", "tabulated generator needs knots")
            gk_text, gln = body["generator_knots"]
            gknots = _pairs(gk_text, "generator_knots", gln)
            _check_knots(gknots, "generator_knots", gln)
        return AdjustmentSpec("generator", generator=name, rate=rate, generator_knots=gknots)
    if kind == "tabulated":
        return AdjustmentSpec("tabulated", knots=knots)
    return AdjustmentSpec("naive")


def _fmt(x: float) -> str:
    return repr(float(x))


def _fmt_vec(v) -> str:
    return ", ".join(_fmt(x) for x in v)


def _fmt_pairs(pairs) -> str:
    return ", ".join(f"{_fmt(a)}:{_fmt(b)}" for a, b in pairs)


def format_scenario(sf: ScenarioFile) -> str:
    """Serialise ``sf``; :func:`parse_scenario` reads it back unchanged."""
    adj = sf.adjustment
    lines = ["[scenario]", f"version = {sf.version}", f"goods = {sf.goods}",
             f"base_time = {_fmt(sf.base_time)}", f"costs = {_fmt_vec(sf.costs)}", "",
             "[adjustment]", f"kind = {adj.kind}"]
    if adj.kind == "scale":
        lines.append(f"factor = {_fmt(adj.factor)}")
    elif adj.kind == "generator":
        gen = adj.generator if adj.rate is None else f"{adj.generator}:{_fmt(adj.rate)}"
        lines.append(f"generator = {gen}")
        if adj.generator_knots:
            lines.append(f"generator_knots = {_fmt_pairs(adj.generator_knots)}")
    knots = dict(adj.knots)
    for t, a, p in zip(sf.times, sf.exponents, sf.prices):
        lines += ["", f"[time {_fmt(t)}]", f"exponents = {_fmt_vec(a)}", f"prices = {_fmt_vec(p)}"]
        if t in knots:
            lines.append(f"adjust = {_fmt_pairs(knots[t])}")
    return "\n".join(lines) + "\n"


def load_scenario(path) -> ScenarioFile:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def to_scenario(sf: ScenarioFile) -> Scenario:
    return Scenario.cobb_douglas(sf.times, sf.exponents, sf.prices)


def from_scenario(s: Scenario, costs, base_time: float,
                  adjustment: Optional[AdjustmentSpec] = None) -> ScenarioFile:
    """File representation of an in-memory Cobb-Douglas scenario."""
    if not all(isinstance(C, CobbDouglas) for C in s.utilities):
        raise TypeError("only Cobb-Douglas scenarios can be written to a scenario file")
    return ScenarioFile(SCHEMA_VERSION, s.n, tuple(s.times), tuple(C.exponents for C in s.utilities),
                        tuple(P.prices for P in s.prices), tuple(float(c) for c in costs),
                        float(base_time), adjustment or AdjustmentSpec())


def _tabulated_generator(pairs) -> CostGenerator:
    xs = np.array([x for x, _ in pairs])
    ys = np.array([y for _, y in pairs])
    spline = PchipInterpolator(xs, ys, extrapolate=False)
    left = (ys[1] - ys[0]) / (xs[1] - xs[0])
    right = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])

    def v(t, c):
        c = np.asarray(c, dtype=float)
        out = spline(np.clip(c, xs[0], xs[-1]))
        out = np.where(c < xs[0], ys[0] + left * (c - xs[0]), out)
        return np.where(c > xs[-1], ys[-1] + right * (c - xs[-1]), out)

    return CostGenerator(v, label="tabulated")


def build_generator(spec: AdjustmentSpec) -> CostGenerator:
    k = spec.rate
    if spec.generator == "zero":
        return CostGenerator(lambda t, c: np.zeros_like(c), label="zero")
    if spec.generator == "const":
        return CostGenerator(lambda t, c: np.full_like(c, k), label=f"const:{k!r}")
    if spec.generator == "relative":
        return CostGenerator(lambda t, c: k * c, label=f"relative:{k!r}")
    if spec.generator == "tabulated":
        return _tabulated_generator(spec.generator_knots)
    raise ValueError(f"unknown generator {spec.generator!r}")


def adjustment_family(sf: ScenarioFile, base_time: Optional[float] = None):
    """Adjustment family for :func:`konus.index.index_series`.

    Returns ``None`` (naive), a generator, a callable ``(t_to, t_from)``, or
    a per-time mapping for tabulated adjustments.
    """
    base = sf.base_time if base_time is None else base_time
    spec = sf.adjustment
    if spec.kind == "naive":
        return None
    if spec.kind == "scale":
        return lambda t_to, t_from: scaling_adjustment(spec.factor, t_from, t_to)
    if spec.kind == "generator":
        return build_generator(spec)
    if base != sf.base_time:
        raise ScenarioParseError("base_time", "tabulated adjustments are tied to the file's base_time")
    table = {base: naive_adjustment(base, base)}
    for t, pairs in spec.knots:
        table[t] = tabulated_adjustment([c for c, _ in pairs], [y for _, y in pairs], base, t)
    return table

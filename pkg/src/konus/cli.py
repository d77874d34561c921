"""Command-line front end.

    konus index     --scenario FILE [--base-time T] [--output FILE] [--tolerance X] [--reference cost|utility]
    konus validate  --scenario FILE [--tolerance X]
    konus transport --connection SPEC --from P --to Q --initial X [--steps N]

Exit codes: 0 success, 1 input error, 2 numeric failure, 3 validation failure.
"""

from __future__ import annotations

import argparse
import io
import math
import sys
from typing import Callable, Optional

import numpy as np

from .basket import basket_record_by_cost, minimal_basket, minimal_basket_closed_form, minimal_section
from .core import DEFAULT_TOL, CobbDouglas, validate_convex_to_origin, validate_cross_section
from .errors import KonusError
from .index import Scenario, index_series
from .scenario import ScenarioParseError, adjustment_family, load_scenario, to_scenario
from .transport import (
    DEFAULT_STEPS,
    CostGenerator,
    compose_adjustments,
    flow_adjustment,
    invert_adjustment,
    naive_adjustment,
    transport_1d,
)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_INVALID = 0, 1, 2, 3
GROUP_LAW_TOL = 1e-7


def format_number(x: float) -> str:
    """Twelve digits after the point in the everyday range, scientific outside it."""
    x = float(x)
    if x == 0 or 1e-3 <= abs(x) < 1e6:
        return f"{x:.12f}"
    return f"{x:.11e}"


# ---------------------------------------------------------------- index

def compute_rows(s: Scenario, family, base_time: float, costs, tol: float = DEFAULT_TOL,
                 reference: str = "cost"):
    """Result-table rows in time-major, cost-minor order.

    Returns ``(rows, failures)`` where each row is ``(t, c, index, adjusted, basket)``
    and ``failures`` lists ``(t, c, message)``.
    """
    if reference == "utility":
        return _fixed_utility_rows(s, base_time, costs, tol)
    series = index_series(s, family, base_time, costs, tol)
    rows, failures = [], []
    for i, t in enumerate(s.times):
        for entry in series:
            if t in entry.errors:
                failures.append((t, entry.reference_cost, entry.errors[t]))
                continue
            rows.append((t, entry.reference_cost, entry.values[i], entry.adjusted_costs[i], entry.baskets[i]))
    return rows, failures


def _fixed_utility_rows(s: Scenario, base_time, costs, tol):
    # comparison convention: hold the base-time utility number fixed across times
    C_a, P_a = s.at(base_time)
    rows, failures = [], []
    for t, C_t, P_t in zip(s.times, s.utilities, s.prices):
        for c in costs:
            try:
                u = basket_record_by_cost(C_a, P_a, c, tol).u
                rec = minimal_basket(C_t, P_t, u, tol) if t != base_time else basket_record_by_cost(C_a, P_a, c, tol)
                adjusted = rec.c if t != base_time else c
                rows.append((t, c, adjusted / c, adjusted, rec.q_star))
            except (KonusError, ValueError) as exc:
                failures.append((t, c, str(exc)))
    return rows, failures


def write_table(rows, n: int, stream) -> None:
    header = ["time", "reference_cost", "index", "adjusted_cost"] + [f"q{i + 1}" for i in range(n)]
    stream.write(",".join(header) + "\n")
    for t, c, index, adjusted, basket in rows:
        cells = [t, c, index, adjusted, *basket]
        stream.write(",".join(format_number(x) for x in cells) + "\n")


def cmd_index(args) -> int:
    sf = load_scenario(args.scenario)
    base = sf.base_time if args.base_time is None else args.base_time
    if base not in sf.times:
        raise ScenarioParseError("base_time", f"{base!r} is not one of the grid times")
    family = adjustment_family(sf, base)
    rows, failures = compute_rows(to_scenario(sf), family, base, sf.costs, args.tolerance, args.reference)
    if failures:
        for t, c, msg in failures:
            print(f"numeric failure at time={t!r}, cost={c!r}: {msg}", file=sys.stderr)
        return EXIT_NUMERIC
    buf = io.StringIO(newline="\n")
    write_table(rows, sf.goods, buf)
    data = buf.getvalue().encode("ascii")
    if args.output in (None, "-"):
        sys.stdout.buffer.write(data) if hasattr(sys.stdout, "buffer") else sys.stdout.write(data.decode())
        sys.stdout.flush()
    else:
        with open(args.output, "wb") as fh:
            fh.write(data)
    return EXIT_OK


# ---------------------------------------------------------------- validate

def _pair_family(family, base_time, grid) -> Optional[Callable]:
    """``(t_to, t_from) -> adjustment`` if the family defines every time pair."""
    if family is None:
        return lambda t_to, t_from: naive_adjustment(t_from, t_to)
    if isinstance(family, CostGenerator):
        return lambda t_to, t_from: flow_adjustment(family, t_from, t_to, grid)
    if callable(family):
        return family
    return None


def validation_checks(s: Scenario, family, base_time: float, costs, tol: float = DEFAULT_TOL):
    """Yield ``(name, passed, detail)`` for every structural and group-law check."""
    costs = np.asarray(costs, dtype=float)
    for t, C, P in zip(s.times, s.utilities, s.prices):
        levels = [C.value(c / (C.n * P.p)) for c in costs]
        name = f"convex-to-origin t={t!r}"
        try:
            reports = [validate_convex_to_origin(C, u, tol=tol) for u in levels]
            bad = [r for r in reports if not r.passed]
            yield name, not bad, (bad[0].message if bad else "")
        except (KonusError, ValueError) as exc:
            yield name, False, str(exc)

        name = f"minimal-basket section t={t!r}"
        try:
            ok = validate_cross_section(minimal_section(C, P, tol), levels, tol)
            yield name, ok, "" if ok else "C(X(u)) != u"
        except (KonusError, ValueError) as exc:
            yield name, False, str(exc)

        if isinstance(C, CobbDouglas):
            name = f"closed form vs numeric t={t!r}"
            try:
                worst = 0.0
                for u in levels:
                    exact = minimal_basket_closed_form(C.exponents, P, u)
                    approx = minimal_basket(C, P, u, tol, method="numeric")
                    worst = max(worst, float(np.max(np.abs(approx.q_star / exact.q_star - 1))))
                yield name, worst <= 1e-6, f"max relative gap {worst:.3g}"
            except (KonusError, ValueError) as exc:
                yield name, False, str(exc)

    pairs = _pair_family(family, base_time, costs)
    if pairs is None:
        for t in s.times:
            name = f"adjustment monotone t={t!r}"
            try:
                adj = family[t] if t in family else naive_adjustment(base_time, t)
                out = adj(costs)
                ok = bool(np.all(np.diff(out) > 0)) and bool(np.all(out > 0))
                if t == base_time:
                    ok = ok and bool(np.all(out == costs))
                yield name, ok, "" if ok else "adjusted costs not strictly increasing"
            except (KonusError, ValueError) as exc:
                yield name, False, str(exc)
        return

    def gap(x, y):
        return float(np.max(np.abs(x / y - 1)))

    try:
        same = pairs(base_time, base_time)(costs)
        yield "adjustment identity", bool(np.all(same == costs)), ""
    except (KonusError, ValueError) as exc:
        yield "adjustment identity", False, str(exc)
    previous = base_time
    for t in s.times:
        if t == base_time:
            continue
        try:
            there = pairs(t, base_time)
            back = pairs(base_time, t)
            g = gap(compose_adjustments(back, there)(costs), costs)
            yield f"adjustment inverse t={t!r}", g <= GROUP_LAW_TOL, f"max relative gap {g:.3g}"
            g = gap(invert_adjustment(there)(there(costs)), costs)
            yield f"adjustment invert t={t!r}", g <= GROUP_LAW_TOL, f"max relative gap {g:.3g}"
            if previous != base_time:
                chained = compose_adjustments(pairs(t, previous), pairs(previous, base_time))
                g = gap(chained(costs), there(costs))
                yield f"adjustment composition t={t!r}", g <= GROUP_LAW_TOL, f"max relative gap {g:.3g}"
        except (KonusError, ValueError) as exc:
            yield f"adjustment group laws t={t!r}", False, str(exc)
        previous = t


def run_validate(s: Scenario, family, base_time: float, costs, tol: float = DEFAULT_TOL, out=None) -> int:
    out = out or sys.stdout
    failed = False
    for name, passed, detail in validation_checks(s, family, base_time, costs, tol):
        if passed:
            out.write(f"PASS {name}\n")
        else:
            failed = True
            out.write(f"FAIL {name}: {detail}\n")
    return EXIT_INVALID if failed else EXIT_OK


def cmd_validate(args) -> int:
    sf = load_scenario(args.scenario)
    base = sf.base_time if args.base_time is None else args.base_time
    if base not in sf.times:
        raise ScenarioParseError("base_time", f"{base!r} is not one of the grid times")
    return run_validate(to_scenario(sf), adjustment_family(sf, base), base, sf.costs, args.tolerance)


# ---------------------------------------------------------------- transport

def parse_connection(spec: str) -> Callable[[float], float]:
    """``zero``, ``const:K`` (A = K) or ``linear:K`` (A(x) = K x)."""
    name, _, arg = spec.partition(":")
    try:
        if name == "zero" and not arg:
            return lambda x: 0.0
        k = float(arg)
        if not math.isfinite(k):
            raise ValueError
    except ValueError:
        raise ScenarioParseError("connection", f"malformed connection spec {spec!r}") from None
    if name == "const":
        return lambda x: k
    if name == "linear":
        return lambda x: k * x
    raise ScenarioParseError("connection", f"malformed connection spec {spec!r}")


def cmd_transport(args) -> int:
    A = parse_connection(args.connection)
    if args.to < args.start:
        raise ScenarioParseError("to", "--to must not be smaller than --from")
    if args.steps < 1:
        raise ScenarioParseError("steps", "--steps must be >= 1")
    print(format_number(transport_1d(A, args.start, args.to, args.initial, args.steps)))
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="konus", description="Cost-of-living index computations.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tolerance", type=float, default=DEFAULT_TOL, help="numeric tolerance (default 1e-8)")

    p = sub.add_parser("index", parents=[common], help="compute index series for a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--base-time", type=float, default=None)
    p.add_argument("--output", default=None, help="output CSV path (default: standard output)")
    p.add_argument("--reference", choices=("cost", "utility"), default="cost",
                   help="propagate a reference cost through the adjustment (default) "
                        "or hold the base utility level fixed")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("validate", parents=[common], help="check a scenario's structural hypotheses")
    p.add_argument("--scenario", required=True)
    p.add_argument("--base-time", type=float, default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("transport", parents=[common], help="scalar parallel transport along a connection")
    p.add_argument("--connection", required=True, help="zero | const:K | linear:K")
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", type=float, required=True)
    p.add_argument("--initial", type=float, required=True)
    p.add_argument("--steps", type=int, default=DEFAULT_STEPS)
    p.set_defaults(func=cmd_transport)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ScenarioParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (KonusError, ValueError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

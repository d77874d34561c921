import io
import math
import subprocess
import sys

import numpy as np
import pytest

from conftest import DATA, FAMILY_TIMES, SCENARIOS, circle_utility
from konus import PriceFunctional, Scenario
from konus.cli import EXIT_INPUT, EXIT_INVALID, EXIT_NUMERIC, EXIT_OK, format_number, main, run_validate
from konus.scenario import (
    AdjustmentSpec,
    ScenarioParseError,
    format_scenario,
    from_scenario,
    parse_scenario,
)

MODEL = SCENARIOS / "two_good_model.scn"

HEADER = """[scenario]
version = 1
goods = 2
base_time = 1
costs = {costs}

[adjustment]
{adjustment}
"""


def scenario_text(costs="1, 2, 3, 6", adjustment="kind = naive", times=(1, 1.5, 2), prices=None):
    parts = [HEADER.format(costs=costs, adjustment=adjustment)]
    for t in times:
        p = prices or "1, 1"
        parts.append(f"[time {t}]\nexponents = {t}, 1\nprices = {p}\n")
    return "\n".join(parts)


def run(args, capsys):
    code = main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, text, name="s.scn"):
    path = tmp_path / name
    path.write_text(text)
    return path


def parse_table(text):
    lines = text.splitlines()
    return lines[0].split(","), [[float(x) for x in line.split(",")] for line in lines[1:]]


# ---------------------------------------------------------------- number format

@pytest.mark.parametrize("x, text", [
    (1.0, "1.000000000000"),
    (math.exp(-1.0), "0.367879441171"),
    (0.0, "0.000000000000"),
    (1.5e-7, "1.50000000000e-07"),
    (2.5e8, "2.50000000000e+08"),
])
def test_format_number(x, text):
    assert format_number(x) == text


# ---------------------------------------------------------------- index

def test_index_two_good_model(capsys):
    code, out, _ = run(["index", "--scenario", MODEL], capsys)
    assert code == EXIT_OK
    header, rows = parse_table(out)
    assert header == ["time", "reference_cost", "index", "adjusted_cost", "q1", "q2"]
    assert len(rows) == len(FAMILY_TIMES) * 4
    assert all(line.split(",")[2] == "1.000000000000" for line in out.splitlines()[1:])
    # time-major, cost-minor
    assert [r[0] for r in rows] == sorted(r[0] for r in rows)
    for t, c, _, _, q1, q2 in rows:
        assert q1 == pytest.approx(t * c / (1 + t), abs=1e-11)
        assert q2 == pytest.approx(c / (1 + t), abs=1e-11)


def test_index_matches_golden_file(tmp_path, capsys):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["index", "--scenario", MODEL, "--output", first], capsys)[0] == EXIT_OK
    assert run(["index", "--scenario", MODEL, "--output", second], capsys)[0] == EXIT_OK
    golden = (DATA / "two_good_model_index.csv").read_bytes()
    assert first.read_bytes() == second.read_bytes() == golden
    assert b"\r" not in golden and golden.isascii()


def test_index_scale_adjustment(capsys):
    code, out, _ = run(["index", "--scenario", SCENARIOS / "two_good_model_scaled.scn"], capsys)
    assert code == EXIT_OK
    _, rows = parse_table(out)
    for t, c, index, adjusted, *_ in rows:
        assert index == pytest.approx(adjusted / c, abs=1e-12)
        assert index == pytest.approx(2.0 ** (t - 1.0), rel=1e-12)


def test_index_flow_scenario(capsys):
    code, out, _ = run(["index", "--scenario", SCENARIOS / "two_good_model_flow.scn"], capsys)
    assert code == EXIT_OK
    _, rows = parse_table(out)
    for t, c, index, adjusted, *_ in rows:
        assert index == pytest.approx(math.exp(0.1 * (t - 1.0)), rel=1e-9)


def test_index_base_time_flag(capsys):
    code, out, _ = run(["index", "--scenario", SCENARIOS / "two_good_model_scaled.scn", "--base-time", "2"], capsys)
    assert code == EXIT_OK
    _, rows = parse_table(out)
    assert all(r[2] == pytest.approx(2.0 ** (r[0] - 2.0), rel=1e-12) for r in rows)
    assert run(["index", "--scenario", MODEL, "--base-time", "1.1"], capsys)[0] == EXIT_INPUT


def test_index_fixed_utility_reference(capsys):
    code, out, _ = run(["index", "--scenario", MODEL, "--reference", "utility"], capsys)
    assert code == EXIT_OK
    _, rows = parse_table(out)
    for t, c, index, adjusted, q1, q2 in rows:
        u = (c / 2) ** 2  # base-time utility of cost c at t = 1
        expected = (t ** (1 / (t + 1)) + t ** (-t / (t + 1))) * u ** (1 / (t + 1))
        assert adjusted == pytest.approx(expected, rel=1e-10)
        assert q1 ** t * q2 == pytest.approx(u, rel=1e-9)


def test_index_tabulated_adjustment(tmp_path, capsys):
    text = scenario_text(adjustment="kind = tabulated", times=(1, 2)).replace(
        "[time 2]\n", "[time 2]\nadjust = 1:1.1, 3:3.3, 6:6.6\n")
    code, out, _ = run(["index", "--scenario", write(tmp_path, text)], capsys)
    assert code == EXIT_OK
    _, rows = parse_table(out)
    assert [r[2] for r in rows if r[0] == 2.0] == pytest.approx([1.1] * 4, rel=1e-12)


def test_index_empty_cost_grid(tmp_path, capsys):
    code, _, err = run(["index", "--scenario", write(tmp_path, scenario_text(costs=""))], capsys)
    assert code == EXIT_INPUT
    assert "cost grid empty" in err


def test_index_numeric_failure_names_cell(tmp_path, capsys):
    text = scenario_text(adjustment="kind = generator\ngenerator = const:-2")
    code, out, err = run(["index", "--scenario", write(tmp_path, text)], capsys)
    assert code == EXIT_NUMERIC
    assert out == ""
    assert "time=2.0, cost=1.0" in err


def test_index_missing_file(tmp_path, capsys):
    code, _, err = run(["index", "--scenario", tmp_path / "nope.scn"], capsys)
    assert code == EXIT_INPUT and "error" in err


def test_bad_arguments(capsys):
    assert run(["index"], capsys)[0] == EXIT_INPUT
    assert run(["frobnicate"], capsys)[0] == EXIT_INPUT


# ---------------------------------------------------------------- validate

def test_validate_two_good_models(capsys):
    for name in ("two_good_model.scn", "two_good_model_scaled.scn", "two_good_model_flow.scn"):
        code, out, _ = run(["validate", "--scenario", SCENARIOS / name], capsys)
        assert code == EXIT_OK, out
        assert "FAIL" not in out and out.count("PASS") >= 10


def test_validate_zero_price(tmp_path, capsys):
    code, _, err = run(["validate", "--scenario", write(tmp_path, scenario_text(prices="1, 0"))], capsys)
    assert code == EXIT_INPUT
    assert "prices must be strictly positive" in err


def test_validate_circle_fixture():
    s = Scenario((1.0,), (circle_utility(),), (PriceFunctional((1.0, 1.0)),))
    out = io.StringIO()
    assert run_validate(s, None, 1.0, [1.0, 2.0], out=out) == EXIT_INVALID
    report = out.getvalue()
    assert "FAIL convex-to-origin t=1.0: midpoint" in report


# ---------------------------------------------------------------- transport

@pytest.mark.parametrize("spec, lo, hi, x, expected", [
    ("zero", "0", "3", "1", "1.000000000000"),
    ("const:1", "0", "1", "1", "0.367879441171"),
])
def test_transport_examples(capsys, spec, lo, hi, x, expected):
    code, out, _ = run(["transport", "--connection", spec, "--from", lo, "--to", hi, "--initial", x], capsys)
    assert code == EXIT_OK
    assert out.strip() == expected


def test_transport_linear(capsys):
    code, out, _ = run(["transport", "--connection", "linear:1", "--from", "0", "--to", "1", "--initial", "2"], capsys)
    assert code == EXIT_OK
    assert float(out) == pytest.approx(2 * math.exp(-0.5), abs=1e-11)


@pytest.mark.parametrize("args", [
    ["--connection", "quadratic:1", "--from", "0", "--to", "1", "--initial", "1"],
    ["--connection", "const:x", "--from", "0", "--to", "1", "--initial", "1"],
    ["--connection", "const:1", "--from", "1", "--to", "0", "--initial", "1"],
    ["--connection", "const:1", "--from", "0", "--to", "1", "--initial", "1", "--steps", "0"],
])
def test_transport_bad_input(capsys, args):
    code, _, err = run(["transport", *args], capsys)
    assert code == EXIT_INPUT and err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "konus", "transport", "--connection", "const:1",
                           "--from", "0", "--to", "1", "--initial", "1"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout == "0.367879441171\n"


# ---------------------------------------------------------------- scenario files

def test_round_trip_from_memory():
    s = Scenario.cobb_douglas((0.5, 1.0, 2.25), [(1.1, 0.3, 2.0)] * 3, [(1.0, 1.0 / 3.0, 7.5)] * 3)
    for adj in (AdjustmentSpec(), AdjustmentSpec("scale", factor=1.05),
                AdjustmentSpec("generator", generator="relative", rate=0.1 / 3)):
        sf = from_scenario(s, [0.1, 2.0 / 3.0, 5.0], 1.0, adj)
        assert parse_scenario(format_scenario(sf)) == sf


def test_round_trip_shipped_files():
    for path in SCENARIOS.glob("*.scn"):
        sf = parse_scenario(path.read_text())
        assert parse_scenario(format_scenario(sf)) == sf


def test_round_trip_tabulated():
    text = scenario_text(adjustment="kind = tabulated", times=(1, 2)).replace(
        "[time 2]\n", "[time 2]\nadjust = 1:1.1, 3:3.3, 6:6.6\n")
    sf = parse_scenario(text)
    assert parse_scenario(format_scenario(sf)) == sf
    text = scenario_text(adjustment="kind = generator\ngenerator = tabulated\ngenerator_knots = 1:0.1, 6:0.3")
    sf = parse_scenario(text)
    assert parse_scenario(format_scenario(sf)) == sf


@pytest.mark.parametrize("edit, field", [
    (lambda t: t.replace("version = 1", "version = 2"), "version"),
    (lambda t: t.replace("goods = 2", "goods = 65"), "goods"),
    (lambda t: t.replace("costs = 1, 2, 3, 6", "costs = 1, 3, 2"), "costs"),
    (lambda t: t.replace("kind = naive", "kind = magic"), "kind"),
    (lambda t: t.replace("exponents = 2, 1", "exponents = 2"), "exponents"),
    (lambda t: t.replace("exponents = 2, 1", "exponents = 2, -1"), "exponents"),
    (lambda t: t.replace("[time 2]", "[time 1.5]"), "time"),
    (lambda t: t + "colour = blue\n", "colour"),
    (lambda t: t.replace("prices = 1, 1", "prices = 1, one", 1), "prices"),
])
def test_parse_errors_name_the_field(edit, field):
    with pytest.raises(ScenarioParseError) as info:
        parse_scenario(edit(scenario_text()))
    assert info.value.field == field
    assert field in str(info.value)


def test_generator_catalogue_parsing():
    for spec in ("zero", "const:0.5", "relative:-0.1"):
        sf = parse_scenario(scenario_text(adjustment=f"kind = generator\ngenerator = {spec}"))
        assert sf.adjustment.generator == spec.split(":")[0]
    with pytest.raises(ScenarioParseError):
        parse_scenario(scenario_text(adjustment="kind = generator\ngenerator = relative"))
    with pytest.raises(ScenarioParseError):
        parse_scenario(scenario_text(adjustment="kind = generator\ngenerator = exp:1"))


def test_index_tabulated_generator(tmp_path, capsys):
    text = scenario_text(adjustment="kind = generator\ngenerator = tabulated\ngenerator_knots = 1:0.1, 6:0.6")
    code, out, _ = run(["index", "--scenario", write(tmp_path, text)], capsys)
    assert code == EXIT_OK
    _, rows = parse_table(out)
    # the knots describe v(c) = 0.1 c
    for t, c, index, *_ in rows:
        assert index == pytest.approx(np.exp(0.1 * (t - 1.0)), rel=1e-9)

import json
from pathlib import Path

import pytest

from solenoids.cli import CSV_HEADER, fmt, main

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
FAST = ["current_eval", "kronecker_pairing", "rs_class_suspension", "thin_ae_pairing", "thom_cantor_vertical", "homotopy_graph"]


def run(tmp_path, name, *extra):
    out = tmp_path / name
    code = main(["run", str(SCENARIOS / f"{name}.json"), "--out", str(out), *extra])
    return code, out


def summary(out):
    pairs = (line.split(" = ", 1) for line in (out / "summary.txt").read_text().splitlines())
    return dict(pairs)


def write(tmp_path, obj):
    p = tmp_path / "s.json"
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return p


@pytest.mark.parametrize("name", FAST)
def test_scenarios_succeed_and_repeat_bytewise(tmp_path, name):
    code, out = run(tmp_path, name)
    assert code == 0 and summary(out)["status"] == "ok"
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    run(tmp_path, name)
    assert first == {p.name: p.read_bytes() for p in out.iterdir()}


def test_pairing_summary_keys(tmp_path):
    _, out = run(tmp_path, "kronecker_pairing")
    s = summary(out)
    assert float(s["abs_diff"]) < 1e-4
    assert abs(float(s["pairing_exact"]) - float(s["pairing_via_cup"])) == pytest.approx(float(s["abs_diff"]))


def test_exhaustion_csv(tmp_path):
    code, out = run(tmp_path, "kronecker_exhaustion")
    lines = (out / "sequence.csv").read_text().splitlines()
    assert code == 0 and tuple(lines[0].split(",")) == CSV_HEADER
    rows = [line.split(",") for line in lines[1:]]
    assert [r[0] for r in rows] == ["0", "1", "2"]
    errors = [abs(float(r[2]) - float(summary(out)["cup"])) for r in rows]
    assert all(e <= float(r[3]) for e, r in zip(errors, rows))


def test_tangency_demo_refuses_with_lower_bound(tmp_path, capsys):
    code, out = run(tmp_path, "fat_tangency_demo")
    s = summary(out)
    assert code == 2 and s["status"] == "refused"
    assert float(s["lower_bound"]) == pytest.approx(0.2, abs=1e-12)
    assert s["certified"] == s["perturbations"] == "20"
    assert "not null-transverse" in capsys.readouterr().err


def test_depth_override_beyond_tree_is_input_error(tmp_path):
    code, _ = run(tmp_path, "thin_ae_pairing", "--depth", "13")
    assert code == 1


def test_overrides_apply(tmp_path):
    _, out = run(tmp_path, "thin_ae_pairing", "--depth", "10", "--seed", "7")
    s = summary(out)
    assert s["seed"] == "7" and float(s["mass_bound"]) == pytest.approx(2.0**-10)


@pytest.mark.parametrize(
    "obj, key",
    [
        ("{not json", "file"),
        ({"task": "pairing", "model": {"family": "kronecker", "slope": 0.4}}, "second"),
        ({"task": "fly"}, "task"),
        ({"task": "rs-class", "model": {"family": "kronecker", "slope": 0.4}, "colour": 1}, "colour"),
        ({"task": "rs-class", "model": {"family": "kronecker", "slop": 0.4}}, "model.slop"),
        ({"task": "rs-class", "model": {"family": "graph"}}, "model.transversal"),
        ({"task": "rs-class", "seed": 1.5, "model": {"family": "kronecker", "slope": 0.4}}, "seed"),
    ],
)
def test_schema_errors_exit_1_naming_key(tmp_path, capsys, obj, key):
    code = main(["run", str(write(tmp_path, obj)), "--out", str(tmp_path / "o")])
    assert code == 1
    assert key in capsys.readouterr().err


def test_non_additive_masses_rejected(tmp_path, capsys):
    code = main(["run", str(SCENARIOS / "nonadditive_masses.json"), "--out", str(tmp_path / "o")])
    assert code == 1 and "node '1'" in capsys.readouterr().err


def test_validate_kronecker_passes(tmp_path, capsys):
    assert main(["validate", str(SCENARIOS / "kronecker_pairing.json")]) == 0
    report = capsys.readouterr().out
    assert "immersion_rank = pass" in report and "fail" not in report


def test_validate_bernoulli_odometer_reports_deviation(capsys):
    assert main(["validate", str(SCENARIOS / "odometer_bernoulli03.json")]) == 1
    report = capsys.readouterr().out
    assert "holonomy_invariance = fail (deviation 0.39999999999999991)" in report


def test_validate_lists_every_check(tmp_path, capsys):
    main(["validate", str(SCENARIOS / "nonadditive_masses.json"), "--out", str(tmp_path)])
    report = (tmp_path / "validation.txt").read_text()
    assert "mass_additivity = fail (non-additive at node(s) '1')" in report
    assert "schema = pass" in report and "immersion_rank" in report


def test_number_format_round_trips():
    for x in (0.1, 1 / 3, 2.0**-40, 12345.678):
        assert float(fmt(x)) == x
    assert fmt([1, 0.5]) == "1 0.5" and fmt(None) == "" and fmt(True) == "true"

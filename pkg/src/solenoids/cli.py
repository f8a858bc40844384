"""Scenario runner.

A scenario is a JSON object; see README.md for the schema.  ``run`` writes
``summary.txt`` (``key = value`` lines) and, for tasks that produce a
sequence, ``sequence.csv``.  Exit codes: 0 success, 1 input error,
2 contract refusal.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cantor import build_cantor, build_return_map, holonomy_invariance_deviation, mass_additivity_violations
from .currents import QuadratureSpec, evaluate_current, homotopy_drift, parse_homotopy, rs_class, stokes_residual
from .errors import ContractRefusal, SolenoidError
from .forms import Subtorus, forms_from, random_trig_form
from .intersection import (
    NULL_TOLERANCE,
    ae_pairing,
    detect_tangencies,
    exhaustion_estimate,
    pairing_exact,
    pairing_via_cup,
    pairing_via_thom,
    perturb_to_transversality,
    remark_certificate,
)
from .models import (
    CantorSuspension,
    GraphSolenoid,
    LinearTorusFoliation,
    RANK_TOL,
    horizontal_circles,
    immersion_margin,
    kronecker,
    parse_profile,
    vertical_circle,
)

EXIT_OK, EXIT_INPUT, EXIT_REFUSED = 0, 1, 2
CSV_HEADER = ("step", "parameter", "value", "error_bound")

TASK_FIELDS = {
    "current-eval": ("model", "forms"),
    "rs-class": ("model",),
    "stokes-check": ("model",),
    "homotopy-check": ("model", "homotopies"),
    "pairing": ("model", "second"),
    "exhaustion": ("model", "second", "radii"),
    "thom-pairing": ("model", "subtorus", "rhos"),
    "ae-pairing": ("model",),
    "perturb": ("model", "subtorus", "eps"),
    "tangency-demo": ("model", "second"),
}
TOP_KEYS = {
    "task", "seed", "depth", "quad_order", "output", "model", "second", "subtorus", "forms", "form_count",
    "max_freq", "homotopies", "radii", "base", "rhos", "eps", "delta", "retries", "boxes", "tolerance",
    "perturbation_count", "perturbation_sup", "depths", "description",
}
MODEL_KEYS = {
    "kronecker": {"slope", "offset", "density", "depth"},
    "linear": {"directions", "offset", "density", "depth", "transversal"},
    "horizontal-circles": {"transversal", "offset_x"},
    "vertical-circle": {"x"},
    "graph": {"transversal", "profile", "ambient", "window"},
    "suspension": {"transversal", "return_map"},
}


class ScenarioError(SolenoidError):
    """The scenario file does not match the schema; ``key`` is the culprit."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class Scenario:
    task: str
    raw: dict
    seed: int = 0
    depth: int | None = None
    quad_order: int = 64
    output: str | None = None
    source: Path = field(default_factory=Path)

    @property
    def quad(self) -> QuadratureSpec:
        return QuadratureSpec(order=self.quad_order, depth=self.depth)

    def get(self, key, default=None):
        return self.raw.get(key, default)

    def out_dir(self) -> Path:
        if self.output:
            return Path(self.output)
        return Path("out") / self.source.stem


def load_scenario(path: Path, overrides: argparse.Namespace | None = None) -> Scenario:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ScenarioError("file", f"no such scenario {path}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError("file", f"not valid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ScenarioError("file", "top level must be an object")
    unknown = sorted(set(raw) - TOP_KEYS)
    if unknown:
        raise ScenarioError(unknown[0], "unknown key")
    task = raw.get("task")
    if task not in TASK_FIELDS:
        raise ScenarioError("task", f"must be one of {', '.join(TASK_FIELDS)}")
    for key in TASK_FIELDS[task]:
        if key not in raw:
            raise ScenarioError(key, f"required by task {task}")
    sc = Scenario(
        task,
        raw,
        seed=_int(raw, "seed", 0),
        depth=_int(raw, "depth", None),
        quad_order=_int(raw, "quad_order", 64),
        output=raw.get("output"),
        source=Path(path),
    )
    if overrides is not None:
        for attr in ("seed", "depth", "quad_order"):
            value = getattr(overrides, attr, None)
            if value is not None:
                setattr(sc, attr, value)
        if getattr(overrides, "out", None):
            sc.output = overrides.out
    return sc


def _int(raw, key, default):
    value = raw.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(key, "must be an integer")
    return value


def _floats(raw, key) -> list[float]:
    value = raw[key]
    values = value if isinstance(value, list) else [value]
    try:
        return [float(v) for v in values]
    except (TypeError, ValueError):
        raise ScenarioError(key, "must be a number or a list of numbers") from None


# -- model construction ----------------------------------------------------------


def build_model(spec, key: str = "model", check: bool = True):
    if not isinstance(spec, dict) or "family" not in spec:
        raise ScenarioError(f"{key}.family", "missing")
    family = spec["family"]
    if family not in MODEL_KEYS:
        raise ScenarioError(f"{key}.family", f"must be one of {', '.join(MODEL_KEYS)}")
    unknown = sorted(set(spec) - MODEL_KEYS[family] - {"family"})
    if unknown:
        raise ScenarioError(f"{key}.{unknown[0]}", "unknown key")
    try:
        model = _build(family, spec, key)
    except KeyError as exc:
        raise ScenarioError(f"{key}.{exc.args[0]}", "missing") from None
    except (TypeError, ValueError) as exc:
        raise ScenarioError(key, str(exc)) from None
    K = getattr(model, "transversal", None)
    if check and K is not None:
        bad = mass_additivity_violations(K)
        if bad:
            raise ScenarioError(f"{key}.transversal.measure", f"masses not additive at node {bad[0]!r}")
    return model


def _transversal(spec, key):
    if "transversal" not in spec:
        raise ScenarioError(f"{key}.transversal", "missing")
    return build_cantor(spec["transversal"])


def _build(family, spec, key):
    if family == "kronecker":
        return kronecker(float(spec["slope"]), int(spec.get("depth", 8)), spec.get("offset", (0.0, 0.0)), float(spec.get("density", 1.0)))
    if family == "linear":
        V = np.asarray(spec["directions"], dtype=float)
        K = build_cantor(spec["transversal"]) if "transversal" in spec else None
        offset = np.asarray(spec.get("offset", np.zeros(V.shape[0])), dtype=float)
        return LinearTorusFoliation(V, offset, K, int(spec.get("depth", 8)), float(spec.get("density", 1.0)))
    if family == "horizontal-circles":
        return horizontal_circles(_transversal(spec, key), float(spec.get("offset_x", 0.0)))
    if family == "vertical-circle":
        return vertical_circle(float(spec["x"]))
    if family == "graph":
        window = tuple(float(v) for v in spec.get("window", (0.0, 1.0)))
        return GraphSolenoid(_transversal(spec, key), parse_profile(spec.get("profile")), spec.get("ambient", "torus"), window)
    return CantorSuspension(_transversal(spec, key), build_return_map(spec.get("return_map")))


def build_subtorus(sc: Scenario, n: int) -> Subtorus:
    spec = sc.get("subtorus")
    if not isinstance(spec, dict) or "normal" not in spec or "centers" not in spec:
        raise ScenarioError("subtorus", "needs normal and centers")
    try:
        return Subtorus(n, tuple(spec["normal"]), tuple(spec["centers"]))
    except (TypeError, ValueError) as exc:
        raise ScenarioError("subtorus", str(exc)) from None


# -- tasks -----------------------------------------------------------------------


@dataclass
class Report:
    summary: dict = field(default_factory=dict)
    rows: list | None = None

    def row(self, parameter, value, error_bound=None):
        if self.rows is None:
            self.rows = []
        self.rows.append((len(self.rows), parameter, value, error_bound))


def task_current_eval(sc, rep):
    m = build_model(sc.get("model"))
    for i, omega in enumerate(forms_from(sc.get("forms"), m.n)):
        value = evaluate_current(m, omega, sc.quad)
        rep.summary[f"current_{i}"] = value
        rep.row(i, value)


def task_rs_class(sc, rep):
    m = build_model(sc.get("model"))
    c = rs_class(m, sc.quad)
    rep.summary["n"] = c.n
    rep.summary["k"] = c.k
    rep.summary["class"] = list(c.coefficients)


def task_stokes_check(sc, rep):
    m = build_model(sc.get("model"))
    rng = np.random.default_rng(sc.seed)
    count, max_freq = _int(sc.raw, "form_count", 50), _int(sc.raw, "max_freq", 3)
    worst = 0.0
    for i in range(count):
        residual = stokes_residual(m, random_trig_form(m.n, m.k - 1, rng, max_freq=max_freq), sc.quad)
        worst = max(worst, residual)
        rep.row(i, residual)
    rep.summary["forms"] = count
    rep.summary["max_residual"] = worst


def task_homotopy_check(sc, rep):
    m = build_model(sc.get("model"))
    for i, spec in enumerate(sc.get("homotopies")):
        H = parse_homotopy(spec)
        drift = homotopy_drift(m, H, sc.quad)
        rep.summary[f"drift_{i}_{H.perturbation.kind}"] = drift
        rep.row(H.perturbation.kind, drift)


def task_pairing(sc, rep):
    m1, m2 = build_model(sc.get("model")), build_model(sc.get("second"), "second")
    exact = pairing_exact(m1, m2, sc.depth)
    cup = pairing_via_cup(m1, m2, sc.quad)
    rep.summary.update(pairing_exact=exact, pairing_via_cup=cup, abs_diff=abs(exact - cup))


def task_exhaustion(sc, rep):
    m1, m2 = build_model(sc.get("model")), build_model(sc.get("second"), "second")
    base = sc.get("base")
    b1, b2 = (base, base) if base is None or not isinstance(base, list) or len(base) != 2 else base
    steps = exhaustion_estimate(m1, m2, _floats(sc.raw, "radii"), b1, b2, sc.depth)
    for step in steps:
        rep.row(step.radius1, step.estimate, step.error_bound)
    rep.summary["estimate"] = steps[-1].estimate
    rep.summary["error_bound"] = steps[-1].error_bound
    rep.summary["cup"] = pairing_via_cup(m1, m2, sc.quad)


def task_thom_pairing(sc, rep):
    m = build_model(sc.get("model"))
    N = build_subtorus(sc, m.n)
    rhos = _floats(sc.raw, "rhos")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # panel refinement is reported through the quadrature
        terms = pairing_via_thom(m, N, rhos, sc.quad)
    prev = None
    for rho, value in zip(rhos, terms):
        rep.row(rho, value, None if prev is None else abs(value - prev))
        prev = value
    rep.summary["final_term"] = terms[-1]
    rep.summary["cauchy_gap"] = abs(terms[-1] - terms[-2]) if len(terms) > 1 else math.nan
    rep.summary["ae_pairing"] = ae_pairing(m, N, sc.depth, _tol(sc)).value


def _tol(sc):
    return float(sc.get("tolerance", NULL_TOLERANCE))


def task_ae_pairing(sc, rep):
    m1 = build_model(sc.get("model"))
    m2 = build_subtorus(sc, m1.n) if "second" not in sc.raw else build_model(sc.get("second"), "second")
    result = ae_pairing(m1, m2, sc.depth, _tol(sc))
    rep.summary.update(
        ae_pairing=result.value,
        mass_bound=result.mass_bound,
        excluded_mass=result.excluded_mass,
        flagged_pairs=result.flagged_pairs,
    )
    if "second" in sc.raw:
        rep.summary["pairing_via_cup"] = pairing_via_cup(m1, m2, sc.quad)


def task_perturb(sc, rep):
    m = build_model(sc.get("model"))
    N = build_subtorus(sc, m.n)
    before = rs_class(m, sc.quad)
    retries = _int(sc.raw, "retries", 100)
    boxes = _int(sc.raw, "boxes", 4)
    delta = sc.get("delta")
    for eps in _floats(sc.raw, "eps"):
        result = perturb_to_transversality(m, N, eps, delta, sc.seed, retries, boxes, depth=sc.depth)
        drift = before.distance(rs_class(result.model, sc.quad))
        tag = format(eps, "g")
        rep.summary[f"eps_{tag}_min_margin"] = result.min_margin
        rep.summary[f"eps_{tag}_samples"] = result.samples
        rep.summary[f"eps_{tag}_moved_boxes"] = len(result.moves)
        rep.summary[f"eps_{tag}_class_drift"] = drift
        rep.row(eps, result.min_margin, result.delta)


def task_tangency_demo(sc, rep):
    m1, m2 = build_model(sc.get("model")), build_model(sc.get("second"), "second")
    depths = sc.get("depths")
    ts = detect_tangencies(m1, m2, sc.depth, depths=depths)
    for d, bound in zip(ts.depths, ts.marginal_bounds):
        rep.row(d, max(bound))
    rep.summary["mass_bound"] = ts.mass_bound
    if ts.lower_bound is not None:
        rep.summary["lower_bound"] = ts.lower_bound
    count = _int(sc.raw, "perturbation_count", 20)
    sup = float(sc.get("perturbation_sup", 0.01))
    K1, K2 = m1.transversal, m2.transversal
    certs = [remark_certificate(K1, K2, sc.seed + i, sup) for i in range(count)]
    rep.summary["perturbations"] = count
    rep.summary["certified"] = sum(c.certified for c in certs)
    rep.summary["min_measure_margin"] = min(c.measure_margin for c in certs) if certs else math.nan
    # the pairing itself must refuse
    ae_pairing(m1, m2, sc.depth, _tol(sc))


TASKS = {
    "current-eval": task_current_eval,
    "rs-class": task_rs_class,
    "stokes-check": task_stokes_check,
    "homotopy-check": task_homotopy_check,
    "pairing": task_pairing,
    "exhaustion": task_exhaustion,
    "thom-pairing": task_thom_pairing,
    "ae-pairing": task_ae_pairing,
    "perturb": task_perturb,
    "tangency-demo": task_tangency_demo,
}


# -- output ----------------------------------------------------------------------


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (list, tuple, np.ndarray)):
        return " ".join(fmt(v) for v in value)
    return " ".join(str(value).split())


def write_report(out: Path, rep: Report) -> None:
    out.mkdir(parents=True, exist_ok=True)
    lines = [f"{key} = {fmt(value)}" for key, value in rep.summary.items()]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    if rep.rows is not None:
        with open(out / "sequence.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            writer.writerows([fmt(v) for v in row] for row in rep.rows)


def run(path, overrides=None) -> int:
    try:
        sc = load_scenario(path, overrides)
    except ScenarioError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    rep = Report({"task": sc.task, "seed": sc.seed})
    status = EXIT_OK
    try:
        TASKS[sc.task](sc, rep)
        rep.summary["status"] = "ok"
    except ContractRefusal as exc:
        rep.summary["status"] = "refused"
        rep.summary["diagnostic"] = exc.diagnostic
        for key, value in exc.details.items():
            rep.summary[key] = value
        print(f"refused: {exc.diagnostic}", file=sys.stderr)
        status = EXIT_REFUSED
    except (ScenarioError, SolenoidError, ValueError, KeyError, TypeError) as exc:
        key = getattr(exc, "key", None)
        print(f"input error: {exc}" if key else f"input error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    write_report(sc.out_dir(), rep)
    return status


# -- validate --------------------------------------------------------------------


def validate(path, overrides=None) -> tuple[list[tuple[str, bool, str]], int]:
    checks: list[tuple[str, bool, str]] = []
    try:
        sc = load_scenario(path, overrides)
    except ScenarioError as exc:
        checks.append(("schema", False, str(exc)))
        return checks, EXIT_INPUT
    checks.append(("schema", True, f"task {sc.task}"))
    for key in ("model", "second"):
        if key not in sc.raw:
            continue
        try:
            m = build_model(sc.get(key), key, check=False)
        except (ScenarioError, SolenoidError, ValueError) as exc:
            checks.append((f"{key}.construction", False, str(exc)))
            continue
        checks.extend(_model_checks(key, m, sc.seed))
    return checks, EXIT_OK if all(ok for _, ok, _ in checks) else EXIT_INPUT


def _model_checks(key, m, seed):
    out = []
    K = getattr(m, "transversal", None)
    if K is not None:
        bad = mass_additivity_violations(K)
        detail = "all nodes additive" if not bad else "non-additive at node(s) " + ", ".join(repr(a) for a in bad)
        out.append((f"{key}.mass_additivity", not bad, detail))
    if isinstance(m, CantorSuspension):
        h = m.return_map
        deviation = max(holonomy_invariance_deviation(K, h, d) for d in range(K.depth + 1))
        out.append((f"{key}.holonomy_invariance", deviation == 0.0, f"deviation {fmt(deviation)}"))
    depth = min(m.default_depth, 8)
    margin = immersion_margin(m, depth, samples=100, seed=seed)
    out.append((f"{key}.immersion_rank", margin > RANK_TOL, f"min singular value {fmt(margin)} over 100 samples"))
    return out


# -- entry point -----------------------------------------------------------------


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="solenoids", description="Run measured-solenoid scenarios.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "execute the scenario's task"), ("validate", "check schema and model invariants")):
        q = sub.add_parser(name, help=help_text)
        q.add_argument("file", type=Path)
        q.add_argument("--depth", type=int)
        q.add_argument("--quad-order", dest="quad_order", type=int)
        q.add_argument("--seed", type=int)
        q.add_argument("--out", type=str)
    return p


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    if args.command == "run":
        return run(args.file, args)
    checks, code = validate(args.file, args)
    lines = [f"{name} = {'pass' if ok else 'fail'} ({detail})" for name, ok, detail in checks]
    print("\n".join(lines))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "validation.txt").write_text("\n".join(lines) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())

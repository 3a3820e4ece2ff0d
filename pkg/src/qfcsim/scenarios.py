"""JSON-configured measurement scenarios wiring simulation to estimators.

A scenario holds base emitter/conversion configs, an optional sweep over one
scalar config field, and a list of analysis steps.  Point estimators
(``transmission``, ``noise_rate``) measure one number per sweep value;
aggregate estimators (``efficiency_curve``, ``acceptance``, ``noise_trend``)
consume the swept table; chain estimators (``lifetime``, ``bunching``) run a
full simulate-analyze pass of their own.  Each step may carry target values
with tolerances; the runner writes CSV tables, fit JSONs, and SVG plots, and
reports pass/fail per target.

Determinism: sweep value i runs with a seed derived from (seed, i) and chain
step j with one derived from (seed, j), so rerunning a scenario with the same
seed reproduces every output byte for byte.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .analysis import (
    EstimatorError,
    acceptance_bandwidth,
    fit_bunching,
    fit_efficiency_curve,
    fit_exponential,
    g2_pulsed,
    histogram_vs_pulse,
    noise_density,
    snr_after_pulse,
)
from .core import ConfigError, derive_seed, empty_tags
from .emitter import EmitterConfig, simulate_emission, split_50_50
from .qfc import ConversionConfig, convert_stream
from . import plots

POINT_ESTIMATORS = ("transmission", "noise_rate")
AGGREGATE_ESTIMATORS = ("efficiency_curve", "acceptance", "noise_trend")
CHAIN_ESTIMATORS = ("lifetime", "bunching")
_KNOWN_ESTIMATORS = POINT_ESTIMATORS + AGGREGATE_ESTIMATORS + CHAIN_ESTIMATORS

_SCENARIO_KEYS = {"name", "seed", "emitter", "conversion", "duration_s", "sweep", "analysis", "outputs"}
_STEP_KEYS = {"estimator", "label", "params", "targets", "emitter", "conversion"}


@dataclass
class Scenario:
    """A named, seeded measurement plan; see the module docstring."""

    name: str
    seed: int
    emitter: dict | None = None
    conversion: dict | None = None
    duration_s: float | None = None
    sweep: dict | None = None
    analysis: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if not isinstance(data, dict):
            raise ConfigError("scenario must be a JSON object")
        unknown = set(data) - _SCENARIO_KEYS
        if unknown:
            raise ConfigError(f"unknown scenario fields: {sorted(unknown)}")
        if "name" not in data or "seed" not in data:
            raise ConfigError("scenario requires name and seed")
        sc = cls(
            name=str(data["name"]),
            seed=int(data["seed"]),
            emitter=data.get("emitter"),
            conversion=data.get("conversion"),
            duration_s=None if data.get("duration_s") is None else float(data["duration_s"]),
            sweep=data.get("sweep"),
            analysis=list(data.get("analysis", [])),
            outputs=dict(data.get("outputs", {})),
        )
        sc.validate()
        return sc

    def validate(self) -> "Scenario":
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.emitter is not None:
            EmitterConfig.from_dict(self.emitter)
        if self.conversion is not None:
            ConversionConfig.from_dict(self.conversion)
        if self.sweep is not None:
            unknown = set(self.sweep) - {"param", "values"}
            if unknown:
                raise ConfigError(f"unknown sweep fields: {sorted(unknown)}")
            param = self.sweep.get("param", "")
            if not isinstance(param, str) or param.count(".") != 1:
                raise ConfigError("sweep.param must look like 'section.field'")
            section = param.split(".", 1)[0]
            if section not in ("emitter", "conversion"):
                raise ConfigError(f"sweep.param section must be emitter or conversion, got {section!r}")
            values = self.sweep.get("values")
            if not isinstance(values, (list, tuple)) or not values:
                raise ConfigError("sweep.values must be a non-empty list")
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
                raise ConfigError("sweep.values must be numbers (the swept field is a scalar)")
        for step in self.analysis:
            unknown = set(step) - _STEP_KEYS
            if unknown:
                raise ConfigError(f"unknown analysis step fields: {sorted(unknown)}")
            est = step.get("estimator")
            if est not in _KNOWN_ESTIMATORS:
                raise ConfigError(f"unknown estimator {est!r}; expected one of {sorted(_KNOWN_ESTIMATORS)}")
            if est in AGGREGATE_ESTIMATORS and self.sweep is None:
                raise ConfigError(f"estimator {est!r} consumes a sweep table but the scenario has no sweep")
            if est in POINT_ESTIMATORS and self.sweep is None:
                raise ConfigError(f"estimator {est!r} measures sweep points but the scenario has no sweep")
            for name, spec in step.get("targets", {}).items():
                if not isinstance(spec, dict) or not ({"value", "tol"} <= set(spec) or "min" in spec or "max" in spec):
                    raise ConfigError(f"target {name!r} must give value+tol or min/max bounds")
        return self

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "emitter": self.emitter,
            "conversion": self.conversion,
            "duration_s": self.duration_s,
            "sweep": self.sweep,
            "analysis": self.analysis,
            "outputs": self.outputs,
        }


def builtin_scenarios() -> list[str]:
    """Names of the scenarios packaged with the library."""
    root = resources.files(__package__) / "scenarios"
    return sorted(p.name[: -len(".json")] for p in root.iterdir() if p.name.endswith(".json"))


def load_scenario(name_or_path: str) -> Scenario:
    """Load a scenario from a JSON file path or a bundled scenario name."""
    if os.path.exists(name_or_path):
        with open(name_or_path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid scenario JSON in {name_or_path}: {exc}") from exc
        return Scenario.from_dict(data)
    ref = resources.files(__package__) / "scenarios" / f"{name_or_path}.json"
    if ref.is_file():
        return Scenario.from_dict(json.loads(ref.read_text(encoding="utf-8")))
    raise ConfigError(
        f"no scenario file {name_or_path!r}; bundled scenarios: {', '.join(builtin_scenarios())}"
    )


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class TargetCheck:
    name: str
    measured: float
    spec: dict
    passed: bool

    def describe(self) -> str:
        if "value" in self.spec:
            want = f"{self.spec['value']:g} +- {self.spec['tol']:g}"
        else:
            parts = []
            if "min" in self.spec:
                parts.append(f">= {self.spec['min']:g}")
            if "max" in self.spec:
                parts.append(f"<= {self.spec['max']:g}")
            want = " and ".join(parts)
        return f"{self.name} = {self.measured:.6g}  (target {want})"


@dataclass(frozen=True)
class StepResult:
    label: str
    estimator: str
    measured: dict
    checks: tuple
    artifacts: tuple
    status: str = "ok"

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


@dataclass(frozen=True)
class ScenarioResult:
    name: str
    seed: int
    out_dir: str
    steps: tuple
    artifacts: tuple

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.steps)


def _check_targets(targets: dict, measured: dict) -> tuple:
    checks = []
    for name, spec in targets.items():
        value = measured.get(name, math.nan)
        value = float(value) if value is not None else math.nan
        if math.isnan(value):
            ok = False
        elif "value" in spec:
            ok = abs(value - spec["value"]) <= spec["tol"]
        else:
            ok = ("min" not in spec or value >= spec["min"]) and ("max" not in spec or value <= spec["max"])
        checks.append(TargetCheck(name=name, measured=value, spec=spec, passed=ok))
    return tuple(checks)


def format_summary(result: ScenarioResult) -> str:
    lines = [f"scenario {result.name}  (seed {result.seed})"]
    for step in result.steps:
        if step.status != "ok":
            lines.append(f"  {step.label}: {step.status}")
            continue
        shown = set()
        for check in step.checks:
            lines.append(f"  {step.label}.{check.describe()}  {'PASS' if check.passed else 'FAIL'}")
            shown.add(check.name)
        rest = {k: v for k, v in step.measured.items() if k not in shown and isinstance(v, (int, float))}
        if rest:
            body = ", ".join(f"{k} = {v:.6g}" for k, v in rest.items())
            lines.append(f"  {step.label}: {body}")
    lines.append(f"result: {'PASS' if result.passed else 'FAIL'}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# file helpers


def _fmt_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt_cell(v) for v in row])


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# config plumbing


def _merged_emitter(scenario: Scenario, step: dict) -> EmitterConfig:
    merged = {**(scenario.emitter or {}), **(step.get("emitter") or {})}
    if not merged:
        raise ConfigError(f"step {step.get('estimator')!r} needs an emitter config")
    return EmitterConfig.from_dict(merged)


def _merged_conversion(scenario: Scenario, step: dict) -> ConversionConfig | None:
    if scenario.conversion is None and not step.get("conversion"):
        return None
    merged = {**(scenario.conversion or {}), **(step.get("conversion") or {})}
    return ConversionConfig.from_dict(merged)


def _apply_param(scenario: Scenario, param: str, value: float) -> Scenario:
    section, key = param.split(".", 1)
    base = dict(getattr(scenario, section) or {})
    base[key] = value
    replaced = Scenario(
        name=scenario.name,
        seed=scenario.seed,
        emitter=base if section == "emitter" else scenario.emitter,
        conversion=base if section == "conversion" else scenario.conversion,
        duration_s=scenario.duration_s,
        sweep=None,
        analysis=scenario.analysis,
        outputs=scenario.outputs,
    )
    # constructing the config validates the swept field exists and is scalar
    if section == "emitter":
        EmitterConfig.from_dict(base)
    else:
        ConversionConfig.from_dict(base)
    return replaced


def _artifact_path(scenario: Scenario, out_dir: str, key: str, default: str) -> str:
    rel = scenario.outputs.get(key, default)
    return os.path.join(out_dir, rel)


# ---------------------------------------------------------------------------
# point estimators (one row per sweep value)


def _point_transmission(scenario: Scenario, step: dict, seed: int) -> dict:
    ecfg = _merged_emitter(scenario, step)
    ccfg = _merged_conversion(scenario, step)
    if ccfg is None:
        raise ConfigError("transmission measurement needs a conversion config")
    tags = simulate_emission(ecfg, seed)
    n_in = int(tags.size)
    duration_ps = ecfg.n_pulses * ecfg.period_ps
    converted = convert_stream(tags, ccfg, seed, duration_ps=duration_ps)
    n_out = int(converted.size)
    if n_in == 0:
        return {"n_in": 0, "n_out": n_out, "transmission": math.nan, "transmission_sigma": math.nan}
    t = n_out / n_in
    sigma = math.sqrt(max(n_out * (1.0 - t), 1.0)) / n_in
    return {"n_in": n_in, "n_out": n_out, "transmission": t, "transmission_sigma": sigma}


def _point_noise_rate(scenario: Scenario, step: dict, seed: int) -> dict:
    ccfg = _merged_conversion(scenario, step)
    if ccfg is None:
        raise ConfigError("noise_rate measurement needs a conversion config")
    duration_s = scenario.duration_s if scenario.duration_s is not None else 20.0
    tags = convert_stream(empty_tags(), ccfg, seed, duration_ps=duration_s * 1e12)
    rate = tags.size / duration_s
    est = noise_density(
        rate,
        duration_s,
        eta_snspd=ccfg.eta_snspd,
        filter_fwhm_pm=ccfg.filter_fwhm_pm,
        t_fbg=ccfg.t_fbg,
        dark_count_cps=ccfg.dark_count_cps,
    )
    return {
        "counts": int(tags.size),
        "rate_cps": rate,
        "density_cts_s_pm": est.density_cts_s_pm,
        "ci_low_cts_s_pm": est.ci_low_cts_s_pm,
        "ci_high_cts_s_pm": est.ci_high_cts_s_pm,
    }


_POINT_RUNNERS = {"transmission": _point_transmission, "noise_rate": _point_noise_rate}


# ---------------------------------------------------------------------------
# aggregate estimators (consume the sweep table)


def _column(table: dict, name: str, estimator: str) -> np.ndarray:
    if name not in table:
        raise ConfigError(f"estimator {estimator!r} needs column {name!r}, which no earlier step produced")
    return np.asarray(table[name], dtype=np.float64)


def _agg_efficiency_curve(scenario, step, table, param_name, out_dir):
    x = _column(table, param_name, "efficiency_curve")
    y = _column(table, "transmission", "efficiency_curve")
    sig = _column(table, "transmission_sigma", "efficiency_curve")
    fit = fit_efficiency_curve(x, y, sig)
    eval_p = float(step.get("params", {}).get("eval_power_w", x.max()))
    measured = {
        "eta_max": fit.sine.params["eta_max"],
        "alpha_l2_per_w": fit.sine.params["alpha_l2_per_w"],
        "efficiency_at_eval": fit.efficiency_at(eval_p),
        "sine_chi2_reduced": fit.sine.chi2_reduced,
        "linear_chi2_reduced": fit.linear.chi2_reduced,
    }
    label = step.get("label", "efficiency_curve")
    fit_path = _artifact_path(scenario, out_dir, f"{label}.fit", f"{scenario.name}_{label}_fit.json")
    _write_json(fit_path, {"sine": fit.sine.to_dict(), "linear": fit.linear.to_dict(),
                           "preferred": fit.preferred, "eval_power_w": eval_p,
                           "efficiency_at_eval": measured["efficiency_at_eval"]})
    plot_path = _artifact_path(scenario, out_dir, f"{label}.plot", f"{scenario.name}_{label}.svg")
    xx = np.linspace(x.min(), x.max(), 256)
    curves = [(xx, fit.sine.params["eta_max"] * np.sin(np.sqrt(np.maximum(fit.sine.params["alpha_l2_per_w"] * xx, 0.0))) ** 2, "sine fit"),
              (xx, fit.linear.params["slope"] * xx + fit.linear.params["intercept"], "linear fit")]
    plots.plot_sweep(x, y, sig, curves, plot_path, scenario.name,
                     param_name, "conversion efficiency")
    return measured, (fit_path, plot_path)


def _agg_acceptance(scenario, step, table, param_name, out_dir):
    x = _column(table, param_name, "acceptance")
    y = _column(table, "transmission", "acceptance")
    threshold = float(step.get("params", {}).get("threshold", 0.8))
    width = acceptance_bandwidth(x, y, threshold=threshold)
    measured = {"width_hz": width, "threshold": threshold}
    label = step.get("label", "acceptance")
    plot_path = _artifact_path(scenario, out_dir, f"{label}.plot", f"{scenario.name}_{label}.svg")
    plots.plot_sweep(x, y / y.max(), None, [], plot_path, scenario.name,
                     param_name, "normalized response", hline=threshold)
    return measured, (plot_path,)


def _agg_noise_trend(scenario, step, table, param_name, out_dir):
    x = _column(table, param_name, "noise_trend")
    y = _column(table, "density_cts_s_pm", "noise_trend")
    lo = _column(table, "ci_low_cts_s_pm", "noise_trend")
    hi = _column(table, "ci_high_cts_s_pm", "noise_trend")
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else math.nan
    measured = {
        "slope_per_unit": float(slope),
        "intercept": float(intercept),
        "r_squared": r_squared,
        "mean_density": float(y.mean()),
        "density_at_last": float(y[-1]),
    }
    label = step.get("label", "noise_trend")
    plot_path = _artifact_path(scenario, out_dir, f"{label}.plot", f"{scenario.name}_{label}.svg")
    yerr = np.vstack([np.maximum(y - lo, 0.0), np.maximum(hi - y, 0.0)])
    xx = np.linspace(x.min(), x.max(), 64)
    plots.plot_sweep(x, y, yerr, [(xx, slope * xx + intercept, "linear fit")], plot_path,
                     scenario.name, param_name, "noise density (cts/s/pm)")
    return measured, (plot_path,)


_AGGREGATE_RUNNERS = {
    "efficiency_curve": _agg_efficiency_curve,
    "acceptance": _agg_acceptance,
    "noise_trend": _agg_noise_trend,
}


# ---------------------------------------------------------------------------
# chain estimators (own simulate-analyze pass)


def _chain_lifetime(scenario, step, seed, out_dir):
    ecfg = _merged_emitter(scenario, step)
    ccfg = _merged_conversion(scenario, step)
    label = step.get("label", "lifetime")
    params = step.get("params", {})
    tags = simulate_emission(ecfg, seed)
    if ccfg is not None and tags.size:
        tags = convert_stream(tags, ccfg, seed, duration_ps=ecfg.n_pulses * ecfg.period_ps)
    files = []
    if out_dir is not None:
        table_path = _artifact_path(scenario, out_dir, f"{label}.table", f"{scenario.name}_{label}.csv")
        files.append(table_path)
    if tags.size == 0:
        if out_dir is not None:
            _write_csv(table_path, ["bin_center_ps", "counts", "counts_per_s"], [])
        return {}, tuple(files), "no-data"
    hist = histogram_vs_pulse(
        tags,
        ecfg.rep_rate_hz,
        bin_width_ps=float(params.get("bin_width_ps", 200.0)),
        window_ps=float(params.get("window_ps", ecfg.period_ps)),
        n_pulses=ecfg.n_pulses,
    )
    fit_range = params.get("fit_range_ps")
    fit = fit_exponential(hist, fit_range_ps=None if fit_range is None else tuple(fit_range))
    measured = {
        "tau_ns": fit.params["tau_ns"],
        "sigma_tau_ns": fit.sigmas["tau_ns"],
        "amplitude": fit.params["amplitude"],
        "background": fit.params["background"],
        "snr": snr_after_pulse(fit),
        "chi2_reduced": fit.chi2_reduced,
    }
    if out_dir is not None:
        _write_csv(table_path, ["bin_center_ps", "counts", "counts_per_s"],
                   zip(hist.bin_centers_ps, hist.counts, hist.rate_values()))
        fit_path = _artifact_path(scenario, out_dir, f"{label}.fit", f"{scenario.name}_{label}_fit.json")
        _write_json(fit_path, fit.to_dict())
        plot_path = _artifact_path(scenario, out_dir, f"{label}.plot", f"{scenario.name}_{label}.svg")
        plots.plot_decay(hist, fit, plot_path, f"{scenario.name}: {label}")
        files.extend([fit_path, plot_path])
    return measured, tuple(files), "ok"


def _chain_bunching(scenario, step, seed, out_dir):
    ecfg = _merged_emitter(scenario, step)
    label = step.get("label", "bunching")
    params = step.get("params", {})
    tags = simulate_emission(ecfg, seed)
    files = []
    if out_dir is not None:
        table_path = _artifact_path(scenario, out_dir, f"{label}.table", f"{scenario.name}_{label}.csv")
        files.append(table_path)
    if tags.size == 0:
        if out_dir is not None:
            _write_csv(table_path, ["pulse_sep", "counts", "g2"], [])
        return {}, tuple(files), "no-data"
    first, second = split_50_50(tags, seed)
    baseline = params.get("baseline_range", (25, 50))
    g2 = g2_pulsed(
        first,
        second,
        ecfg.rep_rate_hz,
        max_pulse_sep=int(params.get("max_pulse_sep", 50)),
        baseline_range=(int(baseline[0]), int(baseline[1])),
    )
    fit = fit_bunching(g2)
    measured = {
        "amplitude": fit.params["amplitude"],
        "tau_pulses": fit.params["tau_pulses"],
        "g2_zero": g2.zero_value,
        "baseline_counts": g2.baseline_counts,
        "chi2_reduced": fit.chi2_reduced,
    }
    if out_dir is not None:
        _write_csv(table_path, ["pulse_sep", "counts", "g2"], zip(g2.pulse_sep, g2.counts, g2.g2))
        fit_path = _artifact_path(scenario, out_dir, f"{label}.fit", f"{scenario.name}_{label}_fit.json")
        payload = fit.to_dict()
        payload["g2_zero"] = g2.zero_value
        _write_json(fit_path, payload)
        plot_path = _artifact_path(scenario, out_dir, f"{label}.plot", f"{scenario.name}_{label}.svg")
        plots.plot_g2(g2, fit, plot_path, f"{scenario.name}: {label}")
        files.extend([fit_path, plot_path])
    return measured, tuple(files), "ok"


_CHAIN_RUNNERS = {"lifetime": _chain_lifetime, "bunching": _chain_bunching}


# ---------------------------------------------------------------------------
# runner


def run_scenario(scenario: Scenario, out_dir: str, seed: int | None = None) -> ScenarioResult:
    """Execute a scenario and write its artifacts under ``out_dir``."""
    scenario.validate()
    os.makedirs(out_dir, exist_ok=True)
    seed = scenario.seed if seed is None else int(seed)

    steps: list[StepResult] = []
    artifacts: list[str] = []
    point_steps = [s for s in scenario.analysis if s["estimator"] in POINT_ESTIMATORS]
    agg_steps = [s for s in scenario.analysis if s["estimator"] in AGGREGATE_ESTIMATORS]
    chain_steps = [s for s in scenario.analysis if s["estimator"] in CHAIN_ESTIMATORS]

    table: dict[str, list] = {}
    param_name = None
    if scenario.sweep is not None:
        param = scenario.sweep["param"]
        param_name = param.split(".", 1)[1]
        values = [float(v) for v in scenario.sweep["values"]]
        rows: list[dict] = []
        chain_last: dict[str, tuple] = {}
        for i, value in enumerate(values):
            seed_i = derive_seed(seed, i)
            point = _apply_param(scenario, param, value)
            row = {param_name: value}
            for s in point_steps:
                row.update(_POINT_RUNNERS[s["estimator"]](point, s, seed_i))
            for j, s in enumerate(chain_steps):
                label = s.get("label", s["estimator"])
                measured, _, status = _CHAIN_RUNNERS[s["estimator"]](point, s, derive_seed(seed_i, j), None)
                row.update({f"{label}_{k}": v for k, v in measured.items()})
                chain_last[label] = (s, measured, status)
            rows.append(row)
        header = list(rows[0])
        table = {k: [r.get(k, math.nan) for r in rows] for k in header}
        sweep_path = _artifact_path(scenario, out_dir, "sweep.table", f"{scenario.name}_sweep.csv")
        _write_csv(sweep_path, header, ([r.get(k, math.nan) for k in header] for r in rows))
        artifacts.append(sweep_path)
        for s in point_steps:
            label = s.get("label", s["estimator"])
            measured_last = {k: v[-1] for k, v in table.items() if k != param_name}
            checks = _check_targets(s.get("targets", {}), measured_last)
            steps.append(StepResult(label=label, estimator=s["estimator"],
                                    measured=measured_last, checks=checks, artifacts=()))
        for label, (s, measured, status) in chain_last.items():
            checks = _check_targets(s.get("targets", {}), measured) if status == "ok" else ()
            steps.append(StepResult(label=label, estimator=s["estimator"], measured=measured,
                                    checks=checks, artifacts=(), status=status))
        for s in agg_steps:
            label = s.get("label", s["estimator"])
            measured, files = _AGGREGATE_RUNNERS[s["estimator"]](scenario, s, table, param_name, out_dir)
            checks = _check_targets(s.get("targets", {}), measured)
            steps.append(StepResult(label=label, estimator=s["estimator"], measured=measured,
                                    checks=checks, artifacts=tuple(files)))
            artifacts.extend(files)
    else:
        for j, s in enumerate(chain_steps):
            label = s.get("label", s["estimator"])
            seed_j = derive_seed(seed, j)
            measured, files, status = _CHAIN_RUNNERS[s["estimator"]](scenario, s, seed_j, out_dir)
            checks = _check_targets(s.get("targets", {}), measured) if status == "ok" else ()
            steps.append(StepResult(label=label, estimator=s["estimator"], measured=measured,
                                    checks=checks, artifacts=tuple(files), status=status))
            artifacts.extend(files)

    result = ScenarioResult(name=scenario.name, seed=seed, out_dir=out_dir,
                            steps=tuple(steps), artifacts=tuple(artifacts))
    summary_path = _artifact_path(scenario, out_dir, "summary", f"{scenario.name}_summary.json")
    _write_json(summary_path, _summary_payload(result))
    return result


def _summary_payload(result: ScenarioResult) -> dict:
    return {
        "name": result.name,
        "seed": result.seed,
        "passed": result.passed,
        "steps": [
            {
                "label": s.label,
                "estimator": s.estimator,
                "status": s.status,
                "measured": {k: v for k, v in s.measured.items()},
                "targets": [
                    {"name": c.name, "measured": c.measured, "spec": c.spec, "passed": c.passed}
                    for c in s.checks
                ],
                "artifacts": [os.path.basename(a) for a in s.artifacts],
            }
            for s in result.steps
        ],
    }


def run_sweep(scenario: Scenario, param: str, values, out_dir: str, seed: int | None = None) -> ScenarioResult:
    """Run a scenario with its sweep replaced by the given param/values."""
    swept = Scenario(
        name=scenario.name,
        seed=scenario.seed if seed is None else int(seed),
        emitter=scenario.emitter,
        conversion=scenario.conversion,
        duration_s=scenario.duration_s,
        sweep={"param": param, "values": list(values)},
        analysis=scenario.analysis,
        outputs=scenario.outputs,
    )
    swept.validate()
    return run_scenario(swept, out_dir)

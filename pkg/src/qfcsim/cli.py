"""Command-line front end: scenario runs, parameter sweeps, one-off analysis.

Exit codes: 0 all targets met (or nothing to check), 1 at least one target
missed, 2 invalid configuration or tag file, 3 estimator failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .analysis import (
    EstimatorError,
    fit_bunching,
    fit_exponential,
    g2_pulsed,
    histogram_vs_pulse,
    noise_density,
    snr_after_pulse,
)
from .core import CHANNEL_SECOND, CHANNEL_SIGNAL, ConfigError, FormatError, load_timetags
from .scenarios import (
    _write_csv,
    _write_json,
    builtin_scenarios,
    format_summary,
    load_scenario,
    run_scenario,
    run_sweep,
)
from . import plots

EXIT_OK = 0
EXIT_TARGET_MISS = 1
EXIT_BAD_CONFIG = 2
EXIT_ESTIMATOR = 3


def _parse_pair(text, caster=float):
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"expected 'low:high', got {text!r}")
    return caster(parts[0]), caster(parts[1])


def _parse_values(text):
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"--values must be a comma-separated number list, got {text!r}") from exc


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qfcsim",
        description="Simulate a pulsed single-photon conversion chain and run its estimators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    names = ", ".join(builtin_scenarios())
    sim = sub.add_parser("simulate", help="run a scenario (JSON path or bundled name)")
    sim.add_argument("scenario", help=f"scenario JSON path or one of: {names}")
    sim.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    sim.add_argument("--out", default=".", help="output directory (default: current)")

    swp = sub.add_parser("sweep", help="rerun a scenario over a grid of one config field")
    swp.add_argument("scenario", help=f"scenario JSON path or one of: {names}")
    swp.add_argument("--param", required=True, help="config field path, e.g. conversion.pump_power_w")
    swp.add_argument("--values", required=True, help="comma-separated values, e.g. 60,120,180")
    swp.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    swp.add_argument("--out", default=".", help="output directory (default: current)")

    ana = sub.add_parser("analyze", help="run one estimator on a time-tag file")
    ana.add_argument("tags", help="binary time-tag file")
    ana.add_argument("--estimator", required=True, choices=("lifetime", "g2", "noise"))
    ana.add_argument("--rep-rate-hz", type=float, default=1e6)
    ana.add_argument("--bin-width-ps", type=float, default=200.0)
    ana.add_argument("--window-ps", type=float, default=None,
                     help="histogram window (default: one pulse period)")
    ana.add_argument("--fit-range-ps", default=None, help="fit range low:high in ps")
    ana.add_argument("--n-pulses", type=int, default=None,
                     help="pulse count for rate normalization of the histogram")
    ana.add_argument("--max-pulse-sep", type=int, default=50)
    ana.add_argument("--baseline", default="25:50", help="g2 baseline lag range low:high")
    ana.add_argument("--duration-s", type=float, default=None,
                     help="averaging time (default: last tag time)")
    ana.add_argument("--eta-snspd", type=float, default=1.0)
    ana.add_argument("--filter-fwhm-pm", type=float, default=None)
    ana.add_argument("--t-fbg", type=float, default=1.0)
    ana.add_argument("--dark-cps", type=float, default=0.0)
    ana.add_argument("--out", default=None, help="write CSV/JSON/SVG artifacts here")
    return parser


def _cmd_scenario(args, swept: bool) -> int:
    scenario = load_scenario(args.scenario)
    if swept:
        result = run_sweep(scenario, args.param, _parse_values(args.values), args.out, seed=args.seed)
    else:
        result = run_scenario(scenario, args.out, seed=args.seed)
    print(format_summary(result))
    return EXIT_OK if result.passed else EXIT_TARGET_MISS


def _cmd_analyze(args) -> int:
    tags = load_timetags(args.tags)
    stem = os.path.splitext(os.path.basename(args.tags))[0]
    if args.estimator == "lifetime":
        window = args.window_ps if args.window_ps is not None else 1e12 / args.rep_rate_hz
        hist = histogram_vs_pulse(tags, args.rep_rate_hz, args.bin_width_ps, window,
                                  n_pulses=args.n_pulses)
        fit_range = None if args.fit_range_ps is None else _parse_pair(args.fit_range_ps)
        fit = fit_exponential(hist, fit_range_ps=fit_range)
        payload = fit.to_dict()
        payload["snr"] = snr_after_pulse(fit)
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            _write_csv(os.path.join(args.out, f"{stem}_lifetime.csv"),
                       ["bin_center_ps", "counts", "counts_per_s"],
                       zip(hist.bin_centers_ps, hist.counts, hist.rate_values()))
            _write_json(os.path.join(args.out, f"{stem}_lifetime_fit.json"), payload)
            plots.plot_decay(hist, fit, os.path.join(args.out, f"{stem}_lifetime.svg"), stem)
    elif args.estimator == "g2":
        first = tags[tags["channel"] == CHANNEL_SIGNAL]
        second = tags[tags["channel"] == CHANNEL_SECOND]
        g2 = g2_pulsed(first, second, args.rep_rate_hz, max_pulse_sep=args.max_pulse_sep,
                       baseline_range=_parse_pair(args.baseline, int))
        fit = fit_bunching(g2)
        payload = fit.to_dict()
        payload["g2_zero"] = g2.zero_value
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            _write_csv(os.path.join(args.out, f"{stem}_g2.csv"),
                       ["pulse_sep", "counts", "g2"], zip(g2.pulse_sep, g2.counts, g2.g2))
            _write_json(os.path.join(args.out, f"{stem}_g2_fit.json"), payload)
            plots.plot_g2(g2, fit, os.path.join(args.out, f"{stem}_g2.svg"), stem)
    else:
        if args.filter_fwhm_pm is None:
            raise ConfigError("--filter-fwhm-pm is required for the noise estimator")
        if args.duration_s is not None:
            duration = args.duration_s
        elif tags.size:
            duration = float(tags["time_ps"][-1]) * 1e-12
        else:
            raise ConfigError("--duration-s is required for an empty tag stream")
        rate = tags.size / duration
        est = noise_density(rate, duration, eta_snspd=args.eta_snspd,
                            filter_fwhm_pm=args.filter_fwhm_pm, t_fbg=args.t_fbg,
                            dark_count_cps=args.dark_cps)
        payload = {
            "density_cts_s_pm": est.density_cts_s_pm,
            "ci_low_cts_s_pm": est.ci_low_cts_s_pm,
            "ci_high_cts_s_pm": est.ci_high_cts_s_pm,
            "detected_rate_cps": est.detected_rate_cps,
            "duration_s": est.duration_s,
        }
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            _write_json(os.path.join(args.out, f"{stem}_noise.json"), payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_scenario(args, swept=False)
        if args.command == "sweep":
            return _cmd_scenario(args, swept=True)
        return _cmd_analyze(args)
    except (ConfigError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except EstimatorError as exc:
        print(f"estimator failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATOR


if __name__ == "__main__":
    sys.exit(main())

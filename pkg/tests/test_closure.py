"""Generator/estimator closure: 68% intervals cover the truth at 68%.

For each simulated quantity with a matching estimator (lifetime, bunching
amplitude and decay, survival fraction; the noise density case lives in the
acceptance suite) the quoted 1 sigma interval must cover the generating value
in 58-78% of 500 independent seeded trials.  That band is roughly +-5 sigma
of binomial sampling noise around 0.683, so a systematic optimism or
pessimism in the error bars fails, statistical flutter does not.
"""

import numpy as np

from qfcsim.analysis import fit_bunching, fit_exponential, g2_pulsed, histogram_vs_pulse
from qfcsim.core import make_rng
from qfcsim.emitter import EmitterConfig, simulate_emission, split_50_50, telegraph_correlation_pulses
from qfcsim.qfc import ConversionConfig, convert_stream, detected_survival

N_TRIALS = 500
COVER_LO = int(0.58 * N_TRIALS)
COVER_HI = int(0.78 * N_TRIALS)


def test_lifetime_sigma_coverage():
    cfg = EmitterConfig(n_pulses=300_000, p_detect_per_pulse=0.01,
                        lifetime_ns=7.47, background_rate_cps=22.0)
    seeds = make_rng(7470).integers(0, 2**63, N_TRIALS)
    covered = 0
    for seed in seeds:
        tags = simulate_emission(cfg, seed=int(seed))
        hist = histogram_vs_pulse(tags, cfg.rep_rate_hz, 200.0, 1e6, n_pulses=cfg.n_pulses)
        fit = fit_exponential(hist, fit_range_ps=(600.0, 900_000.0))
        covered += abs(fit.params["tau_ns"] - 7.47) < fit.sigmas["tau_ns"]
    assert COVER_LO <= covered <= COVER_HI, f"tau covered in {covered}/{N_TRIALS} trials"


def test_bunching_sigma_coverage():
    cfg = EmitterConfig(n_pulses=400_000, p_detect_per_pulse=0.05,
                        bright_fraction=0.662, telegraph_tau_pulses=7.5)
    amp_truth = (1.0 - 0.662) / 0.662
    tau_truth = telegraph_correlation_pulses(7.5)
    seeds = make_rng(7500).integers(0, 2**63, N_TRIALS)
    amp_covered = 0
    tau_covered = 0
    for seed in seeds:
        tags = simulate_emission(cfg, seed=int(seed))
        a, b = split_50_50(tags, seed=int(seed) ^ 0x5EED)
        fit = fit_bunching(g2_pulsed(a, b, cfg.rep_rate_hz, max_pulse_sep=50,
                                     baseline_range=(25, 50)))
        amp_covered += abs(fit.params["amplitude"] - amp_truth) < fit.sigmas["amplitude"]
        tau_covered += abs(fit.params["tau_pulses"] - tau_truth) < fit.sigmas["tau_pulses"]
    assert COVER_LO <= amp_covered <= COVER_HI, f"amplitude covered in {amp_covered}/{N_TRIALS}"
    assert COVER_LO <= tau_covered <= COVER_HI, f"tau covered in {tau_covered}/{N_TRIALS}"


def test_survival_sigma_coverage():
    emit = EmitterConfig(n_pulses=20_000, p_detect_per_pulse=1.0, bright_fraction=1.0,
                         background_rate_cps=0.0)
    tags = simulate_emission(emit, seed=314)
    conv = ConversionConfig(noise_density_slope_cts_s_pm_per_w=0.0, dark_count_cps=0.0)
    truth = detected_survival(conv)
    n_in = tags.size
    covered = 0
    for trial in range(N_TRIALS):
        out = convert_stream(tags, conv, seed=trial)
        p_hat = out.size / n_in
        sigma = np.sqrt(p_hat * (1.0 - p_hat) / n_in)
        covered += abs(p_hat - truth) < sigma
    assert COVER_LO <= covered <= COVER_HI, f"survival covered in {covered}/{N_TRIALS} trials"

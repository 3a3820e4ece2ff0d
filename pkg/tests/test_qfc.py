"""Conversion-chain model: wavelengths, efficiency curve, filters, thinning."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfcsim.core import ConfigError, empty_tags, make_rng
from qfcsim.emitter import EmitterConfig, simulate_emission
from qfcsim.qfc import (
    DEFAULT_ACCEPTANCE_FWHM_HZ,
    DEFAULT_ALPHA_L2_PER_W,
    SINC2_HALF_MAX_X,
    ConversionConfig,
    acceptance_fwhm_from_width,
    calibrate_alpha_l2,
    convert_stream,
    detected_noise_rate_cps,
    detected_survival,
    efficiency_at_power,
    loss_budget,
    spectral_acceptance,
    wavelength_out,
)


# ---------------------------------------------------------------------------
# wavelength algebra


def test_output_wavelength_exact_rational_oracle():
    # 1/619nm - 1/1063.8nm inverted with exact rational arithmetic
    oracle_nm = 1 / (Fraction(1, 619) - Fraction(10, 10638))
    got = wavelength_out(619e-9, 1063.8e-9)
    assert got * 1e9 == pytest.approx(float(oracle_nm), rel=1e-12)
    assert got * 1e9 == pytest.approx(1480.4231115107913, rel=1e-12)


def test_output_wavelength_near_target_band():
    got_nm = wavelength_out(619e-9, 1064e-9) * 1e9
    assert abs(got_nm - 1480.0) < 0.5


def test_output_wavelength_rejects_non_downconverting_pump():
    with pytest.raises(ConfigError):
        wavelength_out(619e-9, 619e-9)
    with pytest.raises(ConfigError):
        wavelength_out(619e-9, 500e-9)
    with pytest.raises(ConfigError):
        wavelength_out(0.0, 1064e-9)


@given(
    st.floats(min_value=3e-7, max_value=9e-7),
    st.floats(min_value=1e-6, max_value=3e-6),
)
@settings(derandomize=True, max_examples=50)
def test_output_wavelength_energy_conservation(lam_in, lam_pump):
    lam_out = wavelength_out(lam_in, lam_pump)
    # 1/out = 1/in - 1/pump, and the output photon has less energy
    assert lam_out > lam_in
    assert 1.0 / lam_out == pytest.approx(1.0 / lam_in - 1.0 / lam_pump, rel=1e-9)


# ---------------------------------------------------------------------------
# efficiency curve


def test_calibration_constants_frozen():
    assert DEFAULT_ALPHA_L2_PER_W == pytest.approx(0.0016272949400825943, rel=1e-14)
    assert DEFAULT_ALPHA_L2_PER_W == pytest.approx(math.asin(math.sqrt(0.48)) ** 2 / 360.0, rel=1e-14)
    assert DEFAULT_ACCEPTANCE_FWHM_HZ == pytest.approx(120402529254.76276, rel=1e-12)
    assert SINC2_HALF_MAX_X == pytest.approx(1.3915573782515103, rel=1e-14)
    # the half-max abscissa really is the half-max point of sinc^2
    s = math.sin(SINC2_HALF_MAX_X) / SINC2_HALF_MAX_X
    assert s * s == pytest.approx(0.5, abs=1e-12)


def test_calibrated_efficiency_hits_anchor():
    cfg = ConversionConfig()
    assert efficiency_at_power(cfg, 360.0) == pytest.approx(0.48, abs=1e-12)
    assert efficiency_at_power(cfg, 0.0) == 0.0


def test_calibrate_alpha_l2_inverse_property():
    for eff, power in [(0.3, 100.0), (0.48, 360.0), (0.9, 50.0)]:
        alpha = calibrate_alpha_l2(eff, power)
        cfg = ConversionConfig(alpha_l2_per_w=alpha)
        assert efficiency_at_power(cfg, power) == pytest.approx(eff, rel=1e-12)
    with pytest.raises(ConfigError):
        calibrate_alpha_l2(1.1, 100.0)
    with pytest.raises(ConfigError):
        calibrate_alpha_l2(0.5, 0.0)


def test_efficiency_monotone_then_overrotates():
    cfg = ConversionConfig()
    p_peak = (math.pi / 2) ** 2 / cfg.alpha_l2_per_w
    powers = np.linspace(0.0, p_peak, 200)
    eff = np.array([efficiency_at_power(cfg, p) for p in powers])
    assert np.all(np.diff(eff) > 0)
    assert eff[-1] == pytest.approx(cfg.eta_max, rel=1e-9)
    assert efficiency_at_power(cfg, 1.5 * p_peak) < cfg.eta_max


def test_efficiency_small_signal_linear():
    cfg = ConversionConfig()
    p = 1e-3
    assert efficiency_at_power(cfg, p) == pytest.approx(cfg.eta_max * cfg.alpha_l2_per_w * p, rel=1e-5)


def test_acceptance_fwhm_from_width_inverse():
    fwhm = acceptance_fwhm_from_width(70e9, 0.8)
    cfg = ConversionConfig(acceptance_fwhm_hz=fwhm)
    assert spectral_acceptance(cfg, 35e9) == pytest.approx(0.8, abs=1e-12)
    assert spectral_acceptance(cfg, -35e9) == pytest.approx(0.8, abs=1e-12)


@given(
    st.floats(min_value=-2e11, max_value=2e11),
    st.floats(min_value=1e9, max_value=5e11),
)
@settings(derandomize=True, max_examples=100)
def test_acceptance_even_and_bounded(detuning, fwhm):
    cfg = ConversionConfig(acceptance_fwhm_hz=fwhm)
    a = spectral_acceptance(cfg, detuning)
    assert 0.0 <= a <= 1.0
    assert a == pytest.approx(spectral_acceptance(cfg, -detuning), rel=1e-12)


def test_acceptance_peak_and_halfwidth():
    cfg = ConversionConfig(acceptance_fwhm_hz=80e9)
    assert spectral_acceptance(cfg, 0.0) == 1.0
    assert spectral_acceptance(cfg, 40e9) == pytest.approx(0.5, abs=1e-12)


# ---------------------------------------------------------------------------
# configuration and budgets


@pytest.mark.parametrize(
    "kwargs",
    [
        {"eta_max": 0.0},
        {"eta_max": 1.5},
        {"alpha_l2_per_w": -1.0},
        {"pump_power_w": -1.0},
        {"acceptance_fwhm_hz": 0.0},
        {"filter_fwhm_pm": -3.0},
        {"t_fbg": 0.0},
        {"launch_transmission": 1.2},
        {"fiber_transmission": 0.0},
        {"eta_snspd": 2.0},
        {"dark_count_cps": -1.0},
        {"detector_jitter_ps_fwhm": -1.0},
        {"lambda_pump_m": 500e-9},
    ],
)
def test_config_rejects_bad_values(kwargs):
    with pytest.raises(ConfigError):
        ConversionConfig(**kwargs).validate()


def test_config_dict_roundtrip():
    cfg = ConversionConfig(pump_power_w=344.0, eta_max=0.58, dark_count_cps=3.0)
    assert ConversionConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        ConversionConfig.from_dict({"not_a_field": 1.0})


def test_loss_budget_product_matches_survival():
    cfg = ConversionConfig(
        eta_max=0.28 / 0.48,
        launch_transmission=0.5,
        fiber_transmission=0.04 / (0.28 * 0.5),
    )
    budget = loss_budget(cfg)
    product = math.prod(budget.factors.values())
    assert product == pytest.approx(0.04, rel=1e-12)
    assert detected_survival(cfg) == pytest.approx(product * cfg.eta_snspd, rel=1e-12)
    assert detected_survival(cfg) == pytest.approx(0.03, rel=1e-12)
    assert set(budget.factors) == {
        "conversion_efficiency",
        "spectral_acceptance",
        "launch_transmission",
        "fiber_transmission",
    }


def test_detected_noise_rate_closure():
    cfg = ConversionConfig()  # slope 2.2/360 at 360 W, 36.5 pm, t_fbg 0.81, snspd 0.75
    expect = 2.2 * 36.5 * 0.81 * 0.75 + 10.0
    assert detected_noise_rate_cps(cfg) == pytest.approx(expect, rel=1e-12)
    half = ConversionConfig(pump_power_w=180.0)
    assert detected_noise_rate_cps(half) == pytest.approx(1.1 * 36.5 * 0.81 * 0.75 + 10.0, rel=1e-12)


def test_detuning_scales_survival_not_noise():
    on = ConversionConfig()
    off = ConversionConfig(detuning_hz=35e9)
    assert detected_survival(off) == pytest.approx(0.8 * detected_survival(on), rel=1e-12)
    assert detected_noise_rate_cps(off) == detected_noise_rate_cps(on)


# ---------------------------------------------------------------------------
# stream conversion


def _signal_stream(n_pulses=400_000, p=0.05, seed=6):
    cfg = EmitterConfig(n_pulses=n_pulses, p_detect_per_pulse=p)
    return simulate_emission(cfg, seed=seed)


def test_convert_stream_thinning_statistics():
    tags = _signal_stream()
    cfg = ConversionConfig(dark_count_cps=0.0, noise_density_slope_cts_s_pm_per_w=0.0)
    out = convert_stream(tags, cfg, seed=17)
    p = detected_survival(cfg)
    expect = len(tags) * p
    assert abs(len(out) - expect) < 4.0 * math.sqrt(len(tags) * p * (1 - p))
    assert np.all(out["time_ps"][1:] >= out["time_ps"][:-1])
    assert np.all(out["channel"] == 0)


def test_convert_stream_deterministic():
    tags = _signal_stream(n_pulses=100_000)
    cfg = ConversionConfig()
    a = convert_stream(tags, cfg, seed=3, duration_ps=1e11)
    b = convert_stream(tags, cfg, seed=3, duration_ps=1e11)
    c = convert_stream(tags, cfg, seed=4, duration_ps=1e11)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_convert_stream_noise_only():
    cfg = ConversionConfig()  # 58.78 cps detected noise
    duration_ps = 100.0 * 1e12
    out = convert_stream(empty_tags(), cfg, seed=9, duration_ps=duration_ps)
    rate = detected_noise_rate_cps(cfg)
    expect = rate * 100.0
    assert abs(len(out) - expect) < 4.0 * math.sqrt(expect)
    assert out["time_ps"].max() <= duration_ps
    # uniform arrival times over the window
    mean_t = out["time_ps"].mean()
    assert abs(mean_t - duration_ps / 2) < 4.0 * duration_ps / math.sqrt(12.0 * len(out))


def test_convert_stream_empty_input_no_duration():
    out = convert_stream(empty_tags(), ConversionConfig(), seed=1)
    assert out.size == 0


def test_convert_stream_noiseless_preserves_count_at_full_transmission():
    tags = _signal_stream(n_pulses=50_000)
    cfg = ConversionConfig(
        eta_max=1.0,
        alpha_l2_per_w=calibrate_alpha_l2(1.0, 360.0),
        launch_transmission=1.0,
        fiber_transmission=1.0,
        eta_snspd=1.0,
        noise_density_slope_cts_s_pm_per_w=0.0,
        dark_count_cps=0.0,
        detector_jitter_ps_fwhm=0.0,
    )
    assert detected_survival(cfg) == pytest.approx(1.0, rel=1e-12)
    out = convert_stream(tags, cfg, seed=5)
    assert np.array_equal(out["time_ps"], tags["time_ps"])


def test_convert_stream_jitter_perturbs_times():
    tags = _signal_stream(n_pulses=50_000)
    cfg = ConversionConfig(
        eta_max=1.0,
        alpha_l2_per_w=calibrate_alpha_l2(1.0, 360.0),
        launch_transmission=1.0,
        fiber_transmission=1.0,
        eta_snspd=1.0,
        noise_density_slope_cts_s_pm_per_w=0.0,
        dark_count_cps=0.0,
        detector_jitter_ps_fwhm=50.0,
    )
    out = convert_stream(tags, cfg, seed=5)
    assert len(out) == len(tags)
    delta = out["time_ps"].astype(np.int64) - np.sort(tags["time_ps"]).astype(np.int64)
    sigma = 50.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    assert 0.8 * sigma < np.std(delta) < 1.3 * sigma

"""Monte Carlo simulator and analysis toolkit for a pulsed single-photon
frequency conversion chain: synthetic time-tag generation, a parameterized
converter/noise/filter/detector model, and the estimators that recover
lifetimes, correlations, efficiencies, and noise densities from the tags."""

from .analysis import (
    EfficiencyCurveFit,
    EstimatorError,
    FitResult,
    Histogram,
    NoiseDensityEstimate,
    PulsedG2,
    acceptance_bandwidth,
    fit_bunching,
    fit_efficiency_curve,
    fit_exponential,
    g2_pulsed,
    histogram_vs_pulse,
    internal_efficiency,
    noise_density,
    photon_number_efficiency,
    snr_after_pulse,
)
from .core import (
    C_VACUUM_M_PER_S,
    ConfigError,
    FormatError,
    RngSeed,
    TAG_DTYPE,
    TimeTagRecord,
    freq_bandwidth_to_wavelength,
    frequency_to_wavelength,
    load_timetags,
    make_rng,
    make_tags,
    read_timetags,
    save_timetags,
    wavelength_to_frequency,
    write_timetags,
)
from .emitter import EmitterConfig, simulate_emission, split_50_50, telegraph_sequence
from .qfc import (
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

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

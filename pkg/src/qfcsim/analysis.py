"""Estimators recovering physical quantities from tag streams and sweeps.

The estimators mirror the measurement chain of a pulsed single-photon
conversion experiment: arrival-time histograms folded on the excitation
period, damped least-squares fits of exponential decay and g2 bunching,
pulse-wise photon correlation, Bayesian (flat-prior Poisson) noise density
with detector/filter corrections, and conversion-efficiency curve fits.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import gamma as gamma_dist

from .core import ConfigError

PS_PER_NS = 1000.0


class EstimatorError(RuntimeError):
    """An estimator cannot produce a result from the given input."""


# ---------------------------------------------------------------------------
# histogram


@dataclass(frozen=True)
class Histogram:
    """Arrival-time histogram folded on the pulse period.

    ``counts`` are raw per-bin tallies.  When ``n_pulses`` is known the
    histogram can be expressed as a rate: a flat background of r counts/s
    averages to r in rate units, and an exponential decay of per-pulse
    detection probability p and lifetime tau peaks at p / tau.
    """

    bin_edges_ps: np.ndarray
    counts: np.ndarray
    n_pulses: int | None = None

    @property
    def normalization(self) -> str:
        return "counts-per-second" if self.n_pulses else "raw"

    @property
    def bin_width_ps(self) -> float:
        return float(self.bin_edges_ps[1] - self.bin_edges_ps[0])

    @property
    def bin_centers_ps(self) -> np.ndarray:
        return 0.5 * (self.bin_edges_ps[:-1] + self.bin_edges_ps[1:]).astype(float)

    @property
    def rate_scale(self) -> float:
        """Multiply counts by this to get counts per second; 1 if unknown."""
        if not self.n_pulses:
            return 1.0
        return 1.0 / (self.n_pulses * self.bin_width_ps * 1e-12)

    def rate_values(self) -> np.ndarray:
        return self.counts * self.rate_scale


def histogram_vs_pulse(tags, rep_rate_hz, bin_width_ps, window_ps, n_pulses=None) -> Histogram:
    """Fold tag times modulo the pulse period into [0, window_ps) bins.

    Counts are conserved: the bin sum equals the number of tags whose folded
    time falls inside the window.  ``window_ps`` must be an integer multiple
    of ``bin_width_ps`` and no longer than the period.
    """
    if bin_width_ps <= 0:
        raise ConfigError(f"bin_width_ps must be positive, got {bin_width_ps}")
    n_bins = window_ps / bin_width_ps
    if abs(n_bins - round(n_bins)) > 1e-9 or round(n_bins) < 1:
        raise ConfigError("window_ps must be a positive integer multiple of bin_width_ps")
    n_bins = int(round(n_bins))
    period_ps = 1e12 / rep_rate_hz
    if window_ps > period_ps * (1 + 1e-12):
        raise ConfigError("window_ps must not exceed the pulse period")

    times = np.asarray(tags["time_ps"] if tags.dtype.fields else tags)
    if period_ps == round(period_ps):
        phase = times.astype(np.uint64) % np.uint64(round(period_ps))
        phase = phase.astype(np.float64)
    else:
        phase = np.mod(times.astype(np.float64), period_ps)
    inside = phase < window_ps
    idx = (phase[inside] / bin_width_ps).astype(np.int64)
    counts = np.bincount(idx, minlength=n_bins).astype(np.int64)
    edges = np.arange(n_bins + 1, dtype=np.float64) * bin_width_ps
    return Histogram(bin_edges_ps=edges, counts=counts, n_pulses=n_pulses)


# ---------------------------------------------------------------------------
# generic damped least-squares machinery


@dataclass(frozen=True)
class FitResult:
    """Parameters, 1-sigma uncertainties, and goodness of a model fit."""

    model: str
    params: dict
    sigmas: dict
    chi2_reduced: float
    converged: bool
    n_points: int
    flags: tuple = ()

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "params": dict(self.params),
            "sigmas": dict(self.sigmas),
            "chi2_reduced": self.chi2_reduced,
            "converged": self.converged,
            "n_points": self.n_points,
            "flags": list(self.flags),
        }


def _fit(model, jac, x, y, sigma, p0, bounds, names, label, scale_cov=False) -> FitResult:
    def residuals(p):
        return (model(x, *p) - y) / sigma

    def jacobian(p):
        return jac(x, *p) / sigma[:, None]

    result = least_squares(
        residuals,
        p0,
        jac=jacobian,
        bounds=bounds,
        method="trf",
        ftol=None,
        xtol=1e-10,
        gtol=1e-12,
        max_nfev=400 * len(p0),
    )
    converged = result.status > 0
    flags = () if converged else ("max-iterations",)
    dof = x.size - len(p0)
    chi2_red = float(2.0 * result.cost / dof) if dof > 0 else math.nan
    jtj = result.jac.T @ result.jac
    try:
        cov = np.linalg.pinv(jtj)
        sig = np.sqrt(np.maximum(np.diag(cov), 0.0))
        # without absolute errors, estimate the data scatter from the fit
        if scale_cov and math.isfinite(chi2_red):
            sig = sig * math.sqrt(max(chi2_red, 0.0))
    except np.linalg.LinAlgError:
        sig = np.full(len(p0), math.nan)
    return FitResult(
        model=label,
        params={n: float(v) for n, v in zip(names, result.x)},
        sigmas={n: float(s) for n, s in zip(names, sig)},
        chi2_reduced=chi2_red,
        converged=converged,
        n_points=int(x.size),
        flags=flags,
    )


def _log_slope_tau(x, excess, fallback):
    """Decay constant from a weighted linear fit to log(excess)."""
    sel = excess > 0
    if np.count_nonzero(sel) < 3:
        return fallback, None
    xs, ys = x[sel], np.log(excess[sel])
    coeffs = np.polyfit(xs, ys, 1, w=np.sqrt(excess[sel]))
    if coeffs[0] >= 0:
        return fallback, None
    return -1.0 / coeffs[0], math.exp(coeffs[1])


# ---------------------------------------------------------------------------
# exponential decay


def _exp_model(t, a, tau, b):
    return a * np.exp(-t / tau) + b


def _exp_jac(t, a, tau, b):
    decay = np.exp(-t / tau)
    return np.column_stack([decay, a * t / tau**2 * decay, np.ones_like(t)])


def fit_exponential(hist: Histogram, fit_range_ps=None) -> FitResult:
    """Fit A * exp(-t / tau) + B to a folded arrival-time histogram.

    Bins carry Poisson errors sqrt(max(n, 1)); the weights are seeded from
    the observed counts and then re-evaluated at the fitted model until they
    settle.  Weighting by observed counts alone overweights downward
    fluctuations and pulls tau low by several percent at the photon budgets
    used here, which the reweighting removes.  Times are fit in nanoseconds;
    amplitude and background come out in counts/s when the histogram knows
    its pulse count, else in counts per bin.  Params: ``amplitude``,
    ``tau_ns``, ``background``.
    """
    centers = hist.bin_centers_ps
    counts = np.asarray(hist.counts, dtype=np.float64)
    if fit_range_ps is not None:
        lo, hi = fit_range_ps
        sel = (centers >= lo) & (centers <= hi)
        centers, counts = centers[sel], counts[sel]
    if np.count_nonzero(counts) < 4:
        raise EstimatorError("need at least 4 non-empty bins to fit a decay")

    scale = hist.rate_scale
    t_ns = centers / PS_PER_NS
    y = counts * scale

    n_tail = max(1, counts.size // 10)
    b0 = float(np.mean(y[-n_tail:]))
    a_guess = max(float(y[0] - b0), 1e-3 * float(y.max()) + 1e-30)
    span = float(t_ns[-1] - t_ns[0]) or 1.0
    tau0, a_log = _log_slope_tau(t_ns - t_ns[0], y - b0, fallback=span / 5.0)
    a0 = a_log if a_log is not None else a_guess
    tau0 = min(max(tau0, 1e-6), 10 * span)

    eps = 1e-30
    p0 = [a0, tau0, max(b0, eps)]
    sigma_counts = np.sqrt(np.maximum(counts, 1.0))
    result = None
    for _ in range(4):
        result = _fit(
            _exp_model,
            _exp_jac,
            t_ns,
            y,
            sigma_counts * scale,
            p0=p0,
            bounds=([0.0, eps, 0.0], [np.inf, np.inf, np.inf]),
            names=("amplitude", "tau_ns", "background"),
            label="exponential-decay",
        )
        p0 = [result.params["amplitude"], result.params["tau_ns"], result.params["background"]]
        model_counts = _exp_model(t_ns, *p0) / scale
        updated = np.sqrt(np.maximum(model_counts, 1.0))
        if np.allclose(updated, sigma_counts, rtol=1e-8):
            break
        sigma_counts = updated
    return result


def snr_after_pulse(fit: FitResult) -> float:
    """Signal-to-noise of a decay fit: amplitude over flat background.

    Returns inf for a zero background (noiseless histogram).
    """
    if "amplitude" not in fit.params or "background" not in fit.params:
        raise EstimatorError("fit does not carry amplitude/background parameters")
    b = fit.params["background"]
    if b <= 0.0:
        return math.inf
    return fit.params["amplitude"] / b


# ---------------------------------------------------------------------------
# pulse-wise g2


@dataclass(frozen=True)
class PulsedG2:
    """Cross-correlation counts per pulse-index separation, normalized.

    ``g2`` is ``counts`` divided by the mean count over the baseline lag
    range, so an uncorrelated source sits at 1.  ``block_counts``, when
    present, splits ``counts`` over contiguous pulse blocks (rows sum to
    ``counts``); fit_bunching uses it for jackknife error estimates.
    """

    pulse_sep: np.ndarray
    counts: np.ndarray
    g2: np.ndarray
    baseline_counts: float
    baseline_range: tuple = (25, 50)
    block_counts: np.ndarray | None = None

    @property
    def zero_value(self) -> float:
        return float(self.g2[np.flatnonzero(self.pulse_sep == 0)[0]])


def g2_pulsed(tags_a, tags_b, rep_rate_hz, max_pulse_sep=50, baseline_range=(25, 50)) -> PulsedG2:
    """Photon cross-correlation versus pulse-index difference.

    Counts coincidences between every pair of tags from the two streams whose
    excitation pulse indices differ by n, for |n| <= max_pulse_sep, and
    normalizes by the mean count over ``baseline_range``.
    """
    lo, hi = baseline_range
    if not 0 < lo < hi:
        raise ConfigError(f"baseline_range must be increasing and positive, got {baseline_range}")
    if max_pulse_sep < hi:
        raise ConfigError("max_pulse_sep must reach the baseline range")
    if tags_a.size == 0 or tags_b.size == 0:
        raise EstimatorError("cannot correlate an empty stream")

    period_ps = 1e12 / rep_rate_hz
    pulses = []
    for tags in (tags_a, tags_b):
        times = tags["time_ps"]
        if times.size > 1 and np.any(times[1:] < times[:-1]):
            raise ConfigError("tag streams must be sorted by time")
        if period_ps == round(period_ps):
            pulses.append((times // np.uint64(round(period_ps))).astype(np.int64))
        else:
            pulses.append(np.floor(times.astype(np.float64) / period_ps).astype(np.int64))
    (ua, ca), (ub, cb) = (np.unique(p, return_counts=True) for p in pulses)

    seps = np.arange(-max_pulse_sep, max_pulse_sep + 1, dtype=np.int64)
    counts = np.zeros(seps.size, dtype=np.int64)
    # pairs keyed by the a-side block stay additive across blocks, which is
    # what the jackknife error estimate in fit_bunching needs
    span = int(max(ua[-1], ub[-1])) + 1
    block_len = max((span + 19) // 20, 1)
    block_of = (ua // block_len).astype(np.int64)
    n_blocks = int(block_of[-1]) + 1
    block_counts = np.zeros((n_blocks, seps.size), dtype=np.float64)
    for i, n in enumerate(seps):
        shifted = ua + n
        idx = np.searchsorted(ub, shifted)
        ok = idx < ub.size
        ok[ok] &= ub[idx[ok]] == shifted[ok]
        pair = ca[ok] * cb[idx[ok]]
        counts[i] = int(pair.sum())
        block_counts[:, i] = np.bincount(block_of[ok], weights=pair, minlength=n_blocks)

    in_baseline = (np.abs(seps) >= lo) & (np.abs(seps) <= hi)
    baseline = float(counts[in_baseline].mean())
    if baseline <= 0.0:
        raise EstimatorError("baseline lags hold no coincidences; not enough statistics")
    return PulsedG2(pulse_sep=seps, counts=counts, g2=counts / baseline,
                    baseline_counts=baseline, baseline_range=(lo, hi),
                    block_counts=block_counts)


def _bunching_model(n, a, tau):
    return 1.0 + a * np.exp(-n / tau)


def _bunching_jac(n, a, tau):
    decay = np.exp(-n / tau)
    return np.column_stack([decay, a * n / tau**2 * decay])


def _renormalize_bunching(g2, result, fit_once, ys, sigma):
    """Undo the decay's own residual inside the normalization window.

    g2_pulsed divides by the mean count over the baseline lags, but a decay
    constant near 7 pulses has not fully died by lag 25, so that mean sits
    a few permille high and tau comes out low by 2-3% at any statistics.
    Rescaling the data by the fitted model's own window mean and refitting
    is self-consistent after two rounds.  The window mean is also a shared
    Poisson variable; its scale error moves every point coherently, which
    the point-wise covariance cannot see, so it is propagated into the
    parameter uncertainties by finite differences.
    """
    lo, hi = g2.baseline_range
    seps = np.asarray(g2.pulse_sep)
    window = (np.abs(seps) >= lo) & (np.abs(seps) <= hi)
    if not np.any(window):
        return result
    values = np.asarray(g2.g2, dtype=np.float64)
    if abs(float(values[window].mean()) - 1.0) > 1e-9:
        return result  # normalized against an external baseline; nothing to undo
    bl = np.abs(seps[window]).astype(np.float64)

    scale = 1.0
    for _ in range(2):
        amp, tau = result.params["amplitude"], result.params["tau_pulses"]
        if not (math.isfinite(tau) and amp > 0.0):
            return result
        scale = 1.0 + float(np.mean(amp * np.exp(-bl / tau)))
        result = fit_once(ys * scale, sigma * scale, [amp, max(tau, 1e-3)])

    rel = 1.0 / math.sqrt(max(float(g2.baseline_counts) * bl.size, 1.0))
    p0 = [max(result.params["amplitude"], 1e-6), max(result.params["tau_pulses"], 1e-3)]
    if not all(math.isfinite(v) for v in p0):
        return result
    swings = [
        fit_once(ys * scale * (1.0 + s), sigma * scale * (1.0 + s), p0)
        for s in (rel, -rel)
    ]
    sigmas = dict(result.sigmas)
    for name in sigmas:
        swing = 0.5 * abs(swings[0].params[name] - swings[1].params[name])
        if math.isfinite(swing):
            sigmas[name] = math.hypot(sigmas[name], swing)
    return FitResult(
        model=result.model,
        params=result.params,
        sigmas=sigmas,
        chi2_reduced=result.chi2_reduced,
        converged=result.converged,
        n_points=result.n_points,
        flags=result.flags,
    )


def _bunching_points(seps, values, pair_counts, baseline_counts):
    """Lag magnitudes, g2 values and Poisson sigmas with lag 0 removed."""
    nonzero = seps != 0
    x = np.abs(seps[nonzero]).astype(np.float64)
    y = np.asarray(values, dtype=np.float64)[nonzero]
    if x.size < 4:
        raise EstimatorError("need at least 4 nonzero lags to fit bunching")
    order = np.argsort(x)
    xs, ys = x[order], y[order]
    if pair_counts is None:
        sigma = np.ones_like(xs)
    else:
        counts = np.asarray(pair_counts, dtype=np.float64)[nonzero][order]
        sigma = np.sqrt(np.maximum(counts, 1.0)) / baseline_counts
    return xs, ys, sigma


def _fit_bunching_points(xs, ys, sigma, unweighted, p0=None):
    if p0 is None:
        near = ys[xs <= xs[0] + 1.0]
        a0 = max(float(near.mean() - 1.0), 1e-6)
        tau0, a_log = _log_slope_tau(xs, ys - 1.0, fallback=float(xs.max()) / 5.0)
        tau0 = min(max(tau0, 1e-3), 10 * float(xs.max()))
        p0 = [a0 if a_log is None else max(a_log, 1e-6), tau0]
    return _fit(
        _bunching_model,
        _bunching_jac,
        xs,
        ys,
        sigma,
        p0=p0,
        bounds=([0.0, 1e-9], [np.inf, np.inf]),
        names=("amplitude", "tau_pulses"),
        label="g2-bunching",
        scale_cov=unweighted,
    )


def _fit_bunching_g2(g2: PulsedG2, p0=None) -> FitResult:
    xs, ys, sigma = _bunching_points(np.asarray(g2.pulse_sep), np.asarray(g2.g2),
                                     g2.counts, g2.baseline_counts)

    def fit_once(values_fit, sigma_fit, p0_fit):
        return _fit_bunching_points(xs, values_fit, sigma_fit, unweighted=False, p0=p0_fit)

    result = fit_once(ys, sigma, p0)
    return _renormalize_bunching(g2, result, fit_once, ys, sigma)


def _jackknife_bunching(g2: PulsedG2, result: FitResult) -> FitResult:
    """Replace covariance sigmas by delete-one-block jackknife estimates.

    Pair counts at different lags share tags and blinking bursts, so their
    joint fluctuations exceed what independent per-lag Poisson weights can
    describe; the covariance sigmas come out 15-20% optimistic for tau.
    Counts are additive over contiguous pulse blocks, so refitting with one
    block removed at a time measures the full sampling variance of the
    parameters, correlations and renormalization included.  The covariance
    sigmas act as a floor in case the replicate spread degenerates.
    """
    if not all(math.isfinite(v) for v in result.params.values()):
        return result
    blocks = np.asarray(g2.block_counts, dtype=np.float64)
    total = blocks.sum(axis=0)
    seps = np.asarray(g2.pulse_sep)
    lo, hi = g2.baseline_range
    window = (np.abs(seps) >= lo) & (np.abs(seps) <= hi)
    p0 = [max(result.params["amplitude"], 1e-6), max(result.params["tau_pulses"], 1e-3)]
    replicates = []
    for k in range(blocks.shape[0]):
        c_k = total - blocks[k]
        baseline = float(c_k[window].mean())
        if baseline <= 0.0:
            continue
        rep = PulsedG2(pulse_sep=seps, counts=c_k, g2=c_k / baseline,
                       baseline_counts=baseline, baseline_range=g2.baseline_range)
        try:
            fit = _fit_bunching_g2(rep, p0=p0)
        except EstimatorError:
            continue
        if all(math.isfinite(v) for v in fit.params.values()):
            replicates.append([fit.params["amplitude"], fit.params["tau_pulses"]])
    if len(replicates) < 8:
        return result
    reps = np.asarray(replicates)
    n = reps.shape[0]
    jk_sigma = np.sqrt((n - 1) / n * ((reps - reps.mean(axis=0)) ** 2).sum(axis=0))
    sigmas = dict(result.sigmas)
    for i, name in enumerate(("amplitude", "tau_pulses")):
        sigmas[name] = max(sigmas[name], float(jk_sigma[i]))
    return FitResult(
        model=result.model,
        params=result.params,
        sigmas=sigmas,
        chi2_reduced=result.chi2_reduced,
        converged=result.converged,
        n_points=result.n_points,
        flags=result.flags + ("jackknife-sigmas",),
    )


def fit_bunching(g2: PulsedG2 | tuple[Sequence, Sequence]) -> FitResult:
    """Fit 1 + A * exp(-|n| / tau) to normalized g2 values, excluding n = 0.

    Blinking makes neighboring pulses correlated; A and tau (in pulses) are
    the bunching amplitude and its decay constant.  Given a PulsedG2 the
    points are weighted by their Poisson errors sqrt(max(n, 1)) / baseline,
    the normalization is corrected for the decay's own residual inside the
    baseline window, and the sigmas are estimated by a delete-one-block
    jackknife when per-block counts are available (they account for the
    correlations between lags that plain Poisson weights miss).  A bare
    (seps, values) pair is fit unweighted with uncertainties scaled from
    the residual scatter.  When the fitted amplitude is consistent with
    zero the decay constant means nothing, so the result is collapsed to
    amplitude 0 with a ``tau-unidentifiable`` flag.  Params: ``amplitude``,
    ``tau_pulses``.
    """
    if isinstance(g2, PulsedG2):
        result = _fit_bunching_g2(g2)
        if g2.block_counts is not None:
            result = _jackknife_bunching(g2, result)
    else:
        seps, values = (np.asarray(v) for v in g2)
        xs, ys, sigma = _bunching_points(seps, values, None, 1.0)
        result = _fit_bunching_points(xs, ys, sigma, unweighted=True)
    insignificant = result.params["amplitude"] < max(1e-6, result.sigmas["amplitude"])
    if insignificant or not math.isfinite(result.sigmas["tau_pulses"]):
        result = FitResult(
            model=result.model,
            params={"amplitude": 0.0, "tau_pulses": math.nan},
            sigmas={"amplitude": result.sigmas["amplitude"], "tau_pulses": math.nan},
            chi2_reduced=result.chi2_reduced,
            converged=result.converged,
            n_points=result.n_points,
            flags=result.flags + ("tau-unidentifiable",),
        )
    return result


# ---------------------------------------------------------------------------
# noise density


@dataclass(frozen=True)
class NoiseDensityEstimate:
    """Spectral noise density with a Bayesian 68% credible interval.

    The detected rate is dark-subtracted and divided by
    eta_snspd * filter_fwhm_pm * t_fbg; the interval comes from the Poisson
    posterior under a flat prior on the non-negative total rate, so its lower
    bound can never be negative.
    """

    density_cts_s_pm: float
    ci_low_cts_s_pm: float
    ci_high_cts_s_pm: float
    detected_rate_cps: float
    duration_s: float

    def covers(self, density_cts_s_pm: float) -> bool:
        return self.ci_low_cts_s_pm <= density_cts_s_pm <= self.ci_high_cts_s_pm


def noise_density(
    count_rate_cps: float,
    duration_s: float,
    eta_snspd: float,
    filter_fwhm_pm: float,
    t_fbg: float = 1.0,
    dark_count_cps: float = 0.0,
) -> NoiseDensityEstimate:
    """Noise spectral density from a detected count rate.

    The posterior of the total rate given k = rate * duration observed counts
    and a flat prior on [0, inf) is Gamma(k + 1, scale = 1/duration).  The
    68% interval is the central one, except when the dark-subtracted point
    estimate is zero: then the posterior mass is piled against the physical
    boundary and the interval is one-sided, [0, q68].  Dark counts are
    subtracted in rate space with clipping at zero.
    """
    if count_rate_cps < 0:
        raise ConfigError(f"count_rate_cps must be non-negative, got {count_rate_cps}")
    if duration_s <= 0:
        raise ConfigError(f"duration_s must be positive, got {duration_s}")
    if not 0.0 < eta_snspd <= 1.0:
        raise ConfigError(f"eta_snspd must be in (0, 1], got {eta_snspd}")
    if filter_fwhm_pm <= 0:
        raise ConfigError(f"filter_fwhm_pm must be positive, got {filter_fwhm_pm}")
    if not 0.0 < t_fbg <= 1.0:
        raise ConfigError(f"t_fbg must be in (0, 1], got {t_fbg}")
    if dark_count_cps < 0:
        raise ConfigError(f"dark_count_cps must be non-negative, got {dark_count_cps}")

    norm = eta_snspd * filter_fwhm_pm * t_fbg
    k = count_rate_cps * duration_s
    point_rate = max(count_rate_cps - dark_count_cps, 0.0)

    def quantile(q):
        return float(gamma_dist.ppf(q, k + 1.0, scale=1.0 / duration_s))

    if point_rate == 0.0:
        lo_rate, hi_rate = 0.0, max(quantile(0.68) - dark_count_cps, 0.0)
    else:
        lo_rate = max(quantile(0.16) - dark_count_cps, 0.0)
        hi_rate = max(quantile(0.84) - dark_count_cps, 0.0)
    return NoiseDensityEstimate(
        density_cts_s_pm=point_rate / norm,
        ci_low_cts_s_pm=lo_rate / norm,
        ci_high_cts_s_pm=hi_rate / norm,
        detected_rate_cps=count_rate_cps,
        duration_s=duration_s,
    )


# ---------------------------------------------------------------------------
# conversion efficiency curve


def _sine_model(p, eta_max, alpha):
    u = np.sqrt(np.maximum(alpha * p, 0.0))
    return eta_max * np.sin(u) ** 2


def _sine_jac(p, eta_max, alpha):
    u = np.sqrt(np.maximum(alpha * p, 0.0))
    d_eta = np.sin(u) ** 2
    # d/d alpha = eta_max * sin(2u) * p / (2u), with the u -> 0 limit p * eta_max
    with np.errstate(invalid="ignore", divide="ignore"):
        d_alpha = np.where(u > 0, eta_max * np.sin(2 * u) * p / (2 * u), eta_max * p)
    return np.column_stack([d_eta, d_alpha])


@dataclass(frozen=True)
class EfficiencyCurveFit:
    """Saturating-sine efficiency fit with a straight-line comparison."""

    sine: FitResult
    linear: FitResult
    preferred: str = field(default="")

    def efficiency_at(self, pump_power_w: float) -> float:
        return float(_sine_model(np.asarray(pump_power_w, dtype=float), *self.sine.params.values()))


def fit_efficiency_curve(pump_powers_w, efficiencies, sigmas=None) -> EfficiencyCurveFit:
    """Fit eta(P) = eta_max * sin^2(sqrt(alpha * P)) to sweep points.

    Also fits a straight line and reports which model has the lower reduced
    chi-square; a measured curve that rises linearly where the sine model
    predicts saturation shows up as ``preferred == "linear"``.
    """
    p = np.asarray(pump_powers_w, dtype=np.float64)
    y = np.asarray(efficiencies, dtype=np.float64)
    if p.size != y.size:
        raise ConfigError("pump_powers_w and efficiencies must have equal length")
    if np.unique(p).size < 3:
        raise EstimatorError("need at least 3 distinct pump powers to fit the efficiency curve")
    sigma = np.ones_like(y) if sigmas is None else np.asarray(sigmas, dtype=np.float64)
    if np.any(sigma <= 0):
        raise ConfigError("sigmas must be positive")

    eta0 = min(max(float(y.max()), 1e-6), 1.0)
    i_pk = int(np.argmax(y))
    if p[i_pk] > 0:
        ratio = min(max(y[i_pk] / eta0, 1e-9), 1.0)
        alpha0 = math.asin(math.sqrt(ratio)) ** 2 / p[i_pk]
    else:
        alpha0 = 1e-3
    sine = _fit(
        _sine_model,
        _sine_jac,
        p,
        y,
        sigma,
        p0=[eta0, max(alpha0, 1e-12)],
        bounds=([1e-9, 1e-15], [1.0, np.inf]),
        names=("eta_max", "alpha_l2_per_w"),
        label="saturating-sine",
        scale_cov=sigmas is None,
    )

    def line_model(x, m, c):
        return m * x + c

    def line_jac(x, m, c):
        return np.column_stack([x, np.ones_like(x)])

    m0 = float(np.polyfit(p, y, 1)[0])
    linear = _fit(
        line_model,
        line_jac,
        p,
        y,
        sigma,
        p0=[m0, float(y.min())],
        bounds=([-np.inf, -np.inf], [np.inf, np.inf]),
        names=("slope", "intercept"),
        label="linear",
        scale_cov=sigmas is None,
    )
    preferred = "sine" if sine.chi2_reduced <= linear.chi2_reduced else "linear"
    return EfficiencyCurveFit(sine=sine, linear=linear, preferred=preferred)


def acceptance_bandwidth(detunings_hz, responses, threshold: float = 0.8) -> float:
    """Width of the detuning region where the response exceeds threshold * max.

    Crossing points are linearly interpolated between samples on both sides
    of the peak; the sweep must actually cross the threshold on each side.
    """
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"threshold must be in (0, 1), got {threshold}")
    x = np.asarray(detunings_hz, dtype=np.float64)
    y = np.asarray(responses, dtype=np.float64)
    if x.size != y.size or x.size < 3:
        raise EstimatorError("need at least 3 sweep points")
    order = np.argsort(x)
    x, y = x[order], y[order]
    y = y / y.max()
    peak = int(np.argmax(y))

    def crossing(idx_from, idx_to, step):
        prev = idx_from
        for i in range(idx_from + step, idx_to + step, step):
            if y[i] < threshold:
                # interpolate between i (below) and prev (above)
                frac = (threshold - y[i]) / (y[prev] - y[i])
                return x[i] + frac * (x[prev] - x[i])
            prev = i
        raise EstimatorError("sweep does not cross the threshold on both sides of the peak")

    left = crossing(peak, 0, -1)
    right = crossing(peak, x.size - 1, +1)
    return float(right - left)


# ---------------------------------------------------------------------------
# scalar efficiency corrections


def photon_number_efficiency(power_in_w, power_out_w, lambda_in_m, lambda_out_m) -> float:
    """Photon-number conversion efficiency from measured optical powers.

    Corrects the power ratio for the photon energy change:
    (P_out / P_in) * (lambda_out / lambda_in).
    """
    if power_in_w <= 0 or power_out_w < 0:
        raise ConfigError("powers must be positive (input) and non-negative (output)")
    if lambda_in_m <= 0 or lambda_out_m <= 0:
        raise ConfigError("wavelengths must be positive")
    return (power_out_w / power_in_w) * (lambda_out_m / lambda_in_m)


def internal_efficiency(measured_efficiency: float, coating_loss: float = 0.08) -> float:
    """Undo a known end-facet coating loss from a measured efficiency.

    Flags (warns about) corrected values above 1, which indicate an
    overestimated loss rather than physics.
    """
    if not 0.0 <= coating_loss < 1.0:
        raise ConfigError(f"coating_loss must be in [0, 1), got {coating_loss}")
    if measured_efficiency < 0:
        raise ConfigError(f"measured_efficiency must be non-negative, got {measured_efficiency}")
    corrected = measured_efficiency / (1.0 - coating_loss)
    if corrected > 1.0:
        warnings.warn("coating-corrected efficiency exceeds 1; correction is unphysical", stacklevel=2)
    return corrected

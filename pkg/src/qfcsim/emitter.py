"""Pulsed single-photon emitter simulation with two-state blinking.

The emitter is excited at a fixed repetition rate.  Charge-state blinking is
modeled as a bright/dark telegraph sampled once per pulse: transition
probabilities p_bd = (1 - beta) / tau and p_db = beta / tau give a stationary
bright probability beta and an exponentially decaying intensity
autocorrelation, which is what the pulse-wise g2 estimator fits.  A bright
pulse yields at most one primary photon; its detection time is the pulse time
plus an exponential decay delay plus Gaussian detector jitter.  A homogeneous
Poisson background is added on top.

Generation is vectorized over contiguous pulse blocks.  Block i draws from the
substream (seed, i) and the telegraph state is handed off sequentially across
block boundaries, so results are bit-identical for a given seed regardless of
how many blocks the pulse count spans.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import BLOCK_SPLIT, CHANNEL_SECOND, CHANNEL_SIGNAL, ConfigError, TAG_DTYPE, empty_tags, make_rng

#: Pulses per simulation block; one RNG substream per block.
BLOCK_PULSES = 1 << 22

_FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass(frozen=True)
class EmitterConfig:
    """Parameters of the pulsed emitter model.

    ``p_detect_per_pulse`` is the unconditional detection probability per
    excitation pulse; internally it is divided by ``bright_fraction`` to get
    the per-bright-pulse probability, so the configured value is what a rate
    measurement sees.  ``p_secondary_per_pulse`` is the probability that a
    bright pulse yields one additional, independently timed detection
    (imperfect single-photon purity: re-excitation within the excitation pulse
    and unfiltered same-emitter leakage).  It is zero by default, in which
    case no two emitter photons ever share a pulse.
    """

    n_pulses: int
    rep_rate_hz: float = 1.0e6
    lifetime_ns: float = 7.47
    p_detect_per_pulse: float = 9.33e-4
    bright_fraction: float = 1.0
    telegraph_tau_pulses: float = 7.5
    background_rate_cps: float = 0.0
    detector_jitter_ps_fwhm: float = 400.0
    p_secondary_per_pulse: float = 0.0

    def validate(self) -> "EmitterConfig":
        if self.n_pulses < 0:
            raise ConfigError(f"n_pulses must be non-negative, got {self.n_pulses}")
        if self.rep_rate_hz <= 0:
            raise ConfigError(f"rep_rate_hz must be positive, got {self.rep_rate_hz}")
        if self.lifetime_ns <= 0:
            raise ConfigError(f"lifetime_ns must be positive, got {self.lifetime_ns}")
        if self.lifetime_ns * 1e-9 * self.rep_rate_hz >= 0.1:
            raise ConfigError("pulse period must be much longer than the lifetime")
        if not 0.0 < self.bright_fraction <= 1.0:
            raise ConfigError(f"bright_fraction must be in (0, 1], got {self.bright_fraction}")
        if not 0.0 <= self.p_detect_per_pulse <= self.bright_fraction:
            raise ConfigError(
                "p_detect_per_pulse must be in [0, bright_fraction] so the "
                f"per-bright-pulse probability stays below 1, got {self.p_detect_per_pulse}"
            )
        if self.telegraph_tau_pulses <= 0:
            raise ConfigError(f"telegraph_tau_pulses must be positive, got {self.telegraph_tau_pulses}")
        if max(self.bright_fraction, 1.0 - self.bright_fraction) > self.telegraph_tau_pulses:
            raise ConfigError("telegraph_tau_pulses too short: per-pulse switch probability exceeds 1")
        if self.background_rate_cps < 0:
            raise ConfigError(f"background_rate_cps must be non-negative, got {self.background_rate_cps}")
        if self.detector_jitter_ps_fwhm < 0:
            raise ConfigError(f"detector_jitter_ps_fwhm must be non-negative, got {self.detector_jitter_ps_fwhm}")
        if not 0.0 <= self.p_secondary_per_pulse <= 1.0:
            raise ConfigError(f"p_secondary_per_pulse must be in [0, 1], got {self.p_secondary_per_pulse}")
        return self

    @property
    def period_ps(self) -> float:
        return 1e12 / self.rep_rate_hz

    @property
    def duration_s(self) -> float:
        return self.n_pulses / self.rep_rate_hz

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EmitterConfig":
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown EmitterConfig fields: {sorted(unknown)}")
        if "n_pulses" not in data:
            raise ConfigError("EmitterConfig requires n_pulses")
        cfg = cls(**{k: (int(v) if k == "n_pulses" else float(v)) for k, v in data.items()})
        return cfg.validate()


def bunching_amplitude(bright_fraction: float) -> float:
    """Amplitude of the blinking-induced g2 bunching, (1 - beta) / beta."""
    if not 0.0 < bright_fraction <= 1.0:
        raise ConfigError(f"bright_fraction must be in (0, 1], got {bright_fraction}")
    return (1.0 - bright_fraction) / bright_fraction


def telegraph_correlation_pulses(telegraph_tau_pulses: float) -> float:
    """Exponential decay constant (in pulses) of the sampled telegraph.

    The per-pulse chain decorrelates by a factor rho = 1 - 1/tau per pulse, so
    an exponential fit to the autocorrelation recovers -1/ln(rho), which
    approaches tau for tau >> 1.  This is the config-derived truth the
    bunching estimator should be compared against.
    """
    rho = 1.0 - 1.0 / telegraph_tau_pulses
    if rho <= 0.0:
        return 0.0
    return -1.0 / math.log(rho)


# ---------------------------------------------------------------------------
# telegraph state machinery


def _alternating_runs(rng, n_pulses, entry_bright, p_bd, p_db):
    """Sojourn lengths of the telegraph covering exactly ``n_pulses`` pulses.

    Returns (lengths, exit_bright): ``lengths`` alternate in state starting
    with a run in ``entry_bright``; ``exit_bright`` is the state of the pulse
    immediately after the covered range (the next block's entry state).
    Sojourns are geometric with the state's leave probability, which is the
    run-length distribution of the per-pulse Markov chain.
    """
    p_leave = {True: p_bd, False: p_db}
    parts = []
    covered = 0
    state = bool(entry_bright)
    exit_bright = state
    while covered < n_pulses:
        need = n_pulses - covered
        pa, pb = p_leave[state], p_leave[not state]
        if pa <= 0.0:
            parts.append(np.array([need], dtype=np.int64))
            exit_bright = state
            covered = n_pulses
            break
        mean_cycle = 1.0 / pa + (1.0 / pb if pb > 0.0 else float(need))
        est_pairs = int(need / mean_cycle * 1.2) + 8
        lens = np.empty(2 * est_pairs, dtype=np.int64)
        lens[0::2] = rng.geometric(pa, est_pairs)
        lens[1::2] = rng.geometric(pb, est_pairs) if pb > 0.0 else need
        cum = np.cumsum(lens)
        if cum[-1] < need:
            parts.append(lens)
            covered += int(cum[-1])
            continue  # even run count: next batch starts in the same state
        k = int(np.searchsorted(cum, need))
        overshoot = int(cum[k] - need)
        lens = lens[: k + 1].copy()
        lens[-1] -= overshoot
        parts.append(lens)
        run_state = state if k % 2 == 0 else not state
        # overshoot: the final sojourn continues into the next block; exact
        # exhaustion: the chain switches on the next pulse
        exit_bright = run_state if overshoot > 0 else not run_state
        covered = n_pulses
    lengths = np.concatenate(parts) if len(parts) > 1 else parts[0]
    return lengths, exit_bright


def telegraph_sequence(n_pulses, bright_fraction, telegraph_tau_pulses, rng) -> np.ndarray:
    """Boolean bright/dark state per pulse for a stationary telegraph."""
    if n_pulses == 0:
        return np.empty(0, dtype=bool)
    p_bd = (1.0 - bright_fraction) / telegraph_tau_pulses
    p_db = bright_fraction / telegraph_tau_pulses
    entry = bool(rng.random() < bright_fraction)
    lengths, _ = _alternating_runs(rng, n_pulses, entry, p_bd, p_db)
    states = np.zeros(len(lengths), dtype=bool)
    states[0::2] = entry
    states[1::2] = not entry
    return np.repeat(states, lengths)


def _bernoulli_positions(rng, n_slots, p):
    """Sorted indices of the successes of a Bernoulli(p) process over n_slots."""
    if p <= 0.0 or n_slots == 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(n_slots, dtype=np.int64)
    chunks = []
    pos = -1
    while True:
        expected = (n_slots - pos) * p
        est = int(expected + 6.0 * math.sqrt(expected + 1.0)) + 16
        cum = pos + np.cumsum(rng.geometric(p, est))
        if cum[-1] >= n_slots:
            chunks.append(cum[cum < n_slots])
            break
        chunks.append(cum)
        pos = int(cum[-1])
    return np.concatenate(chunks) if len(chunks) > 1 else chunks[0]


def _bright_spans(lengths, entry_bright):
    starts = np.concatenate(([0], np.cumsum(lengths)[:-1]))
    bright = np.zeros(len(lengths), dtype=bool)
    bright[0::2] = entry_bright
    bright[1::2] = not entry_bright
    return starts[bright], lengths[bright]


def _positions_to_pulses(positions, bright_starts, bright_lengths):
    cum = np.cumsum(bright_lengths)
    run = np.searchsorted(cum, positions, side="right")
    before = np.where(run > 0, cum[np.maximum(run - 1, 0)], 0)
    return bright_starts[run] + (positions - before)


# ---------------------------------------------------------------------------
# emission


def _emit_photon_times(rng, pulse_indices, block_start, period_ps, tau_ps, jitter_sigma_ps):
    t = (block_start + pulse_indices).astype(np.float64) * period_ps
    t += rng.exponential(tau_ps, pulse_indices.size)
    if jitter_sigma_ps > 0.0:
        t += rng.normal(0.0, jitter_sigma_ps, pulse_indices.size)
    return t


def simulate_emission(config: EmitterConfig, seed: int) -> np.ndarray:
    """Simulate the emitter; returns a sorted channel-0 tag stream.

    Two calls with equal (config, seed) return bit-identical streams.
    """
    config.validate()
    if config.n_pulses == 0:
        return empty_tags()

    beta = config.bright_fraction
    p_bd = (1.0 - beta) / config.telegraph_tau_pulses
    p_db = beta / config.telegraph_tau_pulses
    p_primary = config.p_detect_per_pulse / beta
    period_ps = config.period_ps
    tau_ps = config.lifetime_ns * 1e3
    sigma_ps = config.detector_jitter_ps_fwhm * _FWHM_TO_SIGMA
    bg_per_pulse = config.background_rate_cps * period_ps * 1e-12

    times_parts = []
    entry_bright = None
    n_blocks = (config.n_pulses + BLOCK_PULSES - 1) // BLOCK_PULSES
    for block in range(n_blocks):
        rng = make_rng(seed, block)
        start = block * BLOCK_PULSES
        count = min(BLOCK_PULSES, config.n_pulses - start)
        if entry_bright is None:
            entry_bright = bool(rng.random() < beta)
        lengths, exit_bright = _alternating_runs(rng, count, entry_bright, p_bd, p_db)
        bright_starts, bright_lengths = _bright_spans(lengths, entry_bright)
        n_bright = int(bright_lengths.sum())

        for p_channel in (p_primary, config.p_secondary_per_pulse):
            if p_channel <= 0.0 or n_bright == 0:
                continue
            positions = _bernoulli_positions(rng, n_bright, p_channel)
            pulses = _positions_to_pulses(positions, bright_starts, bright_lengths)
            times_parts.append(_emit_photon_times(rng, pulses, start, period_ps, tau_ps, sigma_ps))

        if bg_per_pulse > 0.0:
            n_bg = rng.poisson(bg_per_pulse * count)
            if n_bg:
                times_parts.append((start + rng.uniform(0.0, count, n_bg)) * period_ps)

        entry_bright = exit_bright

    if not times_parts:
        return empty_tags()
    times = np.concatenate(times_parts)
    times = np.maximum(np.rint(times), 0.0).astype(np.uint64)
    times.sort(kind="stable")
    tags = np.zeros(times.size, dtype=TAG_DTYPE)
    tags["time_ps"] = times
    tags["channel"] = CHANNEL_SIGNAL
    return tags


def split_50_50(tags: np.ndarray, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Randomly route each tag to one of two detectors (channels 0 and 1).

    The union of the outputs is exactly the input's times; both outputs stay
    sorted.
    """
    rng = make_rng(seed, BLOCK_SPLIT)
    to_first = rng.random(tags.size) < 0.5
    first = tags[to_first].copy()
    second = tags[~to_first].copy()
    first["channel"] = CHANNEL_SIGNAL
    second["channel"] = CHANNEL_SECOND
    return first, second

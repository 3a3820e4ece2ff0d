"""Shared domain types: time-tag streams, unit conversions, seeded RNG, binary I/O.

All photon arrival times are integer picoseconds on an unsigned 64-bit time
base.  A stream is a numpy structured array with fields ``time_ps`` (u64),
``channel`` (u32) and ``reserved`` (u32), sorted by ``time_ps``.  Channel 0 is
the signal detector, channel 1 the second detector of a correlation setup,
channel 2 is reserved for sync/pulse markers.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

#: Speed of light in vacuum, exact by SI definition.
C_VACUUM_M_PER_S = 299_792_458.0

CHANNEL_SIGNAL = 0
CHANNEL_SECOND = 1
CHANNEL_SYNC = 2
_MAX_CHANNEL = 2

#: On-disk/in-memory record layout, 16 bytes per tag, little endian.
TAG_DTYPE = np.dtype([("time_ps", "<u8"), ("channel", "<u4"), ("reserved", "<u4")])

QTT_MAGIC = b"QTT1"
QTT_VERSION = 1
_QTT_HEADER = struct.Struct("<4sIQ")  # magic, version, record count


class ConfigError(ValueError):
    """A configuration value violates its documented range or consistency rule."""


class FormatError(ValueError):
    """A serialized time-tag stream is malformed.

    ``byte_offset`` points at the first byte of the offending header field or
    record.
    """

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


@dataclass(frozen=True)
class TimeTagRecord:
    """A single detection event: channel plus arrival time in integer ps."""

    channel: int
    time_ps: int

    def __post_init__(self):
        if not 0 <= self.channel <= _MAX_CHANNEL:
            raise ConfigError(f"channel must be in 0..{_MAX_CHANNEL}, got {self.channel}")
        if not 0 <= self.time_ps < 2**64:
            raise ConfigError(f"time_ps must fit in u64, got {self.time_ps}")


def empty_tags() -> np.ndarray:
    return np.empty(0, dtype=TAG_DTYPE)


def make_tags(times_ps, channels=CHANNEL_SIGNAL, *, sort: bool = False) -> np.ndarray:
    """Build a tag stream from arrays of times (ps) and channel numbers.

    ``channels`` may be a scalar or an array matching ``times_ps``.  The input
    must already be sorted by time unless ``sort=True``.
    """
    if isinstance(times_ps, np.ndarray):
        times = times_ps
    else:
        # keep python int sequences exact; numpy would promote mixed-magnitude
        # int lists to float64 and corrupt times near 2**64
        seq = list(times_ps)
        if any(isinstance(v, float) for v in seq):
            times = np.asarray(seq, dtype=np.float64)
        else:
            times = np.asarray(seq, dtype=object) if seq else np.empty(0, np.uint64)
    if times.size and times.min() < 0:
        raise ConfigError("tag times must be non-negative")
    if times.dtype.kind == "f":
        times = np.rint(times)
    times = times.astype(np.uint64)
    tags = np.zeros(times.size, dtype=TAG_DTYPE)
    tags["time_ps"] = times
    tags["channel"] = channels
    if np.any(tags["channel"] > _MAX_CHANNEL):
        raise ConfigError(f"channel must be in 0..{_MAX_CHANNEL}")
    if sort:
        tags = tags[np.argsort(tags["time_ps"], kind="stable")]
    elif times.size > 1 and np.any(times[1:] < times[:-1]):
        raise ConfigError("tag times must be non-decreasing (pass sort=True to sort)")
    return tags


def merge_tags(*streams: np.ndarray) -> np.ndarray:
    """Merge already-sorted streams into one stream sorted by time."""
    parts = [s for s in streams if s.size]
    if not parts:
        return empty_tags()
    merged = np.concatenate(parts)
    return merged[np.argsort(merged["time_ps"], kind="stable")]


def records_to_tags(records) -> np.ndarray:
    times = np.fromiter((r.time_ps for r in records), dtype=np.uint64, count=len(records))
    chans = np.fromiter((r.channel for r in records), dtype=np.uint32, count=len(records))
    return make_tags(times, chans)


def tags_to_records(tags: np.ndarray) -> list[TimeTagRecord]:
    return [TimeTagRecord(int(c), int(t)) for t, c in zip(tags["time_ps"], tags["channel"])]


# ---------------------------------------------------------------------------
# unit conversions


def wavelength_to_frequency(wavelength_m: float) -> float:
    """Vacuum wavelength (m) to optical frequency (Hz)."""
    if wavelength_m <= 0:
        raise ConfigError(f"wavelength must be positive, got {wavelength_m}")
    return C_VACUUM_M_PER_S / wavelength_m


def frequency_to_wavelength(frequency_hz: float) -> float:
    """Optical frequency (Hz) to vacuum wavelength (m)."""
    if frequency_hz <= 0:
        raise ConfigError(f"frequency must be positive, got {frequency_hz}")
    return C_VACUUM_M_PER_S / frequency_hz


def freq_bandwidth_to_wavelength(delta_nu_hz: float, center_wavelength_m: float) -> float:
    """First-order conversion of a frequency bandwidth to a wavelength bandwidth.

    delta_lambda = lambda^2 * delta_nu / c, valid for delta_nu much smaller
    than the optical frequency.  Returns meters.
    """
    if delta_nu_hz < 0:
        raise ConfigError(f"bandwidth must be non-negative, got {delta_nu_hz}")
    if center_wavelength_m <= 0:
        raise ConfigError(f"wavelength must be positive, got {center_wavelength_m}")
    return center_wavelength_m**2 * delta_nu_hz / C_VACUUM_M_PER_S


# ---------------------------------------------------------------------------
# deterministic RNG contract

#: Block index offsets reserving disjoint substream spaces per pipeline stage.
BLOCK_CONVERT = 1 << 48
BLOCK_SPLIT = 1 << 49


@dataclass(frozen=True)
class RngSeed:
    """Seed contract: (seed, block_index) selects an independent substream.

    Streams are produced by numpy's PCG64 seeded through
    ``SeedSequence(entropy=seed, spawn_key=(block_index,))``.  Equal
    (seed, block_index) pairs give bit-identical streams on any platform;
    distinct block indices give statistically independent streams.  The
    generator choice is pinned: changing it changes every simulated dataset.
    """

    seed: int
    block_index: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a u64, got {self.seed}")
        if self.block_index < 0:
            raise ConfigError(f"block_index must be non-negative, got {self.block_index}")

    def generator(self) -> np.random.Generator:
        return make_rng(self.seed, self.block_index)


def make_rng(seed: int, block_index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(block_index,))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, index: int) -> int:
    """Derive a child seed for sweep point ``index``; stable across runs."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(0x5EED, index))
    return int(ss.generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# QTT1 serialization


def write_timetags(tags: np.ndarray) -> bytes:
    """Serialize a sorted tag stream to the QTT1 byte format.

    Layout: 16-byte header (magic ``QTT1``, u32 version, u64 record count)
    followed by ``record count`` 16-byte records (u64 time_ps, u32 channel,
    u32 reserved = 0), all little endian.
    """
    tags = np.ascontiguousarray(tags, dtype=TAG_DTYPE)
    times = tags["time_ps"]
    if tags.size > 1 and np.any(times[1:] < times[:-1]):
        raise ConfigError("stream must be sorted by time_ps before serialization")
    if tags.size and tags["channel"].max() > _MAX_CHANNEL:
        raise ConfigError(f"channel must be in 0..{_MAX_CHANNEL}")
    out = tags.copy()
    out["reserved"] = 0
    header = _QTT_HEADER.pack(QTT_MAGIC, QTT_VERSION, out.size)
    return header + out.tobytes()


def read_timetags(data: bytes) -> np.ndarray:
    """Parse QTT1 bytes back into a tag stream; inverse of write_timetags."""
    if len(data) < _QTT_HEADER.size:
        raise FormatError("truncated header", byte_offset=len(data))
    magic, version, count = _QTT_HEADER.unpack_from(data, 0)
    if magic != QTT_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {QTT_MAGIC!r}", byte_offset=0)
    if version != QTT_VERSION:
        raise FormatError(f"unsupported version {version}", byte_offset=4)
    body = len(data) - _QTT_HEADER.size
    expected = count * TAG_DTYPE.itemsize
    if body < expected:
        # offset of the first record that is missing or cut short
        bad = _QTT_HEADER.size + (body // TAG_DTYPE.itemsize) * TAG_DTYPE.itemsize
        raise FormatError(f"truncated record ({body} body bytes for {count} records)", byte_offset=bad)
    if body > expected:
        raise FormatError("trailing data after last record", byte_offset=_QTT_HEADER.size + expected)
    tags = np.frombuffer(data, dtype=TAG_DTYPE, count=count, offset=_QTT_HEADER.size).copy()
    if tags.size and tags["channel"].max() > _MAX_CHANNEL:
        bad = int(np.argmax(tags["channel"] > _MAX_CHANNEL))
        raise FormatError(
            f"invalid channel {int(tags['channel'][bad])} in record {bad}",
            byte_offset=_QTT_HEADER.size + bad * TAG_DTYPE.itemsize,
        )
    if tags.size > 1:
        times = tags["time_ps"]
        backwards = times[1:] < times[:-1]
        if np.any(backwards):
            bad = int(np.argmax(backwards)) + 1
            raise FormatError(
                f"time regression at record {bad}",
                byte_offset=_QTT_HEADER.size + bad * TAG_DTYPE.itemsize,
            )
    return tags


def save_timetags(path, tags: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(write_timetags(tags))


def load_timetags(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return read_timetags(fh.read())

"""Angle <-> bin geometry shared by encoding, decoding and the losses.

Bins are half-open ``[edge, edge + width)`` and indexed from 0; an angle equal
to the upper range edge falls into the last bin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ANGLE_NAMES = ("yaw", "pitch", "roll")


class OutOfRangeError(ValueError):
    """An angle lies outside the configured binning range."""

    def __init__(self, angle, lo, hi, name=None):
        self.angle = angle
        self.name = name
        label = f"{name} angle" if name else "angle"
        super().__init__(f"{label} {angle!r} outside [{lo}, {hi}]")


@dataclass(frozen=True)
class BinningConfig:
    num_bins: int = 66
    range_min_deg: float = -99.0
    range_max_deg: float = 99.0
    # 0.5 decodes to bin midpoints; 0.0 gives left edges (Hopenet-style 3*idx - 99)
    center_offset: float = 0.5

    def __post_init__(self):
        if int(self.num_bins) != self.num_bins or self.num_bins < 1:
            raise ValueError(f"num_bins must be a positive integer, got {self.num_bins!r}")
        if not (math.isfinite(self.range_min_deg) and math.isfinite(self.range_max_deg)):
            raise ValueError("range bounds must be finite")
        if not self.range_max_deg > self.range_min_deg:
            raise ValueError(
                f"range_max_deg ({self.range_max_deg}) must exceed range_min_deg ({self.range_min_deg})"
            )
        if not math.isclose(self.bin_width_deg * self.num_bins, self.span_deg, rel_tol=1e-12):
            raise ValueError("bin width does not tile the range")
        if not 0.0 <= self.center_offset <= 1.0:
            raise ValueError("center_offset must lie in [0, 1]")

    @property
    def span_deg(self) -> float:
        return self.range_max_deg - self.range_min_deg

    @property
    def bin_width_deg(self) -> float:
        return self.span_deg / self.num_bins

    def centers(self) -> np.ndarray:
        """Decoding angle of every bin, shape ``(num_bins,)``."""
        idx = np.arange(self.num_bins, dtype=np.float64)
        return self.range_min_deg + self.bin_width_deg * (idx + self.center_offset)

    def in_range(self, angle) -> np.ndarray:
        a = np.asarray(angle, dtype=np.float64)
        return (a >= self.range_min_deg) & (a <= self.range_max_deg)


@dataclass(frozen=True)
class PoseTriple:
    yaw_deg: float
    pitch_deg: float
    roll_deg: float

    def __post_init__(self):
        for name, v in zip(ANGLE_NAMES, self.as_tuple()):
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.yaw_deg, self.pitch_deg, self.roll_deg)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=np.float64)


def angle_to_bin(angle, cfg: BinningConfig, name: str | None = None):
    """Bin index of ``angle`` (scalar or array).

    Raises OutOfRangeError for any angle outside the closed range; the upper
    edge itself maps to the last bin.
    """
    a = np.asarray(angle, dtype=np.float64)
    bad = ~cfg.in_range(a)
    if np.any(bad):
        first = a[bad].flat[0] if a.ndim else float(a)
        raise OutOfRangeError(float(first), cfg.range_min_deg, cfg.range_max_deg, name)
    idx = np.floor((a - cfg.range_min_deg) / cfg.bin_width_deg).astype(np.int64)
    idx = np.clip(idx, 0, cfg.num_bins - 1)
    if idx.ndim == 0:
        return int(idx)
    return idx


def bin_center(idx, cfg: BinningConfig):
    i = np.asarray(idx)
    if not np.issubdtype(i.dtype, np.integer):
        raise TypeError("bin index must be an integer")
    if np.any((i < 0) | (i >= cfg.num_bins)):
        raise IndexError(f"bin index {idx!r} outside [0, {cfg.num_bins - 1}]")
    out = cfg.range_min_deg + cfg.bin_width_deg * (i + cfg.center_offset)
    return float(out) if np.ndim(out) == 0 else out


def _check_width(dist: np.ndarray, cfg: BinningConfig) -> np.ndarray:
    d = np.asarray(dist, dtype=np.float64)
    if d.ndim == 0 or d.shape[-1] == 0:
        raise ValueError("empty distribution")
    if d.shape[-1] != cfg.num_bins:
        raise ValueError(f"distribution has {d.shape[-1]} bins, config has {cfg.num_bins}")
    return d


def expectation_decode(dist, cfg: BinningConfig):
    """Probability-weighted mean of bin centers along the last axis."""
    d = _check_width(dist, cfg)
    out = d @ cfg.centers()
    return float(out) if np.ndim(out) == 0 else out


def argmax_decode(dist, cfg: BinningConfig):
    """Center of the most probable bin. Ties go to the lowest index."""
    d = _check_width(dist, cfg)
    # np.argmax returns the first occurrence of the maximum
    out = cfg.centers()[np.argmax(d, axis=-1)]
    return float(out) if np.ndim(out) == 0 else out


def decode(dist, cfg: BinningConfig, mode: str = "expectation"):
    if mode == "expectation":
        return expectation_decode(dist, cfg)
    if mode == "argmax":
        return argmax_decode(dist, cfg)
    raise ValueError(f"unknown decode mode {mode!r}")

"""Gaussian label distributions over pose bins.

A ground-truth angle is quantized to its bin and the target becomes a
discretized Gaussian over bin indices, truncated at the range edges and
renormalized to sum to one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .binning import ANGLE_NAMES, BinningConfig, PoseTriple, angle_to_bin


@dataclass(frozen=True)
class EncodingConfig:
    sigma: float = 4.0  # in bin units
    binning: BinningConfig = field(default_factory=BinningConfig)

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")


def is_distribution(p, atol: float = 1e-9) -> bool:
    p = np.asarray(p, dtype=np.float64)
    return bool(p.size) and bool(np.all(p >= 0)) and bool(np.all(np.abs(p.sum(axis=-1) - 1.0) <= atol))


def encode_gaussian(gt_bin, cfg: EncodingConfig, prefactor: bool = False) -> np.ndarray:
    """Label distribution centered on ``gt_bin`` (int or integer array).

    ``prefactor`` multiplies each entry by 1/sigma before normalizing; it
    cancels and exists only so the cancellation can be checked.
    Returns shape ``(num_bins,)`` or ``gt_bin.shape + (num_bins,)``.
    """
    k = cfg.binning.num_bins
    gt = np.asarray(gt_bin)
    if not np.issubdtype(gt.dtype, np.integer):
        raise TypeError("gt_bin must be an integer bin index")
    if np.any((gt < 0) | (gt >= k)):
        raise IndexError(f"bin index {gt_bin!r} outside [0, {k - 1}]")
    l = np.arange(k, dtype=np.float64)
    diff = l - gt[..., None].astype(np.float64)
    g = np.exp(-(diff * diff) / (2.0 * cfg.sigma * cfg.sigma))
    if prefactor:
        g = g / cfg.sigma
    return g / g.sum(axis=-1, keepdims=True)


def encode_angles(angles, cfg: EncodingConfig, name: str | None = None) -> np.ndarray:
    return encode_gaussian(angle_to_bin(angles, cfg.binning, name=name), cfg)


def encode_pose(pose: PoseTriple, cfg_y: EncodingConfig, cfg_p: EncodingConfig, cfg_r: EncodingConfig):
    """(yaw, pitch, roll) label distributions for one pose."""
    return tuple(
        encode_angles(a, c, name=n)
        for a, c, n in zip(pose.as_tuple(), (cfg_y, cfg_p, cfg_r), ANGLE_NAMES)
    )


def encode_poses(poses: np.ndarray, cfgs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batch version of :func:`encode_pose` for an ``(n, 3)`` array of angles."""
    poses = np.asarray(poses, dtype=np.float64)
    return tuple(encode_angles(poses[:, j], cfgs[j], name=ANGLE_NAMES[j]) for j in range(3))


def one_hot(gt_bin, num_bins: int) -> np.ndarray:
    gt = np.asarray(gt_bin)
    out = np.zeros(gt.shape + (num_bins,))
    np.put_along_axis(out, gt[..., None], 1.0, axis=-1)
    return out


def fwhm_bins(dist) -> int:
    """Number of bins whose probability is at least half the peak."""
    d = np.asarray(dist, dtype=np.float64)
    return int(np.count_nonzero(d >= 0.5 * d.max()))

"""Distribution losses, the MSE branch and their gradients w.r.t. logits.

Every function accepts a single vector of shape ``(K,)`` or a batch of shape
``(B, K)``. Per-sample losses come back per sample; :func:`total_loss`
reduces them (distribution terms summed over the batch, MSE averaged) and
sums the three angle branches with equal weight.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .binning import ANGLE_NAMES, BinningConfig


class NumericError(FloatingPointError):
    pass


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 0.01
    use_euclidean: bool = True
    use_kl: bool = True
    squared_euclidean: bool = False
    # "gld": Euclidean + KL against soft targets; "ce": soft-max cross-entropy
    distribution_loss: str = "gld"
    decode_mode: str = "expectation"

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha!r}")
        if self.distribution_loss not in ("gld", "ce"):
            raise ValueError(f"unknown distribution_loss {self.distribution_loss!r}")
        if self.decode_mode not in ("expectation", "argmax"):
            raise ValueError(f"unknown decode_mode {self.decode_mode!r}")


def _pair(target, pred):
    t = np.asarray(target, dtype=np.float64)
    p = np.asarray(pred, dtype=np.float64)
    if t.shape != p.shape:
        raise ValueError(f"shape mismatch: target {t.shape} vs prediction {p.shape}")
    return t, p


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise NumericError("non-finite logits")
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(pred, grad_pred) -> np.ndarray:
    """Contract a gradient w.r.t. probabilities with the softmax Jacobian."""
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(grad_pred, dtype=np.float64)
    return p * (g - np.sum(p * g, axis=-1, keepdims=True))


def euclidean_loss(target, pred, squared: bool = False):
    t, p = _pair(target, pred)
    sq = np.sum((t - p) ** 2, axis=-1)
    return sq if squared else np.sqrt(sq)


def euclidean_grad(target, pred, squared: bool = False) -> np.ndarray:
    """Gradient of :func:`euclidean_loss` w.r.t. the logits behind ``pred``."""
    t, p = _pair(target, pred)
    diff = p - t
    if squared:
        g = 2.0 * diff
    else:
        norm = np.sqrt(np.sum(diff * diff, axis=-1, keepdims=True))
        # zero subgradient where the norm is zero up to rounding of the softmax
        live = norm > np.finfo(np.float64).eps * np.sqrt(diff.shape[-1])
        g = np.where(live, diff / np.where(live, norm, 1.0), 0.0)
    return softmax_backward(p, g)


def kl_loss(target, pred):
    """KL(target || pred) with 0 * ln(0 / f) taken as 0."""
    t, p = _pair(target, pred)
    if np.any(p <= 0):
        raise NumericError("prediction has non-positive entries")
    pos = t > 0
    terms = np.zeros_like(t)
    terms[pos] = t[pos] * (np.log(t[pos]) - np.log(p[pos]))
    return terms.sum(axis=-1)


def kl_grad(target, pred) -> np.ndarray:
    t, p = _pair(target, pred)
    return p * t.sum(axis=-1, keepdims=True) - t


def gld_loss(target, pred, use_euclidean: bool = True, use_kl: bool = True, squared: bool = False):
    t, p = _pair(target, pred)
    out = np.zeros(t.shape[:-1])
    if use_euclidean:
        out = out + euclidean_loss(t, p, squared=squared)
    if use_kl:
        out = out + kl_loss(t, p)
    return out if out.ndim else float(out)


def gld_grad(target, pred, use_euclidean: bool = True, use_kl: bool = True, squared: bool = False):
    t, p = _pair(target, pred)
    g = np.zeros_like(p)
    if use_euclidean:
        g = g + euclidean_grad(t, p, squared=squared)
    if use_kl:
        g = g + kl_grad(t, p)
    return g


def mse_loss(pred_angle, gt_angle):
    d = np.asarray(pred_angle, dtype=np.float64) - np.asarray(gt_angle, dtype=np.float64)
    if not np.all(np.isfinite(d)):
        raise NumericError("non-finite angle")
    out = d * d
    return float(out) if out.ndim == 0 else out


def mse_decode_grad(pred, gt_angle, binning: BinningConfig) -> np.ndarray:
    """Gradient of (expectation_decode(softmax(z)) - gt)^2 w.r.t. z, per sample."""
    p = np.asarray(pred, dtype=np.float64)
    c = binning.centers()
    decoded = p @ c
    resid = decoded - np.asarray(gt_angle, dtype=np.float64)
    return 2.0 * resid[..., None] * p * (c - decoded[..., None])


def one_hot_ce_loss(target_bin, pred):
    p = np.asarray(pred, dtype=np.float64)
    if np.any(p <= 0):
        raise NumericError("prediction has non-positive entries")
    tb = np.asarray(target_bin)
    out = -np.log(np.take_along_axis(p, tb[..., None], axis=-1)[..., 0])
    return float(out) if out.ndim == 0 else out


def one_hot_ce_grad(target_bin, pred) -> np.ndarray:
    p = np.array(pred, dtype=np.float64)
    tb = np.asarray(target_bin)
    onehot = np.zeros_like(p)
    np.put_along_axis(onehot, tb[..., None], 1.0, axis=-1)
    return p - onehot


def cross_entropy_loss(target, pred):
    """-sum target * ln pred; equals the one-hot CE for one-hot targets."""
    t, p = _pair(target, pred)
    if np.any(p <= 0):
        raise NumericError("prediction has non-positive entries")
    return -np.sum(t * np.log(p), axis=-1)


def branch_loss(logits, target, gt_angle, cfg: LossConfig, binning: BinningConfig, with_grad=True):
    """Loss and logit gradient of one angle branch, batch-reduced."""
    z = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    t = np.atleast_2d(np.asarray(target, dtype=np.float64))
    gt = np.atleast_1d(np.asarray(gt_angle, dtype=np.float64))
    if z.shape != t.shape or z.shape[-1] != binning.num_bins or gt.shape != z.shape[:1]:
        raise ValueError(
            f"shape mismatch: logits {z.shape}, target {t.shape}, angles {gt.shape}, bins {binning.num_bins}"
        )
    p = softmax(z)
    grad = None
    if cfg.distribution_loss == "gld":
        per = gld_loss(t, p, cfg.use_euclidean, cfg.use_kl, cfg.squared_euclidean)
        if with_grad:
            grad = gld_grad(t, p, cfg.use_euclidean, cfg.use_kl, cfg.squared_euclidean)
    else:
        per = cross_entropy_loss(t, p)
        if with_grad:
            grad = kl_grad(t, p)
    loss = float(np.sum(per))
    if cfg.alpha > 0:
        decoded = p @ binning.centers()
        loss += cfg.alpha * float(np.mean(mse_loss(decoded, gt)))
        if with_grad:
            grad = grad + (cfg.alpha / z.shape[0]) * mse_decode_grad(p, gt, binning)
    return loss, grad


def total_loss(logits, targets, gt_angles, cfg: LossConfig, binning: BinningConfig, with_grad=True):
    """Sum over the yaw/pitch/roll branches of distribution loss + alpha * MSE.

    ``logits`` and ``targets`` are triples of ``(K,)`` or ``(B, K)`` arrays;
    ``gt_angles`` is a PoseTriple, a length-3 vector, or a ``(B, 3)`` array.
    Returns ``(loss, (grad_yaw, grad_pitch, grad_roll))`` with gradients
    shaped like the logits.
    """
    if hasattr(gt_angles, "as_array"):
        gt_angles = gt_angles.as_array()
    gt = np.atleast_2d(np.asarray(gt_angles, dtype=np.float64))
    if len(logits) != 3 or len(targets) != 3 or gt.shape[-1] != 3:
        raise ValueError("expected yaw, pitch and roll triples")
    loss = 0.0
    grads = []
    for j, name in enumerate(ANGLE_NAMES):
        z = np.asarray(logits[j], dtype=np.float64)
        try:
            lj, gj = branch_loss(z, targets[j], gt[:, j], cfg, binning, with_grad)
        except NumericError as exc:
            raise NumericError(f"{name} branch: {exc}") from exc
        if not np.isfinite(lj) or (with_grad and not np.all(np.isfinite(gj))):
            raise NumericError(f"{name} branch: non-finite loss or gradient")
        loss += lj
        if with_grad:
            grads.append(gj.reshape(z.shape))
    return loss, (tuple(grads) if with_grad else None)

"""Central finite-difference checks of every analytic gradient."""
from __future__ import annotations

import numpy as np

from .binning import BinningConfig
from .encoding import EncodingConfig, encode_gaussian
from .losses import (
    LossConfig,
    euclidean_grad,
    euclidean_loss,
    kl_grad,
    kl_loss,
    mse_decode_grad,
    mse_loss,
    one_hot_ce_grad,
    one_hot_ce_loss,
    softmax,
    total_loss,
)
from .net import NetworkConfig, backward, forward, init_params

TOLERANCE = 1e-6
STEP = 1e-5
CHECKS = ("euclidean", "kl", "mse_decode", "one_hot_ce", "total", "network")


def numeric_grad(f, x, h: float = STEP) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    g = np.empty_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f(x)
        flat[i] = old - h
        down = f(x)
        flat[i] = old
        gf[i] = (up - down) / (2.0 * h)
    return g


def numeric_grad_batched(f, x, h: float = STEP) -> np.ndarray:
    """Like :func:`numeric_grad` for ``f`` mapping a stack ``(m,) + x.shape`` to ``(m,)``."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    eye = np.eye(n).reshape((n,) + x.shape) * h
    up = f(x[None] + eye)
    down = f(x[None] - eye)
    return ((up - down) / (2.0 * h)).reshape(x.shape)


def rel_error(analytic, numeric) -> float:
    """max |a - n| scaled by the larger of the two gradients' max magnitudes."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    scale = max(np.max(np.abs(a)), np.max(np.abs(n)), 1e-12)
    return float(np.max(np.abs(a - n)) / scale)


def _like(target, stack):
    return np.broadcast_to(target, np.shape(stack))


def _instances(trials, bins, seed):
    rng = np.random.default_rng(seed)
    binning = BinningConfig(num_bins=bins, range_min_deg=-99.0, range_max_deg=99.0)
    enc = EncodingConfig(4.0, binning)
    for _ in range(trials):
        z = rng.standard_normal(bins)
        gt_bin = int(rng.integers(bins))
        target = encode_gaussian(gt_bin, enc)
        angle = float(rng.uniform(-99.0, 99.0))
        yield rng, binning, z, gt_bin, target, angle


def check_losses(trials: int = 100, bins: int = 66, seed: int = 0, perturb: str | None = None) -> dict:
    """Worst relative error per loss over ``trials`` random instances."""
    worst = {k: 0.0 for k in CHECKS if k != "network"}
    bump = {k: (1.0 + 1e-3 if k == perturb else 1.0) for k in worst}
    cfg = LossConfig(alpha=0.01)
    for rng, binning, z, gt_bin, target, angle in _instances(trials, bins, seed):
        c = binning.centers()
        cases = {
            "euclidean": (lambda v: euclidean_loss(_like(target, v), softmax(v)),
                          euclidean_grad(target, softmax(z))),
            "kl": (lambda v: kl_loss(_like(target, v), softmax(v)),
                   kl_grad(target, softmax(z))),
            "mse_decode": (lambda v: mse_loss(softmax(v) @ c, angle),
                           mse_decode_grad(softmax(z), angle, binning)),
            "one_hot_ce": (lambda v: one_hot_ce_loss(np.full(len(v), gt_bin), softmax(v)),
                           one_hot_ce_grad(gt_bin, softmax(z))),
        }
        zs = rng.standard_normal((3, bins))
        targets = np.stack([encode_gaussian(int(b), EncodingConfig(4.0, binning))
                            for b in rng.integers(bins, size=3)])
        pose = rng.uniform(-99.0, 99.0, size=3)
        _, g3 = total_loss(tuple(zs), tuple(targets), pose, cfg, binning)

        def total_oracle(v):
            # single-sample total assembled from the per-term losses
            p = softmax(v)
            t = _like(targets, p)
            out = euclidean_loss(t, p) + kl_loss(t, p) + cfg.alpha * mse_loss(p @ c, pose)
            return out.sum(axis=-1)

        cases["total"] = (total_oracle, np.stack(g3))
        for name, (f, g) in cases.items():
            x = zs if name == "total" else z
            err = rel_error(g * bump[name], numeric_grad_batched(f, x))
            worst[name] = max(worst[name], err)
    return worst


def check_network(trials: int = 100, seed: int = 0, input_dim: int = 5, hidden=(7,), bins: int = 11,
                  batch: int = 2, perturb: bool = False) -> float:
    """End-to-end d(total_loss)/d(params) on small random networks."""
    rng = np.random.default_rng(seed)
    binning = BinningConfig(num_bins=bins, range_min_deg=-99.0, range_max_deg=99.0)
    enc = EncodingConfig(1.5, binning)
    cfg = LossConfig(alpha=0.01)
    worst = 0.0
    for t in range(trials):
        net = NetworkConfig(input_dim, tuple(hidden), bins, "relu", int(rng.integers(2**32)))
        params = init_params(net) + 0.1 * rng.standard_normal(net.num_params)
        x = rng.standard_normal((batch, input_dim))
        pose = rng.uniform(-99.0, 99.0, size=(batch, 3))
        targets = tuple(encode_gaussian(rng.integers(bins, size=batch), enc) for _ in range(3))

        def f(p):
            return total_loss(forward(p, x, net), targets, pose, cfg, binning, with_grad=False)[0]

        _, glog = total_loss(forward(params, x, net), targets, pose, cfg, binning)
        g = backward(params, x, glog, net)
        if perturb:
            g = g * (1.0 + 1e-3)
        worst = max(worst, rel_error(g, numeric_grad(f, params)))
    return worst


def run_all(trials: int = 100, bins: int = 66, seed: int = 0, perturb: str | None = None) -> dict:
    out = check_losses(trials, bins, seed, perturb=perturb)
    out["network"] = check_network(trials, seed, perturb=(perturb == "network"))
    return out

"""Small multi-head MLP, Adam and the training loop.

The network is a ReLU trunk followed by three fully-connected heads (yaw,
pitch, roll), each with ``num_bins`` outputs. All weights live in one flat
float64 vector; layers are views into it.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .binning import ANGLE_NAMES, BinningConfig, angle_to_bin
from .encoding import EncodingConfig, encode_angles, one_hot
from .losses import LossConfig, NumericError, total_loss

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int = 32
    hidden_dims: tuple[int, ...] = (128,)
    num_bins: int = 66
    activation: str = "relu"
    init_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1 or self.num_bins < 1 or any(h < 1 for h in self.hidden_dims):
            raise ValueError("layer widths must be positive")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")
        if not 0 <= self.init_seed < 2**64:
            raise ValueError("init_seed must be an unsigned 64-bit integer")

    def trunk_shapes(self) -> list[tuple[int, int]]:
        dims = (self.input_dim,) + self.hidden_dims
        return list(zip(dims[:-1], dims[1:]))

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) of every dense layer, trunk first then 3 heads."""
        last = self.hidden_dims[-1] if self.hidden_dims else self.input_dim
        return self.trunk_shapes() + [(last, self.num_bins)] * 3

    @property
    def num_params(self) -> int:
        return sum((i + 1) * o for i, o in self.layer_shapes())


def unpack(params: np.ndarray, cfg: NetworkConfig) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split the flat parameter vector into (W, b) views, W shaped (in, out)."""
    if params.shape != (cfg.num_params,):
        raise ValueError(f"expected {cfg.num_params} parameters, got {params.shape}")
    layers = []
    pos = 0
    for fan_in, fan_out in cfg.layer_shapes():
        w = params[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        b = params[pos:pos + fan_out]
        pos += fan_out
        layers.append((w, b))
    return layers


def init_params(cfg: NetworkConfig) -> np.ndarray:
    rng = np.random.default_rng(cfg.init_seed)
    params = np.zeros(cfg.num_params)
    for w, _ in unpack(params, cfg):
        limit = math.sqrt(6.0 / (w.shape[0] + w.shape[1]))
        w[...] = rng.uniform(-limit, limit, size=w.shape)
    return params


def _check_features(features, cfg: NetworkConfig) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != cfg.input_dim:
        raise ValueError(f"feature length {x.shape[-1]} != input_dim {cfg.input_dim}")
    return x


def forward(params, features, cfg: NetworkConfig, return_cache: bool = False):
    """Logits of the three heads for a feature vector or an ``(B, D)`` batch."""
    x = _check_features(features, cfg)
    layers = unpack(np.asarray(params, dtype=np.float64), cfg)
    n_trunk = len(cfg.hidden_dims)
    acts = [x]
    h = x
    for w, b in layers[:n_trunk]:
        h = np.maximum(h @ w + b, 0.0)
        acts.append(h)
    logits = tuple(h @ w + b for w, b in layers[n_trunk:])
    if return_cache:
        return logits, acts
    return logits


def backward(params, features, upstream, cfg: NetworkConfig, cache=None) -> np.ndarray:
    """Parameter gradient given dL/dlogits for each head.

    ``upstream`` is a triple shaped like the logits. Contributions from a
    batch are summed, so the caller decides the reduction.
    """
    params = np.asarray(params, dtype=np.float64)
    x = _check_features(features, cfg)
    if cache is None:
        _, cache = forward(params, x, cfg, return_cache=True)
    layers = unpack(params, cfg)
    grad = np.zeros_like(params)
    glayers = unpack(grad, cfg)
    n_trunk = len(cfg.hidden_dims)
    top = cache[-1]
    batched = top.ndim == 2
    a = top if batched else top[None, :]
    dh = np.zeros_like(a)
    for j in range(3):
        g = np.asarray(upstream[j], dtype=np.float64)
        g = g if batched else g[None, :]
        if g.shape != (a.shape[0], cfg.num_bins):
            raise ValueError(f"upstream gradient for {ANGLE_NAMES[j]} has shape {g.shape}")
        w, _ = layers[n_trunk + j]
        gw, gb = glayers[n_trunk + j]
        gw += a.T @ g
        gb += g.sum(axis=0)
        dh += g @ w.T
    for i in range(n_trunk - 1, -1, -1):
        out = cache[i + 1] if batched else cache[i + 1][None, :]
        inp = cache[i] if batched else cache[i][None, :]
        dz = dh * (out > 0)
        gw, gb = glayers[i]
        gw += inp.T @ dz
        gb += dz.sum(axis=0)
        if i:
            dh = dz @ layers[i][0].T
    return grad


@dataclass
class TrainState:
    params: np.ndarray
    adam_m: np.ndarray
    adam_v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        params = np.array(params, dtype=np.float64)
        return cls(params, np.zeros_like(params), np.zeros_like(params), 0, lr, beta1, beta2, eps)

    def __post_init__(self):
        if not (self.params.shape == self.adam_m.shape == self.adam_v.shape):
            raise ValueError("parameters and Adam moments differ in length")


def adam_step(state: TrainState, grad) -> TrainState:
    """One bias-corrected Adam update; returns a new state."""
    g = np.asarray(grad, dtype=np.float64)
    if g.shape != state.params.shape:
        raise ValueError(f"gradient shape {g.shape} != parameter shape {state.params.shape}")
    if not np.all(np.isfinite(g)):
        raise NumericError("non-finite gradient")
    t = state.step + 1
    m = state.beta1 * state.adam_m + (1.0 - state.beta1) * g
    v = state.beta2 * state.adam_v + (1.0 - state.beta2) * (g * g)
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    params = state.params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, params=params, adam_m=m, adam_v=v, step=t)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    shuffle_seed: int = 0
    sigmas: tuple[float, float, float] = (4.0, 4.0, 4.0)
    binning: BinningConfig = field(default_factory=BinningConfig)

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if len(self.sigmas) != 3:
            raise ValueError("need one sigma per angle")

    def encodings(self) -> tuple[EncodingConfig, ...]:
        return tuple(EncodingConfig(s, self.binning) for s in self.sigmas)


class TrainingError(RuntimeError):
    def __init__(self, msg, epoch=None, batch=None):
        self.epoch = epoch
        self.batch = batch
        super().__init__(msg)


def build_targets(poses, loss_cfg: LossConfig, train_cfg: TrainConfig):
    """Per-angle target distributions: Gaussian for GLD, one-hot for CE."""
    poses = np.asarray(poses, dtype=np.float64)
    out = []
    for j, enc in enumerate(train_cfg.encodings()):
        if loss_cfg.distribution_loss == "gld":
            out.append(encode_angles(poses[:, j], enc, name=ANGLE_NAMES[j]))
        else:
            bins = angle_to_bin(poses[:, j], enc.binning, name=ANGLE_NAMES[j])
            out.append(one_hot(bins, enc.binning.num_bins))
    return tuple(out)


def loss_and_grad(params, features, targets, poses, net_cfg, loss_cfg, binning):
    logits, cache = forward(params, features, net_cfg, return_cache=True)
    loss, glogits = total_loss(logits, targets, poses, loss_cfg, binning)
    return loss, backward(params, features, glogits, net_cfg, cache=cache)


def dataset_loss(params, features, poses, net_cfg, loss_cfg, train_cfg) -> float:
    """Total loss over a dataset evaluated in training-size batches."""
    targets = build_targets(poses, loss_cfg, train_cfg)
    n = len(features)
    total = 0.0
    for s in range(0, n, train_cfg.batch_size):
        sl = slice(s, s + train_cfg.batch_size)
        logits = forward(params, features[sl], net_cfg)
        loss, _ = total_loss(logits, tuple(t[sl] for t in targets), poses[sl], loss_cfg, train_cfg.binning)
        total += loss
    return total


def epoch_orders(n: int, train_cfg: TrainConfig):
    """Per-epoch sample orders, drawn from the shuffle seed only."""
    rng = np.random.default_rng(train_cfg.shuffle_seed)
    for _ in range(train_cfg.epochs):
        yield rng.permutation(n)


def train(dataset, net_cfg: NetworkConfig, loss_cfg: LossConfig, train_cfg: TrainConfig,
          validation=None, state: TrainState | None = None, callback=None):
    """Minibatch Adam training.

    Returns ``(state, log)`` where ``log`` holds one dict per epoch with the
    summed training loss and, given a validation set, per-angle MAE.
    """
    from .evaluation import evaluate  # circular at import time

    x = np.asarray(dataset.features, dtype=np.float64)
    poses = np.asarray(dataset.poses, dtype=np.float64)
    n = len(x)
    if n == 0:
        raise TrainingError("empty dataset")
    if x.shape[1] != net_cfg.input_dim:
        raise ValueError(f"dataset feature width {x.shape[1]} != input_dim {net_cfg.input_dim}")
    if net_cfg.num_bins != train_cfg.binning.num_bins:
        raise ValueError("network num_bins disagrees with binning config")
    if state is None:
        state = TrainState.fresh(init_params(net_cfg), train_cfg.lr, train_cfg.beta1,
                                 train_cfg.beta2, train_cfg.eps)
    targets = build_targets(poses, loss_cfg, train_cfg)
    history = []
    for epoch, order in enumerate(epoch_orders(n, train_cfg)):
        if callback is not None:
            callback(epoch, order, state)
        running = 0.0
        for b, s in enumerate(range(0, n, train_cfg.batch_size)):
            idx = order[s:s + train_cfg.batch_size]
            try:
                loss, grad = loss_and_grad(state.params, x[idx], tuple(t[idx] for t in targets),
                                           poses[idx], net_cfg, loss_cfg, train_cfg.binning)
                state = adam_step(state, grad)
            except NumericError as exc:
                raise TrainingError(f"epoch {epoch} batch {b}: {exc}", epoch, b) from exc
            running += loss
        row = {"epoch": epoch, "train_loss": running}
        if validation is not None:
            rep = evaluate(state.params, net_cfg, validation, train_cfg.binning, loss_cfg.decode_mode)
            row.update(val_mae_yaw=rep.mae_yaw, val_mae_pitch=rep.mae_pitch, val_mae_roll=rep.mae_roll)
        log.debug("epoch %d loss %.6g", epoch, running)
        history.append(row)
    return state, history

"""Binary "LDLP" checkpoint: network config, parameters and Adam state.

Layout, all little-endian::

    b"LDLP" | version u32
    input_dim u32 | n_hidden u32 | hidden_dims u32 * n_hidden | num_bins u32
    activation u32 (0 = relu) | init_seed u64
    n_params u64 | params f64 * n_params
    step u64 | lr f64 | beta1 f64 | beta2 f64 | eps f64
    adam_m f64 * n_params | adam_v f64 * n_params
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .net import NetworkConfig, TrainState

MAGIC = b"LDLP"
VERSION = 1
_ACTIVATIONS = {"relu": 0}


class CheckpointError(ValueError):
    pass


def to_bytes(cfg: NetworkConfig, state: TrainState) -> bytes:
    n = cfg.num_params
    if state.params.shape != (n,):
        raise CheckpointError(f"state has {state.params.size} parameters, config implies {n}")
    parts = [
        struct.pack("<4sI", MAGIC, VERSION),
        struct.pack("<II", cfg.input_dim, len(cfg.hidden_dims)),
        struct.pack(f"<{len(cfg.hidden_dims)}I", *cfg.hidden_dims),
        struct.pack("<IIQ", cfg.num_bins, _ACTIVATIONS[cfg.activation], cfg.init_seed),
        struct.pack("<Q", n),
        np.asarray(state.params, dtype="<f8").tobytes(),
        struct.pack("<Qdddd", state.step, state.lr, state.beta1, state.beta2, state.eps),
        np.asarray(state.adam_m, dtype="<f8").tobytes(),
        np.asarray(state.adam_v, dtype="<f8").tobytes(),
    ]
    return b"".join(parts)


def from_bytes(raw: bytes) -> tuple[NetworkConfig, TrainState]:
    try:
        magic, version = struct.unpack_from("<4sI", raw, 0)
        if magic != MAGIC:
            raise CheckpointError(f"bad magic {magic!r}")
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        pos = 8
        input_dim, n_hidden = struct.unpack_from("<II", raw, pos)
        pos += 8
        hidden = struct.unpack_from(f"<{n_hidden}I", raw, pos)
        pos += 4 * n_hidden
        num_bins, act, seed = struct.unpack_from("<IIQ", raw, pos)
        pos += 16
        (n,) = struct.unpack_from("<Q", raw, pos)
        pos += 8
        params = np.frombuffer(raw, "<f8", n, pos).astype(np.float64)
        pos += 8 * n
        step, lr, b1, b2, eps = struct.unpack_from("<Qdddd", raw, pos)
        pos += 40
        m = np.frombuffer(raw, "<f8", n, pos).astype(np.float64)
        pos += 8 * n
        v = np.frombuffer(raw, "<f8", n, pos).astype(np.float64)
        pos += 8 * n
    except (struct.error, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"truncated or corrupt checkpoint: {exc}") from None
    if pos != len(raw):
        raise CheckpointError(f"{len(raw) - pos} trailing bytes")
    names = {v: k for k, v in _ACTIVATIONS.items()}
    if act not in names:
        raise CheckpointError(f"unknown activation code {act}")
    cfg = NetworkConfig(input_dim, tuple(hidden), num_bins, names[act], seed)
    if cfg.num_params != n:
        raise CheckpointError(f"parameter count {n} disagrees with network config ({cfg.num_params})")
    return cfg, TrainState(params, m, v, step, lr, b1, b2, eps)


def save(path, cfg: NetworkConfig, state: TrainState) -> None:
    Path(path).write_bytes(to_bytes(cfg, state))


def load(path) -> tuple[NetworkConfig, TrainState]:
    return from_bytes(Path(path).read_bytes())

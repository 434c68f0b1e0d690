"""Run configuration: one INI document with a section per module.

Flags override file values via ``section.key=value`` strings. The merged
result is validated for cross-module consistency before any command runs.
"""
from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass

from . import __version__
from .binning import BinningConfig
from .datasets import SynthConfig
from .losses import LossConfig
from .net import NetworkConfig, TrainConfig

DEFAULTS = {
    "binning": {"num_bins": "66", "range_min_deg": "-99", "range_max_deg": "99", "center_offset": "0.5"},
    "encoding": {"sigma_yaw": "4", "sigma_pitch": "4", "sigma_roll": "4"},
    "loss": {"alpha": "0.01", "use_euclidean": "true", "use_kl": "true", "squared_euclidean": "false",
             "distribution_loss": "gld", "decode_mode": "expectation"},
    "network": {"input_dim": "32", "hidden_dims": "128", "num_bins": "66", "activation": "relu",
                "init_seed": "0"},
    "synth": {"n_samples": "10000", "n_test": "2000", "input_dim": "32", "pose_scale_deg": "25,20,12",
              "noise_std": "0.02", "embed_seed": "0", "sample_seed": "1"},
    "train": {"epochs": "10", "batch_size": "32", "lr": "0.001", "beta1": "0.9", "beta2": "0.999",
              "eps": "1e-8", "shuffle_seed": "0"},
    "compare": {"seeds": "0,1,2"},
}


class ConfigError(ValueError):
    pass


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.split(",") if v.strip())


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(v) for v in s.split(",") if v.strip())


@dataclass(frozen=True)
class RunConfig:
    binning: BinningConfig
    loss: LossConfig
    network: NetworkConfig
    synth: SynthConfig
    train: TrainConfig
    n_test: int
    seeds: tuple[int, ...]
    text: str

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()[:16]

    @property
    def header(self) -> str:
        return f"gldpose {__version__} config={self.digest}"


def read_document(path=None, overrides=()) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_dict(DEFAULTS)
    if path is not None:
        with open(path) as fh:
            cp.read_file(fh, source=str(path))
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not (sep and dot and name):
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        if section not in DEFAULTS or name not in DEFAULTS[section]:
            raise ConfigError(f"unknown config key {key.strip()!r}")
        cp.set(section, name, value.strip())
    for section in cp.sections():
        for name in cp[section]:
            if section not in DEFAULTS or name not in DEFAULTS[section]:
                raise ConfigError(f"unknown config key {section}.{name}")
    return cp


def canonical_text(cp: configparser.ConfigParser) -> str:
    buf = io.StringIO()
    for section in DEFAULTS:
        buf.write(f"[{section}]\n")
        for name in DEFAULTS[section]:
            buf.write(f"{name} = {cp.get(section, name)}\n")
        buf.write("\n")
    return buf.getvalue()


def build(cp: configparser.ConfigParser) -> RunConfig:
    """Typed configs from a merged document; raises ConfigError on any inconsistency."""
    try:
        b = cp["binning"]
        binning = BinningConfig(b.getint("num_bins"), b.getfloat("range_min_deg"),
                                b.getfloat("range_max_deg"), b.getfloat("center_offset"))
        e = cp["encoding"]
        sigmas = (e.getfloat("sigma_yaw"), e.getfloat("sigma_pitch"), e.getfloat("sigma_roll"))
        if any(not s > 0 for s in sigmas):
            raise ConfigError("every sigma must be positive")
        lo = cp["loss"]
        loss = LossConfig(lo.getfloat("alpha"), lo.getboolean("use_euclidean"), lo.getboolean("use_kl"),
                          lo.getboolean("squared_euclidean"), lo.get("distribution_loss"),
                          lo.get("decode_mode"))
        n = cp["network"]
        network = NetworkConfig(n.getint("input_dim"), _ints(n.get("hidden_dims")), n.getint("num_bins"),
                                n.get("activation"), n.getint("init_seed"))
        s = cp["synth"]
        synth = SynthConfig(s.getint("n_samples"), s.getint("input_dim"), _floats(s.get("pose_scale_deg")),
                            s.getfloat("noise_std"), s.getint("embed_seed"), s.getint("sample_seed"), binning)
        t = cp["train"]
        train = TrainConfig(t.getint("epochs"), t.getint("batch_size"), t.getfloat("lr"), t.getfloat("beta1"),
                            t.getfloat("beta2"), t.getfloat("eps"), t.getint("shuffle_seed"), sigmas, binning)
        n_test = s.getint("n_test")
        seeds = _ints(cp["compare"].get("seeds"))
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    if network.num_bins != binning.num_bins:
        raise ConfigError(f"network.num_bins={network.num_bins} but binning.num_bins={binning.num_bins}")
    if synth.input_dim != network.input_dim:
        raise ConfigError(f"synth.input_dim={synth.input_dim} but network.input_dim={network.input_dim}")
    if n_test < 1:
        raise ConfigError("synth.n_test must be positive")
    if not seeds:
        raise ConfigError("compare.seeds is empty")
    return RunConfig(binning, loss, network, synth, train, n_test, seeds, canonical_text(cp))


def load(path=None, overrides=()) -> RunConfig:
    return build(read_document(path, overrides))

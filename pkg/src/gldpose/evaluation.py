"""MAE metrics and the paired GLD vs one-hot cross-entropy experiment."""
from __future__ import annotations

import hashlib
import statistics
from dataclasses import dataclass, field, replace

import numpy as np

from .binning import ANGLE_NAMES, BinningConfig, decode
from .datasets import Dataset, SynthConfig, synth_generate
from .losses import LossConfig, softmax
from .net import NetworkConfig, TrainConfig, TrainingError, forward, init_params, train

STRATA = ((0.0, 10.0), (10.0, 30.0), (30.0, 60.0), (60.0, 99.0))
RARE_YAW_DEG = 60.0


def stratum_label(lo, hi) -> str:
    close = "]" if hi == STRATA[-1][1] else ")"
    return f"[{lo:g},{hi:g}{close}"


def stratum_index(angles) -> np.ndarray:
    """Band of each |angle|; the last band is closed and absorbs anything above."""
    a = np.abs(np.asarray(angles, dtype=np.float64))
    edges = np.array([hi for _, hi in STRATA[:-1]])
    return np.searchsorted(edges, a, side="right")


@dataclass
class EvalReport:
    mae_yaw: float
    mae_pitch: float
    mae_roll: float
    n_eval: int
    # angle -> list of (band label, count, mae or nan when empty)
    stratified: dict = field(default_factory=dict)

    def __eq__(self, other):
        # empty strata carry nan, which must compare equal here
        if not isinstance(other, EvalReport):
            return NotImplemented
        a, b = list(self.rows()), list(other.rows())
        return len(a) == len(b) and all(
            x[:3] == y[:3] and (x[3] == y[3] or (x[3] != x[3] and y[3] != y[3])) for x, y in zip(a, b)
        )

    @property
    def mae_mean(self) -> float:
        return (self.mae_yaw + self.mae_pitch + self.mae_roll) / 3.0

    def mae(self, angle: str) -> float:
        return getattr(self, f"mae_{angle}")

    def stratum_mae(self, angle: str, band: int) -> float:
        return self.stratified[angle][band][2]

    @property
    def rare_yaw_mae(self) -> float:
        return self.stratum_mae("yaw", len(STRATA) - 1)

    def rows(self):
        for a in ANGLE_NAMES:
            yield a, "all", self.n_eval, self.mae(a)
        yield "mean", "all", self.n_eval, self.mae_mean
        for a in ANGLE_NAMES:
            for label, count, m in self.stratified[a]:
                yield a, label, count, m

    def table(self) -> str:
        lines = [f"{'angle':<6} {'stratum':<9} {'n':>6} {'MAE':>10}"]
        for a, band, n, m in self.rows():
            lines.append(f"{a:<6} {band:<9} {n:>6d} {m:>10.4f}")
        return "\n".join(lines)


def report_from_predictions(pred, truth) -> EvalReport:
    """Build an EvalReport from ``(n, 3)`` predicted and true angles."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape or pred.ndim != 2 or pred.shape[1] != 3:
        raise ValueError("predictions and truth must both be (n, 3)")
    if len(truth) == 0:
        raise ValueError("cannot evaluate on an empty set")
    err = np.abs(pred - truth)
    maes = []
    strat = {}
    for j, a in enumerate(ANGLE_NAMES):
        # sorting makes the mean independent of sample order, bit for bit
        maes.append(float(np.mean(np.sort(err[:, j]))))
        band = stratum_index(truth[:, j])
        rows = []
        for k, (lo, hi) in enumerate(STRATA):
            e = np.sort(err[band == k, j])
            rows.append((stratum_label(lo, hi), int(e.size), float(np.mean(e)) if e.size else float("nan")))
        strat[a] = rows
    return EvalReport(maes[0], maes[1], maes[2], len(truth), strat)


def predict(params, net_cfg: NetworkConfig, features, binning: BinningConfig,
            decode_mode: str = "expectation", batch_size: int = 4096) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    out = np.empty((len(x), 3))
    for s in range(0, len(x), batch_size):
        logits = forward(params, x[s:s + batch_size], net_cfg)
        for j in range(3):
            out[s:s + batch_size, j] = decode(softmax(logits[j]), binning, decode_mode)
    return out


def evaluate(params, net_cfg: NetworkConfig, ds: Dataset, binning: BinningConfig,
             decode_mode: str = "expectation") -> EvalReport:
    """MAE of the decoded network predictions on ``ds``.

    ``params`` may be a flat parameter vector or a TrainState.
    """
    params = getattr(params, "params", params)
    if ds.input_dim != net_cfg.input_dim:
        raise ValueError(f"dataset feature width {ds.input_dim} != network input_dim {net_cfg.input_dim}")
    return report_from_predictions(predict(params, net_cfg, ds.features, binning, decode_mode), ds.poses)


def digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


@dataclass
class ArmRun:
    arm: str
    seed: int
    report: EvalReport
    init_hash: str
    order_hash: str
    history: list


@dataclass
class ComparisonReport:
    runs: list[ArmRun]

    def arms(self) -> list[str]:
        return sorted({r.arm for r in self.runs}, key=["gld", "ce"].index)

    def by(self, arm):
        return sorted((r for r in self.runs if r.arm == arm), key=lambda r: r.seed)

    def median(self, arm: str, metric: str) -> float:
        return statistics.median(_metric(r.report, metric) for r in self.by(arm))

    def rows(self):
        """(arm, seed, metric, value) rows, per-seed first, then medians."""
        for arm in self.arms():
            for r in self.by(arm):
                for m in METRICS:
                    yield arm, str(r.seed), m, _metric(r.report, m)
        for arm in self.arms():
            for m in METRICS:
                yield arm, "median", m, self.median(arm, m)

    @property
    def gld_wins_rare_yaw(self) -> bool:
        return self.median("gld", "rare_yaw_mae") < self.median("ce", "rare_yaw_mae")

    @property
    def overall_ratio(self) -> float:
        return self.median("gld", "mae_mean") / self.median("ce", "mae_mean")

    def table(self) -> str:
        seeds = [r.seed for r in self.by(self.arms()[0])]
        head = f"{'metric':<14}" + "".join(f"{a + '/' + str(s):>12}" for a in self.arms() for s in seeds)
        head += "".join(f"{a + '/median':>12}" for a in self.arms())
        lines = [head]
        for m in METRICS:
            vals = [_metric(r.report, m) for a in self.arms() for r in self.by(a)]
            vals += [self.median(a, m) for a in self.arms()]
            lines.append(f"{m:<14}" + "".join(f"{v:>12.4f}" for v in vals))
        verdict = "yes" if self.gld_wins_rare_yaw else "no"
        lines.append(f"GLD lower median rare-yaw MAE: {verdict}; "
                     f"overall MAE ratio GLD/CE = {self.overall_ratio:.4f}")
        return "\n".join(lines)


METRICS = ("mae_yaw", "mae_pitch", "mae_roll", "mae_mean", "rare_yaw_mae")


def _metric(rep: EvalReport, name: str) -> float:
    return getattr(rep, name)


def paired_run(train_ds, test_ds, net_cfg, loss_cfg, train_cfg, seed: int, arm: str) -> ArmRun:
    net = replace(net_cfg, init_seed=seed)
    tc = replace(train_cfg, shuffle_seed=seed)
    lc = replace(loss_cfg, distribution_loss=arm)
    seen = {}

    def grab(epoch, order, state):
        if epoch == 0:
            seen["order"] = digest(order)

    init = init_params(net)
    try:
        state, hist = train(train_ds, net, lc, tc, callback=grab)
    except TrainingError as exc:
        raise TrainingError(f"arm {arm} seed {seed}: {exc}", exc.epoch, exc.batch) from exc
    rep = evaluate(state.params, net, test_ds, tc.binning, lc.decode_mode)
    return ArmRun(arm, seed, rep, digest(init), seen.get("order", ""), hist)


def compare_losses(synth_cfg: SynthConfig, net_cfg: NetworkConfig, loss_cfg: LossConfig,
                   train_cfg: TrainConfig, seeds=(0, 1, 2), n_test: int = 2000,
                   datasets: tuple[Dataset, Dataset] | None = None, progress=None) -> ComparisonReport:
    """Train a GLD arm and a one-hot CE arm per seed on identical data and budgets.

    Both arms of a seed share the initial parameters and the batch order; only
    the distribution loss differs. The test set is drawn from the same
    generator with the next sample seed.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    if datasets is None:
        train_ds = synth_generate(synth_cfg)
        test_ds = synth_generate(replace(synth_cfg, n_samples=n_test, sample_seed=synth_cfg.sample_seed + 1))
    else:
        train_ds, test_ds = datasets
    runs = []
    for seed in seeds:
        for arm in ("gld", "ce"):
            run = paired_run(train_ds, test_ds, net_cfg, loss_cfg, train_cfg, seed, arm)
            if progress is not None:
                progress(run)
            runs.append(run)
    return ComparisonReport(runs)

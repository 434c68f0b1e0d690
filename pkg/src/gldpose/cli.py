"""Command-line entry point.

Exit codes: 0 success, 1 runtime or numeric failure, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, checkpoint, datasets, gradcheck
from .binning import ANGLE_NAMES, BinningConfig, OutOfRangeError, angle_to_bin
from .config import ConfigError, load as load_config
from .encoding import EncodingConfig, encode_gaussian
from .evaluation import compare_losses, evaluate
from .losses import NumericError
from .net import TrainingError, train

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _csv_text(header_line: str, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# {header_line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _parse_range(text: str) -> tuple[float, float]:
    parts = [float(v) for v in text.split(",")]
    if len(parts) == 1:
        return -abs(parts[0]), abs(parts[0])
    if len(parts) == 2:
        return parts[0], parts[1]
    raise UsageError(f"--range expects HALF or MIN,MAX, got {text!r}")


def cmd_encode(args) -> int:
    lo, hi = _parse_range(args.range)
    try:
        enc = EncodingConfig(args.sigma, BinningConfig(args.bins, lo, hi))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    given = [(n, getattr(args, f"gt_{n}")) for n in ANGLE_NAMES if getattr(args, f"gt_{n}") is not None]
    if not given:
        raise UsageError("give at least one of --gt-yaw, --gt-pitch, --gt-roll")
    centers = enc.binning.centers()
    key = f"sigma={args.sigma!r} bins={args.bins} range={lo!r},{hi!r}"
    header = f"gldpose {__version__} config={hashlib.sha256(key.encode()).hexdigest()[:16]}"
    outputs = []
    for name, angle in given:
        try:
            dist = encode_gaussian(angle_to_bin(angle, enc.binning, name=name), enc)
        except OutOfRangeError as exc:
            raise UsageError(str(exc)) from None
        text = _csv_text(f"{header} {name}={angle!r}", ["bin_center_deg", "probability"],
                         zip(map(float, centers), map(float, dist)))
        outputs.append((name, text))
    if args.out is None:
        for _, text in outputs:
            sys.stdout.write(text)
    elif len(outputs) == 1:
        _write(Path(args.out), outputs[0][1])
    else:
        out = Path(args.out)
        for name, text in outputs:
            _write(out.with_name(f"{out.stem}_{name}{out.suffix or '.csv'}"), text)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    worst = gradcheck.run_all(args.trials, args.bins, args.seed, perturb=args.perturb)
    failed = []
    for name in gradcheck.CHECKS:
        ok = worst[name] < gradcheck.TOLERANCE
        print(f"{name:<12} max_rel_err={worst[name]:.3e} {'ok' if ok else 'FAIL'}")
        if not ok:
            failed.append(name)
    if failed:
        print(f"gradient check failed for: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _echo_config(run, out_dir: Path) -> None:
    _write(out_dir / "config.ini", f"# {run.header}\n" + run.text)


def cmd_synth(args, run) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_ds = datasets.synth_generate(run.synth)
    test_ds = datasets.synth_generate(replace(run.synth, n_samples=run.n_test,
                                              sample_seed=run.synth.sample_seed + 1))
    datasets.save(train_ds, out / "train", run.header)
    datasets.save(test_ds, out / "test", run.header)
    _echo_config(run, out)
    print(f"wrote {len(train_ds)} train and {len(test_ds)} test samples to {out}")
    return EXIT_OK


def _load_data(stem, run) -> datasets.Dataset:
    stem = Path(stem)
    try:
        ds = datasets.load_annotations(stem.with_suffix(".csv"), stem.with_suffix(".ldlf"), run.binning)
    except (FileNotFoundError, datasets.DataFormatError) as exc:
        raise UsageError(str(exc)) from None
    if ds.dropped:
        print(f"{stem}: dropped {ds.dropped} out-of-range samples", file=sys.stderr)
    if ds.input_dim != run.network.input_dim:
        raise UsageError(f"{stem}: feature width {ds.input_dim} != network.input_dim {run.network.input_dim}")
    if len(ds) == 0:
        raise UsageError(f"{stem}: no usable samples")
    return ds


def cmd_train(args, run) -> int:
    out = Path(args.out_dir)
    ds = _load_data(args.data, run)
    state, history = train(ds, run.network, run.loss, run.train)
    out.mkdir(parents=True, exist_ok=True)
    checkpoint.save(out / "checkpoint.ldlp", run.network, state)
    _write(out / "metrics.csv", _csv_text(run.header, ["epoch", "train_loss"],
                                          ((h["epoch"], float(h["train_loss"])) for h in history)))
    _echo_config(run, out)
    last = history[-1]["train_loss"] if history else float("nan")
    print(f"trained {len(history)} epochs, final epoch loss {last:.6g}; checkpoint in {out}")
    return EXIT_OK


def cmd_eval(args, run) -> int:
    try:
        net, state = checkpoint.load(args.checkpoint)
    except (OSError, checkpoint.CheckpointError) as exc:
        raise UsageError(f"{args.checkpoint}: {exc}") from None
    if net.num_bins != run.binning.num_bins:
        raise UsageError(f"checkpoint has {net.num_bins} bins, config has {run.binning.num_bins}")
    run = replace(run, network=net)
    ds = _load_data(args.data, run)
    rep = evaluate(state.params, net, ds, run.binning, run.loss.decode_mode)
    out = Path(args.out_dir)
    _write(out / "eval.csv", _csv_text(run.header, ["angle", "stratum", "count", "mae_deg"], rep.rows()))
    _echo_config(run, out)
    print(rep.table())
    return EXIT_OK


def cmd_compare(args, run) -> int:
    def progress(r):
        print(f"  {r.arm} seed {r.seed}: MAE {r.report.mae_mean:.4f}, rare-yaw MAE {r.report.rare_yaw_mae:.4f}",
              file=sys.stderr)

    rep = compare_losses(run.synth, run.network, run.loss, run.train, run.seeds, run.n_test, progress=progress)
    out = Path(args.out_dir)
    _write(out / "comparison.csv", _csv_text(run.header, ["arm", "seed", "metric", "value"], rep.rows()))
    _echo_config(run, out)
    print(rep.table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gldpose", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"gldpose {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("encode", help="write a Gaussian label distribution as CSV")
    for n in ANGLE_NAMES:
        e.add_argument(f"--gt-{n}", type=float, help=f"ground-truth {n} in degrees")
    e.add_argument("--sigma", type=float, default=4.0, help="std-dev in bins (default 4)")
    e.add_argument("--bins", type=int, default=66)
    e.add_argument("--range", default="99", help="HALF for [-HALF, HALF] or MIN,MAX (default 99)")
    e.add_argument("--out", help="output CSV (default stdout)")

    g = sub.add_parser("gradcheck", help="finite-difference check of all analytic gradients")
    g.add_argument("--trials", type=int, default=100)
    g.add_argument("--bins", type=int, default=66)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--perturb", choices=gradcheck.CHECKS, help=argparse.SUPPRESS)

    def with_config(sp):
        sp.add_argument("--config", help="INI config file")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a config value (repeatable)")
        sp.add_argument("--alpha", type=float, help="shorthand for --set loss.alpha=...")
        sp.add_argument("--out-dir", default=".", help="output directory (default .)")
        return sp

    with_config(sub.add_parser("synth", help="generate synthetic train/test sets"))
    t = with_config(sub.add_parser("train", help="train a network, write checkpoint.ldlp"))
    t.add_argument("--data", required=True, help="dataset stem (STEM.csv + STEM.ldlf)")
    v = with_config(sub.add_parser("eval", help="evaluate a checkpoint"))
    v.add_argument("--checkpoint", required=True)
    v.add_argument("--data", required=True, help="dataset stem (STEM.csv + STEM.ldlf)")
    with_config(sub.add_parser("compare", help="paired GLD vs one-hot cross-entropy experiment"))
    return p


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "eval": cmd_eval, "compare": cmd_compare}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "encode":
            return cmd_encode(args)
        if args.command == "gradcheck":
            return cmd_gradcheck(args)
        overrides = list(args.set)
        if args.alpha is not None:
            overrides.append(f"loss.alpha={args.alpha!r}")
        try:
            run = load_config(args.config, overrides)
        except (ConfigError, configparser.Error, OSError) as exc:
            raise UsageError(f"config: {exc}") from None
        return COMMANDS[args.command](args, run)
    except UsageError as exc:
        print(f"gldpose {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingError, NumericError) as exc:
        print(f"gldpose {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

"""Synthetic imbalanced pose data and the CSV + LDLF file formats.

Feature matrix file ("LDLF"), all little-endian::

    b"LDLF" | version u32 | rows u64 | cols u64 | rows*cols float64, row-major

Annotation CSV: optional ``#`` comment lines, then the header
``id,yaw_deg,pitch_deg,roll_deg`` and one row per sample. Row i of the CSV
pairs with row i of the matrix.
"""
from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .binning import BinningConfig, PoseTriple

LDLF_MAGIC = b"LDLF"
LDLF_VERSION = 1
_LDLF_HEAD = struct.Struct("<4sIQQ")
CSV_HEADER = ["id", "yaw_deg", "pitch_deg", "roll_deg"]


class DataFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    pose: PoseTriple


@dataclass
class Dataset:
    """Features ``(n, d)``, poses ``(n, 3)`` in degrees and string ids."""

    features: np.ndarray
    poses: np.ndarray
    ids: list[str]
    provenance: str = "synthetic"
    seed: int | None = None
    dropped: int = 0

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.poses = np.asarray(self.poses, dtype=np.float64)
        if self.features.ndim != 2 or self.poses.shape != (len(self.features), 3):
            raise ValueError("features must be (n, d) and poses (n, 3)")
        if len(self.ids) != len(self.features):
            raise ValueError("one id per sample required")

    def __len__(self):
        return len(self.features)

    @property
    def n(self) -> int:
        return len(self)

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def sample(self, i: int) -> Sample:
        return Sample(self.features[i], PoseTriple(*map(float, self.poses[i])))

    @property
    def samples(self) -> list[Sample]:
        return [self.sample(i) for i in range(len(self))]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.poses[idx], [self.ids[i] for i in idx],
                       self.provenance, self.seed)


@dataclass(frozen=True)
class SynthConfig:
    n_samples: int = 10_000
    input_dim: int = 32
    pose_scale_deg: tuple[float, float, float] = (25.0, 20.0, 12.0)
    noise_std: float = 0.02
    embed_seed: int = 0
    sample_seed: int = 1
    binning: BinningConfig = field(default_factory=BinningConfig)

    def __post_init__(self):
        if self.n_samples < 1 or self.input_dim < 1:
            raise ValueError("n_samples and input_dim must be positive")
        if len(self.pose_scale_deg) != 3 or any(not s > 0 for s in self.pose_scale_deg):
            raise ValueError("pose_scale_deg must be three positive std-devs")
        if not self.noise_std >= 0:
            raise ValueError("noise_std must be non-negative")


def trig_lift(poses) -> np.ndarray:
    """sin/cos of each angle plus all pairwise products of those six values."""
    r = np.deg2rad(np.asarray(poses, dtype=np.float64))
    base = np.concatenate([np.sin(r), np.cos(r)], axis=-1)
    i, j = np.triu_indices(base.shape[-1], k=1)
    return np.concatenate([base, base[..., i] * base[..., j]], axis=-1)


LIFT_DIM = 6 + 15


def embedding_matrix(input_dim: int, embed_seed: int) -> np.ndarray:
    rng = np.random.default_rng(embed_seed)
    return rng.standard_normal((LIFT_DIM, input_dim)) / math.sqrt(LIFT_DIM)


def embed(poses, input_dim: int, embed_seed: int) -> np.ndarray:
    return trig_lift(poses) @ embedding_matrix(input_dim, embed_seed)


def sample_poses(n: int, scales, binning: BinningConfig, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean Gaussian angles, rejection-sampled into the binning range."""
    out = np.empty((n, 3))
    for j, s in enumerate(scales):
        got = np.empty(0)
        while got.size < n:
            draw = rng.normal(0.0, s, size=n)
            got = np.concatenate([got, draw[binning.in_range(draw)]])
        out[:, j] = got[:n]
    return out


def synth_generate(cfg: SynthConfig) -> Dataset:
    rng = np.random.default_rng(cfg.sample_seed)
    poses = sample_poses(cfg.n_samples, cfg.pose_scale_deg, cfg.binning, rng)
    feats = embed(poses, cfg.input_dim, cfg.embed_seed)
    if cfg.noise_std > 0:
        feats = feats + rng.normal(0.0, cfg.noise_std, size=feats.shape)
    ids = [f"s{i:06d}" for i in range(cfg.n_samples)]
    return Dataset(feats, poses, ids, "synthetic", cfg.sample_seed)


def write_matrix(path, matrix) -> None:
    m = np.ascontiguousarray(matrix, dtype="<f8")
    if m.ndim != 2:
        raise ValueError("feature matrix must be 2-D")
    with open(path, "wb") as fh:
        fh.write(_LDLF_HEAD.pack(LDLF_MAGIC, LDLF_VERSION, m.shape[0], m.shape[1]))
        fh.write(m.tobytes())


def read_matrix(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _LDLF_HEAD.size:
        raise DataFormatError(f"{path}: truncated header")
    magic, version, rows, cols = _LDLF_HEAD.unpack_from(raw)
    if magic != LDLF_MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}")
    if version != LDLF_VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    expected = _LDLF_HEAD.size + 8 * rows * cols
    if len(raw) != expected:
        raise DataFormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    m = np.frombuffer(raw, dtype="<f8", offset=_LDLF_HEAD.size).reshape(rows, cols)
    bad = np.argwhere(~np.isfinite(m))
    if len(bad):
        r, c = bad[0]
        off = _LDLF_HEAD.size + 8 * (r * cols + c)
        raise DataFormatError(f"{path}: non-finite value at row {r}, col {c} (byte offset {off})")
    return m.astype(np.float64)


def write_annotations(path, ds: Dataset, header_comment: str | None = None) -> None:
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for sid, pose in zip(ds.ids, ds.poses):
        w.writerow([sid] + [repr(float(a)) for a in pose])
    Path(path).write_text(buf.getvalue())


def save(ds: Dataset, stem, header_comment: str | None = None) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and ``<stem>.ldlf``."""
    stem = Path(stem)
    csv_path, mat_path = stem.with_suffix(".csv"), stem.with_suffix(".ldlf")
    write_annotations(csv_path, ds, header_comment)
    write_matrix(mat_path, ds.features)
    return csv_path, mat_path


def load_annotations(csv_path, matrix_path=None, binning: BinningConfig | None = None,
                     policy: str = "discard") -> Dataset:
    """Read an annotation CSV and its LDLF feature matrix.

    ``policy`` handles poses outside the binning range: ``"discard"`` drops
    the sample (count kept in ``Dataset.dropped``), ``"clamp"`` clips it.
    """
    if policy not in ("discard", "clamp"):
        raise ValueError(f"unknown out-of-range policy {policy!r}")
    binning = binning or BinningConfig()
    csv_path = Path(csv_path)
    matrix_path = Path(matrix_path) if matrix_path else csv_path.with_suffix(".ldlf")
    if not csv_path.exists():
        raise FileNotFoundError(csv_path)
    if not matrix_path.exists():
        raise FileNotFoundError(matrix_path)
    ids, poses = [], []
    with open(csv_path, newline="") as fh:
        lines = [(n, ln) for n, ln in enumerate(fh, start=1) if not ln.startswith("#")]
    reader = csv.reader(ln for _, ln in lines)
    header = next(reader, None)
    if header != CSV_HEADER:
        raise DataFormatError(f"{csv_path}: header {header!r}, expected {CSV_HEADER!r}")
    for (lineno, _), row in zip(lines[1:], reader):
        if len(row) != 4:
            raise DataFormatError(f"{csv_path}:{lineno}: expected 4 fields, got {len(row)}")
        try:
            vals = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise DataFormatError(f"{csv_path}:{lineno}: {exc}") from None
        if not all(math.isfinite(v) for v in vals):
            raise DataFormatError(f"{csv_path}:{lineno}: non-finite angle")
        ids.append(row[0])
        poses.append(vals)
    feats = read_matrix(matrix_path)
    if len(feats) != len(ids):
        raise DataFormatError(
            f"row-count mismatch: {csv_path} has {len(ids)} rows, {matrix_path} has {len(feats)}"
        )
    poses = np.array(poses, dtype=np.float64).reshape(-1, 3)
    inside = np.all(binning.in_range(poses), axis=1)
    dropped = 0
    if policy == "discard":
        dropped = int(np.count_nonzero(~inside))
        keep = np.flatnonzero(inside)
        feats, poses, ids = feats[keep], poses[keep], [ids[i] for i in keep]
    else:
        poses = np.clip(poses, binning.range_min_deg, binning.range_max_deg)
    return Dataset(feats, poses, ids, "ingested", None, dropped)


def split(ds: Dataset, fractions=(0.8, 0.1, 0.1), seed: int = 0):
    """Seeded shuffle, then contiguous train/validation/test partition."""
    fr = np.asarray(fractions, dtype=np.float64)
    if fr.shape != (3,) or np.any(fr <= 0) or abs(fr.sum() - 1.0) > 1e-9:
        raise ValueError(f"fractions must be three positive numbers summing to 1, got {fractions!r}")
    n = len(ds)
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(fr[0] * n))
    n_val = int(round(fr[1] * n))
    cuts = [0, n_train, n_train + n_val, n]
    parts = [order[a:b] for a, b in zip(cuts[:-1], cuts[1:])]
    for name, p in zip(("train", "validation", "test"), parts):
        if len(p) == 0:
            raise ValueError(f"{name} split would be empty for n={n}")
    return tuple(ds.subset(p) for p in parts)


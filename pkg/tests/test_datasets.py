import math

import numpy as np
import pytest

from gldpose.binning import BinningConfig
from gldpose.datasets import (
    DataFormatError,
    Dataset,
    SynthConfig,
    embed,
    load_annotations,
    read_matrix,
    save,
    split,
    synth_generate,
    write_annotations,
    write_matrix,
)


@pytest.fixture(scope="module")
def big():
    return synth_generate(SynthConfig(n_samples=10_000))


def test_rare_yaw_fraction(big):
    frac = np.mean(np.abs(big.poses[:, 0]) > 60)
    # Gaussian tail 2*Phi(-60/25)
    assert math.erfc(60 / 25 / math.sqrt(2)) == pytest.approx(0.0164, abs=1e-4)
    assert 0.01 <= frac <= 0.04


def test_marginals(big):
    for j, s in enumerate((25.0, 20.0, 12.0)):
        col = big.poses[:, j]
        assert abs(np.std(col) - s) / s < 0.05
        assert abs(np.mean(col)) < 4 * s / math.sqrt(len(col))
        assert np.all(np.abs(col) <= 99)


def test_deterministic():
    a = synth_generate(SynthConfig(n_samples=50, sample_seed=3))
    b = synth_generate(SynthConfig(n_samples=50, sample_seed=3))
    assert a.features.tobytes() == b.features.tobytes()
    assert a.poses.tobytes() == b.poses.tobytes()


def test_noise_free_identical_poses_identical_features():
    poses = np.array([[10.0, -5.0, 3.0], [10.0, -5.0, 3.0]])
    f = embed(poses, 32, 0)
    assert f[0].tobytes() == f[1].tobytes()


def test_embedding_injective_on_grid():
    b = BinningConfig()
    c = b.centers()[::3]
    grid = np.array(np.meshgrid(c, c, c, indexing="ij")).reshape(3, -1).T
    f = embed(grid, 16, 0)
    assert len(np.unique(np.round(f, 12), axis=0)) == len(grid)


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(n_samples=0)
    with pytest.raises(ValueError):
        SynthConfig(pose_scale_deg=(25.0, 0.0, 12.0))


def test_round_trip_bitwise(tmp_path):
    ds = synth_generate(SynthConfig(n_samples=25, input_dim=7))
    csv_path, mat_path = save(ds, tmp_path / "d", "gldpose test")
    back = load_annotations(csv_path, mat_path)
    assert back.ids == ds.ids
    assert back.features.tobytes() == ds.features.tobytes()
    assert back.poses.tobytes() == ds.poses.tobytes()
    assert back.provenance == "ingested" and back.dropped == 0


def test_matrix_layout(tmp_path):
    m = np.arange(6.0).reshape(2, 3)
    write_matrix(tmp_path / "m.ldlf", m)
    raw = (tmp_path / "m.ldlf").read_bytes()
    assert raw[:4] == b"LDLF"
    assert int.from_bytes(raw[4:8], "little") == 1
    assert int.from_bytes(raw[8:16], "little") == 2
    assert int.from_bytes(raw[16:24], "little") == 3
    assert np.frombuffer(raw[24:], "<f8").tolist() == [0, 1, 2, 3, 4, 5]


def _files(tmp_path, poses, rows):
    ds = Dataset(np.ones((len(poses), 4)), np.array(poses, dtype=float), [f"i{k}" for k in range(len(poses))])
    write_annotations(tmp_path / "a.csv", ds)
    write_matrix(tmp_path / "a.ldlf", np.ones((rows, 4)))
    return tmp_path / "a.csv", tmp_path / "a.ldlf"


def test_load_three_rows(tmp_path):
    c, m = _files(tmp_path, [[1, 2, 3], [4, 5, 6], [7, 8, 9]], 3)
    ds = load_annotations(c, m)
    assert ds.ids == ["i0", "i1", "i2"]
    assert ds.poses[:, 0].tolist() == [1, 4, 7]


def test_row_count_mismatch(tmp_path):
    c, m = _files(tmp_path, [[1, 2, 3], [4, 5, 6], [7, 8, 9]], 2)
    with pytest.raises(DataFormatError, match="3 rows.*2"):
        load_annotations(c, m)


def test_discard_and_clamp(tmp_path):
    c, m = _files(tmp_path, [[1, 2, 3], [120, 0, 0], [7, 8, 9]], 3)
    ds = load_annotations(c, m, policy="discard")
    assert len(ds) == 2 and ds.dropped == 1 and ds.ids == ["i0", "i2"]
    ds = load_annotations(c, m, policy="clamp")
    assert len(ds) == 3 and ds.poses[1, 0] == 99.0


def test_bad_header_and_values(tmp_path):
    p = tmp_path / "b.csv"
    write_matrix(tmp_path / "b.ldlf", np.ones((1, 2)))
    p.write_text("id,yaw,pitch,roll\nx,1,2,3\n")
    with pytest.raises(DataFormatError, match="header"):
        load_annotations(p)
    p.write_text("id,yaw_deg,pitch_deg,roll_deg\nx,1,nan,3\n")
    with pytest.raises(DataFormatError, match=":2"):
        load_annotations(p)
    with pytest.raises(FileNotFoundError):
        load_annotations(tmp_path / "missing.csv")


def test_non_finite_matrix(tmp_path):
    write_matrix(tmp_path / "m.ldlf", np.array([[1.0, np.inf]]))
    with pytest.raises(DataFormatError, match="row 0, col 1"):
        read_matrix(tmp_path / "m.ldlf")


def test_split():
    ds = synth_generate(SynthConfig(n_samples=100, input_dim=4))
    tr, va, te = split(ds, (0.8, 0.1, 0.1), seed=5)
    assert (len(tr), len(va), len(te)) == (80, 10, 10)
    assert sorted(tr.ids + va.ids + te.ids) == sorted(ds.ids)
    again = split(ds, (0.8, 0.1, 0.1), seed=5)
    assert [p.ids for p in again] == [tr.ids, va.ids, te.ids]


def test_split_errors():
    ds = synth_generate(SynthConfig(n_samples=5, input_dim=4))
    with pytest.raises(ValueError):
        split(ds, (0.5, 0.5, 0.0))
    with pytest.raises(ValueError):
        split(ds, (0.9, 0.05, 0.05))

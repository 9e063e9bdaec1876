import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from hnnso.checkpoint import CheckpointError, decode, encode
from hnnso.data import (Dataset, digit_templates, fit_scaler, load_csv, load_idx, pca_fit, pca_inverse,
                        pca_transform, split_half_image, synth_digits, synth_structured, write_csv,
                        write_idx_images, write_matrix_csv, write_metadata)
from hnnso.errors import FormatError, ShapeError, ValidationError
from hnnso.linalg import Rng


def test_load_csv_small(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b,c\n1,2,3\n4,5,6\n")
    ds = load_csv(p, 2)
    assert np.array_equal(ds.x, [[1, 2], [4, 5]]) and np.array_equal(ds.y, [[3], [6]])
    assert ds.feature_names == ["a", "b"] and ds.target_names == ["c"]


def test_load_csv_bad_cell_names_line(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b,c\n1,2,3\n4,five,6\n")
    with pytest.raises(FormatError, match=":3:"):
        load_csv(p, 2)


def test_load_csv_errors(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValidationError):
        load_csv(p, 2)
    p.write_text("a,b,c\n1,2\n")
    with pytest.raises(FormatError):
        load_csv(p, 1)
    p.write_text("")
    with pytest.raises(FormatError):
        load_csv(p, 1)


def test_twenty_five_column_layout(tmp_path):
    p = tmp_path / "wide.csv"
    write_matrix_csv(p, Rng(0).uniform((4, 25)), [f"c{i}" for i in range(25)])
    ds = load_csv(p, 15)
    assert ds.n_in == 15 and ds.m_out == 10


@given(arrays(np.float64, (5, 4), elements=st.floats(-1e300, 1e300)))
def test_csv_round_trip_is_exact(m):
    import tempfile, pathlib
    with tempfile.TemporaryDirectory() as d:
        p = pathlib.Path(d) / "r.csv"
        write_csv(p, Dataset(m[:, :3], m[:, 3:]))
        back = load_csv(p, 3)
    assert np.array_equal(back.x, m[:, :3]) and np.array_equal(back.y, m[:, 3:])


def test_idx_round_trip_and_scaling(tmp_path):
    imgs = np.zeros((2, 28, 28), dtype=np.uint8)
    imgs[0, 0, 0] = 255
    imgs[1, 0, 1] = 51
    path = tmp_path / "img.idx"
    write_idx_images(path, imgs)
    m, labels = load_idx(path)
    assert m.shape == (2, 784) and labels is None
    assert m[0, 0] == 1.0 and m[1, 1] == pytest.approx(0.2)
    mc, _ = load_idx(path, column_major=True)
    assert mc[1, 28] == pytest.approx(0.2)


def test_idx_bad_magic_and_truncation(tmp_path):
    path = tmp_path / "img.idx"
    write_idx_images(path, np.zeros((1, 2, 2), dtype=np.uint8))
    raw = path.read_bytes()
    (tmp_path / "bad").write_bytes(b"\x00\x00\x08\x01" + raw[4:])
    with pytest.raises(FormatError):
        load_idx(tmp_path / "bad")
    (tmp_path / "short").write_bytes(raw[:-1])
    with pytest.raises(FormatError):
        load_idx(tmp_path / "short")


def test_idx_labels(tmp_path):
    import struct
    write_idx_images(tmp_path / "i", np.zeros((3, 2, 2), dtype=np.uint8))
    (tmp_path / "l").write_bytes(struct.pack(">II", 0x801, 3) + bytes([4, 1, 9]))
    _, labels = load_idx(tmp_path / "i", tmp_path / "l")
    assert labels.tolist() == [4, 1, 9]


def test_scaler_examples():
    s = fit_scaler(np.array([[0.0], [10.0]]))
    assert np.allclose(s.apply([[0.0], [10.0]]).ravel(), [-0.9, 0.9])
    assert s.apply([[20.0]])[0, 0] == pytest.approx(2.7)
    const = fit_scaler(np.array([[3.0, 1.0], [3.0, 2.0]]))
    assert const.constant.tolist() == [True, False]
    assert const.apply([[3.0, 1.0]])[0, 0] == 3.0


@given(arrays(np.float64, (6, 3), elements=st.floats(-1e6, 1e6)))
def test_scaler_round_trip(v):
    s = fit_scaler(v)
    a = s.a.copy()
    assert np.allclose(s.invert(s.apply(v)), v, rtol=1e-9, atol=1e-6)
    s.apply(v * 2)
    assert np.array_equal(s.a, a)


def test_pca_line():
    t = np.linspace(-1, 1, 11)
    p = pca_fit(np.column_stack([t, t]), 1)
    assert np.allclose(p.components[0], [2 ** -0.5, 2 ** -0.5])


@pytest.mark.parametrize("solver", ["jacobi", "lapack"])
def test_pca_full_reconstruction_and_covariance(solver):
    x = Rng(0).normal((50, 8)) @ Rng(1).normal((8, 8))
    full = pca_fit(x, 8, solver)
    assert np.max(np.abs(pca_inverse(full, pca_transform(full, x)) - x)) < 1e-9
    p = pca_fit(x, 3, solver)
    z = pca_transform(p, x)
    cov = np.cov(z, rowvar=False)
    assert np.max(np.abs(cov - np.diag(p.eigenvalues))) < 1e-8
    assert np.max(np.abs(z.mean(axis=0))) < 1e-10
    assert np.max(np.abs(p.components @ p.components.T - np.eye(3))) < 1e-9
    assert np.all(np.diff(p.eigenvalues) <= 0)


def test_pca_solvers_agree():
    x = Rng(4).normal((40, 6))
    a, b = pca_fit(x, 4, "jacobi"), pca_fit(x, 4, "lapack")
    assert np.allclose(a.eigenvalues, b.eigenvalues, atol=1e-12)
    assert np.allclose(a.components, b.components, atol=1e-8)


def test_pca_errors():
    with pytest.raises(ValidationError):
        pca_fit(np.zeros((5, 3)), 4)
    with pytest.raises(ValidationError):
        pca_fit(Rng(0).normal((5, 3)), 2, "power")


def test_synth_structured_properties():
    a = synth_structured(3, noise_sigma=0.0)
    b = synth_structured(3, noise_sigma=0.0)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    ds = synth_structured(0)
    assert ds.x.shape == (2000, 10) and ds.y.shape == (2000, 8)
    assert np.all(np.abs(ds.y) < 1)
    rho = np.corrcoef(ds.y, rowvar=False)
    assert np.max(np.abs(rho - np.diag(np.diag(rho)))) > 0.1
    with pytest.raises(ValidationError):
        synth_structured(0, r=1)


def test_split_half_image():
    assert split_half_image(np.zeros((2, 256))).n_in == 128
    ds = split_half_image(np.zeros((3, 30)))
    assert ds.n_in == ds.m_out == 15
    toy = split_half_image(np.array([[1.0, 2, 3, 4]]))
    assert np.array_equal(toy.x, [[1, 2]]) and np.array_equal(toy.y, [[3, 4]])
    with pytest.raises(ValidationError):
        split_half_image(np.zeros((2, 5)))


def test_synth_digits():
    raw, labels = synth_digits(0, d=40)
    assert raw.shape == (40, 64) and raw.min() >= 0 and raw.max() <= 1
    assert set(labels.tolist()) <= set(range(10))
    assert np.array_equal(raw, synth_digits(0, d=40)[0])
    assert digit_templates().shape == (10, 8, 8)
    clean, lab = synth_digits(1, d=20, noise_sigma=0.0)
    templates = digit_templates()
    for row, label in zip(clean, lab):
        # column-major: reshaping gives columns, so transpose back to rows
        img = row.reshape(8, 8).T
        padded = np.pad(templates[label], 1)
        shifts = [padded[1 - dr:9 - dr, 1 - dc:9 - dc] for dr in (-1, 0, 1) for dc in (-1, 0, 1)]
        assert any(np.array_equal(img > 0, s > 0) for s in shifts)


def test_dataset_validation():
    with pytest.raises(ShapeError):
        Dataset(np.zeros((2, 2)), np.zeros((3, 1)))
    with pytest.raises(ValidationError):
        Dataset(np.array([[np.nan]]), np.zeros((1, 1)))


def test_metadata(tmp_path):
    write_metadata(tmp_path / "m.txt", {"seed": 3, "d": 10})
    assert (tmp_path / "m.txt").read_text() == "seed=3\nd=10\n"


def test_checkpoint_container_round_trip():
    blocks = {"a": np.arange(6.0).reshape(2, 3), "t": Rng(0).normal((2, 3, 3))}
    buf = encode(b"HNNSO1", {"k": "v"}, blocks)
    magic, cfg, back = decode(buf, b"HNNSO1")
    assert magic == b"HNNSO1" and cfg == {"k": "v"}
    for k in blocks:
        assert np.array_equal(back[k], blocks[k])
    with pytest.raises(CheckpointError):
        decode(buf + b"\x00")
    with pytest.raises(CheckpointError):
        decode(buf, b"MLP__1")

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hnnso import gradcheck as gc
from hnnso.checkpoint import CheckpointError
from hnnso.errors import ContractError, ShapeError, ValidationError
from hnnso.layers import bilinear_forward, gae_decode, gae_encode
from hnnso.linalg import Rng
from hnnso.model import (HnnsoConfig, HnnsoModel, backward, corrupt_labels, forward_train, init,
                         load_model, num_params, predict, save_model)
from hnnso.data import fit_scaler
from conftest import loop_bilinear, loop_contract13, loop_layer


def small(seed=0, **kw):
    return init(HnnsoConfig(3, 2, h_x1=2, h_x2=2, h_e=2, seed=seed, **kw))


def test_init_deterministic_and_zero_biases():
    a, b = small(5), small(5)
    for name, arr in a.params().items():
        assert np.array_equal(arr, b.params()[name])
        if name.rsplit(".", 1)[1] in ("b", "b_h"):
            assert not np.any(arr)
    assert not np.array_equal(small(6).layer1.w_h, a.layer1.w_h)


def test_init_glorot_bound_four_to_three():
    m = init(HnnsoConfig(4, 3, h_x1=3, seed=1))
    bound = np.sqrt(6 / 7)
    assert m.layer1.w_h.shape == (3, 4)
    assert np.all(np.abs(m.layer1.w_h) < bound)


def test_config_validation():
    with pytest.raises(ValidationError):
        HnnsoConfig(0, 2)
    with pytest.raises(ValidationError):
        HnnsoConfig(3, 2, corruption_p=1.5)
    with pytest.raises(ValidationError):
        HnnsoConfig(3, 2, corruption="salt")


def test_config_string_round_trip():
    cfg = HnnsoConfig(3, 2, h_e=5, corruption_p=0.3, tensor_init=0.02, seed=9)
    assert HnnsoConfig.from_strings(cfg.to_strings()) == cfg


def test_zero_model_predicts_zero():
    m = small()
    for p in m.params().values():
        p[...] = 0
    y2, y1, y0 = predict(m, [0.4, -0.2, 0.9])
    assert not np.any(y2) and not np.any(y1) and not np.any(y0)


@pytest.mark.parametrize("seed", range(3))
def test_predict_composes_loop_oracles(seed):
    m = gc._small_model(seed)[0]
    x = Rng(seed).uniform_range(-1, 1, 3)
    y0 = loop_layer(m.layer1, x)
    y1 = loop_layer(m.layer2, y0)
    h = np.tanh(loop_bilinear(m.ae.t, y1, y1))
    y2 = np.tanh(loop_contract13(m.ae.t, y1, h))
    out = predict(m, x)
    assert np.max(np.abs(out[0] - y2)) < 1e-12
    assert np.max(np.abs(out[1] - y1)) < 1e-12
    assert np.max(np.abs(out[2] - y0)) < 1e-12
    assert np.array_equal(predict(m, x)[0], out[0])


@given(st.integers(0, 10**6))
def test_predict_in_open_unit_box(seed):
    m = gc._small_model(seed)[0]
    y = m.predict(Rng(seed).uniform_range(-2, 2, (5, 3)))
    assert np.all(np.abs(y) < 1)


def test_ae_pretrain_without_corruption_is_clean_autoencoding():
    m = gc._small_model(1)[0]
    target = np.array([[0.3, -0.5], [0.1, 0.8]])
    a, _ = forward_train(m, None, target, "ae_pretrain", Rng(1), corruption_p=0.0)
    b, _ = forward_train(m, None, target, "ae_pretrain", Rng(2), corruption_p=0.0)
    expected = gae_decode(m.ae, target, gae_encode(m.ae, target, target))
    assert np.array_equal(a, b)
    assert np.allclose(a, expected, atol=1e-15)


def test_full_masking_gives_zero_output():
    m = gc._small_model(1)[0]
    out, _ = forward_train(m, None, np.array([[0.3, -0.5]]), "ae_pretrain", Rng(0), corruption_p=1.0)
    assert not np.any(out)


def test_masks_deterministic_given_seed():
    m = small()
    y = Rng(0).uniform_range(-1, 1, (20, 2))
    c1, k1 = corrupt_labels(m, y, Rng(4))
    c2, k2 = corrupt_labels(m, y, Rng(4))
    assert np.array_equal(k1, k2) and np.array_equal(c1, c2)


def test_gaussian_corruption_mode():
    m = small(corruption="gaussian", noise_sigma=0.2)
    y = np.zeros((2000, 2))
    c, keep = corrupt_labels(m, y, Rng(0))
    assert np.all(keep == 1) and abs(c.std() - 0.2) < 0.01


def test_forward_train_contracts():
    m = small()
    with pytest.raises(ContractError):
        forward_train(m, None, None, "ae_pretrain", Rng(0))
    with pytest.raises(ValidationError):
        forward_train(m, np.zeros((1, 3)), np.zeros((1, 2)), "joint", Rng(0))


def test_finetune_forward_matches_predict():
    m = gc._small_model(3)[0]
    x = Rng(3).uniform_range(-1, 1, (4, 3))
    out, _ = forward_train(m, x, None, "finetune", Rng(0))
    assert np.array_equal(out, m.predict(x))


@pytest.mark.parametrize("seed", range(20))
def test_end_to_end_gradient(seed):
    assert gc.check_model(seed, "finetune") < 1e-5
    assert gc.check_model(seed, "ae_pretrain") < 1e-5


def test_ae_pretrain_touches_only_autoencoder():
    m = gc._small_model(0)[0]
    out, caches = forward_train(m, None, np.array([[0.2, 0.4]]), "ae_pretrain", Rng(0))
    assert set(backward(m, caches, np.ones_like(out))) == {"ae.t"}


def test_num_params_by_shape_formula():
    m = init(HnnsoConfig(2, 2, h_x1=1, h_x2=1, h_e=1))
    # per layer: w_h 1x2, b_h 1, two 3x3 slices, w 2x3, b 2
    assert m.layer1.num_params() == 2 + 1 + 18 + 6 + 2
    assert m.layer2.num_params() == 2 + 1 + 18 + 6 + 2
    assert num_params(m) == 29 + 29 + 4
    bigger = init(HnnsoConfig(2, 2, h_x1=1, h_x2=1, h_e=2))
    assert num_params(bigger) - num_params(m) == 4
    assert num_params(init(HnnsoConfig(2, 2, h_x1=1, h_x2=1, h_e=1, seed=8))) == num_params(m)


def test_model_shape_consistency():
    m = small()
    with pytest.raises(ShapeError):
        HnnsoModel(HnnsoConfig(4, 2), m.layer1, m.layer2, m.ae)


def test_copy_and_load_params_are_independent():
    m = small()
    c = m.copy()
    c.layer1.w[...] = 7
    assert not np.any(m.layer1.w == 7)
    m.load_params({"layer1.w": c.layer1.w})
    assert np.all(m.layer1.w == 7)
    with pytest.raises(ShapeError):
        m.load_params({"layer1.w": np.zeros(3)})


def test_checkpoint_round_trip(tmp_path):
    m = gc._small_model(2)[0]
    m.scaler_x = fit_scaler(Rng(0).normal((10, 3)))
    m.scaler_y = fit_scaler(Rng(1).normal((10, 2)))
    path = tmp_path / "m.bin"
    save_model(path, m)
    back = load_model(path)
    assert back.config == m.config
    for name, arr in m.params().items():
        assert np.array_equal(back.params()[name], arr)
    x = Rng(5).normal((4, 3))
    assert np.array_equal(back.predict_raw(x), m.predict_raw(x))
    save_model(tmp_path / "again.bin", back)
    assert (tmp_path / "again.bin").read_bytes() == path.read_bytes()


def test_corrupt_checkpoint_rejected(tmp_path):
    m = small()
    path = tmp_path / "m.bin"
    save_model(path, m)
    raw = path.read_bytes()
    (tmp_path / "trunc.bin").write_bytes(raw[:-3])
    with pytest.raises(CheckpointError):
        load_model(tmp_path / "trunc.bin")
    (tmp_path / "magic.bin").write_bytes(b"XXXXXX" + raw[6:])
    with pytest.raises(CheckpointError):
        load_model(tmp_path / "magic.bin")

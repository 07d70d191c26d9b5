"""Score-matching loss, gradient clipping, Adam, and the training loop."""

import numpy as np
import pytest

from tsdenoise.exceptions import BadParams, DivergedLoss, EmptyInput
from tsdenoise.nets import NetDims, init_params, param_shapes
from tsdenoise.sde import SdeKind, SdeSpec
from tsdenoise.training import (
    Adam,
    TrainConfig,
    as_training_matrix,
    clip_gradients,
    dsm_batch_loss,
    train_dsm,
)
from tsdenoise.windows import rolling_windows

VE = SdeSpec(SdeKind.VE)
TINY = NetDims(length=3, embed_dim=2, hidden=3, depth=1)


def fixed_batch(b=4, length=3, seed=0):
    rng = np.random.default_rng(seed)
    x0 = rng.normal(size=(b, length))
    t = rng.uniform(0.05, 1.0, size=b)
    z = rng.standard_normal((b, length))
    cond_mask = np.array([True, False] * (b // 2))
    return x0, t, z, cond_mask


# with all-zero parameters the network outputs 0, so the residual is z itself:
# loss = sum(z^2)/b and the only non-zero gradient is b_out = 2*sum_rows(z)/b
def test_dsm_loss_zero_params_oracle():
    x0, t, z, cond_mask = fixed_batch()
    params = {k: np.zeros(s) for k, s in param_shapes(TINY).items()}
    loss, grads = dsm_batch_loss(params, VE, TINY, x0, t, z, cond_mask)
    assert loss == pytest.approx(float(np.sum(z * z)) / 4, rel=1e-14)
    assert np.allclose(grads["b_out"], 2.0 * z.sum(axis=0) / 4, rtol=1e-14)
    for name, g in grads.items():
        if name != "b_out":
            assert np.allclose(g, 0.0)


def test_dsm_gradients_match_finite_differences():
    x0, t, z, cond_mask = fixed_batch()
    params = init_params(TINY, np.random.default_rng(1))
    _, grads = dsm_batch_loss(params, VE, TINY, x0, t, z, cond_mask)
    h = 1e-6
    for name in params:
        flat = params[name].reshape(-1)
        g_flat = grads[name].reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            up, _ = dsm_batch_loss(params, VE, TINY, x0, t, z, cond_mask)
            flat[j] = orig - h
            dn, _ = dsm_batch_loss(params, VE, TINY, x0, t, z, cond_mask)
            flat[j] = orig
            assert g_flat[j] == pytest.approx((up - dn) / (2 * h), rel=1e-4, abs=1e-7)


def test_dsm_condition_mask_changes_loss():
    x0, t, z, _ = fixed_batch()
    params = init_params(TINY, np.random.default_rng(2))
    kept, _ = dsm_batch_loss(params, VE, TINY, x0, t, z, np.ones(4, dtype=bool))
    dropped, _ = dsm_batch_loss(params, VE, TINY, x0, t, z, np.zeros(4, dtype=bool))
    assert kept != dropped


# hand-computed: norm of [3, 4] is 5; clipping to 1 scales by 1/5
def test_clip_gradients_oracle():
    grads = {"a": np.array([3.0, 4.0])}
    norm = clip_gradients(grads, 1.0)
    assert norm == 5.0
    assert np.allclose(grads["a"], [0.6, 0.8], rtol=1e-15)
    small = {"a": np.array([0.3, 0.4])}
    norm = clip_gradients(small, 1.0)
    assert norm == 0.5
    assert np.array_equal(small["a"], [0.3, 0.4])


def test_clip_gradients_global_norm_spans_params():
    grads = {"a": np.array([3.0]), "b": np.array([4.0])}
    assert clip_gradients(grads, 1.0) == 5.0
    assert grads["a"][0] == pytest.approx(0.6)
    assert grads["b"][0] == pytest.approx(0.8)


# hand-computed two Adam steps with constant gradient 2.0 and lr 0.01:
# bias correction makes each step lr * g / (|g| + eps), about -0.01 per step
def test_adam_oracle():
    params = {"w": np.array([0.0])}
    opt = Adam(params, learning_rate=0.01)
    g = {"w": np.array([2.0])}
    opt.step(g)
    assert params["w"][0] == pytest.approx(-0.01, rel=1e-7)
    opt.step(g)
    assert params["w"][0] == pytest.approx(-0.02, rel=1e-7)
    assert opt.step_count == 2


def test_adam_updates_in_place_and_tracks_moments():
    params = {"w": np.zeros(2)}
    opt = Adam(params, learning_rate=0.1)
    opt.step({"w": np.array([1.0, -1.0])})
    assert opt.m["w"][0] == pytest.approx(0.1)
    assert opt.v["w"][0] == pytest.approx(0.001)
    assert params["w"][0] < 0 < params["w"][1]


def test_train_config_validation():
    with pytest.raises(BadParams):
        TrainConfig(epochs=0)
    with pytest.raises(BadParams):
        TrainConfig(p_uncond=1.5)
    with pytest.raises(BadParams):
        TrainConfig(learning_rate=0.0)
    cfg = TrainConfig(epochs=3)
    assert TrainConfig(**cfg.to_dict()) == cfg


def test_as_training_matrix_filters_degenerate():
    series = np.concatenate([np.full(6, 5.0), [5.0, 6.0, 7.0, 8.0, 9.0, 10.0]])
    ws = rolling_windows(series, length=6, stride=6)
    assert len(ws) == 2
    mat = as_training_matrix(ws)
    assert mat.shape == (1, 6)  # the constant window is dropped
    flat_only = rolling_windows(np.full(6, 5.0), length=6, stride=6)
    with pytest.raises(EmptyInput):
        as_training_matrix(flat_only)
    plain = as_training_matrix([[1.0, 2.0], [3.0, 4.0]])
    assert plain.shape == (2, 2)


def test_train_dsm_learns_and_is_deterministic():
    rng = np.random.default_rng(6)
    base = np.sin(np.linspace(0, 2 * np.pi, 8))
    data = base[None, :] + 0.1 * rng.normal(size=(32, 8))
    cfg = TrainConfig(epochs=12, batch_size=16, learning_rate=3e-3, seed=5,
                      hidden=16, depth=1, embed_dim=4)
    model_a, losses_a = train_dsm(data, VE, cfg)
    model_b, losses_b = train_dsm(data, VE, cfg)
    assert losses_a == losses_b
    for name in model_a.params:
        assert np.array_equal(model_a.params[name], model_b.params[name])
    assert len(losses_a) == cfg.epochs
    # initial loss sits near E||z||^2 = L, and training reduces it
    assert 0.3 * 8 < losses_a[0] < 3 * 8
    assert losses_a[-1] < losses_a[0]
    assert not model_a.unconditional


def test_train_dsm_seed_changes_result():
    data = np.random.default_rng(7).normal(size=(16, 6))
    cfg = TrainConfig(epochs=2, batch_size=8, seed=1, hidden=8, depth=1, embed_dim=4)
    cfg2 = TrainConfig(epochs=2, batch_size=8, seed=2, hidden=8, depth=1, embed_dim=4)
    model_1, _ = train_dsm(data, VE, cfg)
    model_2, _ = train_dsm(data, VE, cfg2)
    assert not np.array_equal(model_1.params["w_in"], model_2.params["w_in"])


def test_train_dsm_p_uncond_one_gives_unconditional_model():
    data = np.random.default_rng(8).normal(size=(8, 6))
    cfg = TrainConfig(epochs=1, batch_size=8, p_uncond=1.0, hidden=8, depth=1,
                      embed_dim=4)
    model, _ = train_dsm(data, VE, cfg)
    assert model.unconditional
    x = data[:2]
    assert np.array_equal(model.score(x, 0.5, x), model.score(x, 0.5, None))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_train_dsm_diverged_loss():
    data = np.random.default_rng(9).normal(size=(16, 6))
    cfg = TrainConfig(epochs=3, batch_size=8, learning_rate=1e200, hidden=8,
                      depth=2, embed_dim=4)
    with pytest.raises(DivergedLoss):
        train_dsm(data, VE, cfg)


def test_train_dsm_accepts_window_set():
    series = np.cumsum(np.random.default_rng(10).normal(size=60)) + 50.0
    ws = rolling_windows(series, length=8, stride=4)
    cfg = TrainConfig(epochs=1, batch_size=8, hidden=8, depth=1, embed_dim=4)
    model, losses = train_dsm(ws, VE, cfg)
    assert model.dims.length == 8
    assert len(losses) == 1

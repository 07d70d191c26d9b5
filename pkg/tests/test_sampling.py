"""Reverse-sampling loop: predictor/corrector formulas, seeds, and guidance wiring."""

import logging
import math
from types import SimpleNamespace

import numpy as np
import pytest

from tsdenoise.exceptions import BadParams, NonFiniteState, ShapeMismatch, WrongKind
from tsdenoise.guidance import fourier_grad, tv_grad
from tsdenoise.sampling import (
    DenoiseConfig,
    corrector_step,
    denoise,
    denoise_batch,
    predictor_step,
    reverse_steps,
)
from tsdenoise.sde import T_EPS, SdeKind, SdeSpec, mean_std_of_t

VE10 = SdeSpec(SdeKind.VE, n_steps=10)
VP25 = SdeSpec(SdeKind.VP, n_steps=25)
VE100 = SdeSpec(SdeKind.VE, n_steps=100)


class StubModel:
    """Score model double: fixed score function plus call recording."""

    def __init__(self, spec, length, fn):
        self.spec = spec
        self.dims = SimpleNamespace(length=length)
        self.unconditional = False
        self.fn = fn
        self.calls = []

    def score(self, x, t, c=None):
        x = np.asarray(x, dtype=np.float64)
        self.calls.append((float(t), None if c is None else np.array(c)))
        return self.fn(x, t, c)


def constant_score(value):
    return lambda x, t, c: np.full_like(x, value)


def test_reverse_steps():
    assert reverse_steps(SdeSpec(SdeKind.VE), 0.4) == 400
    assert reverse_steps(SdeSpec(SdeKind.VE), 1.0) == 1000
    assert reverse_steps(VE100, 0.25) == 25
    with pytest.raises(BadParams):
        reverse_steps(VE100, 0.004)


# hand-computed VE update: x + (sig_i^2 - sig_{i-1}^2) s + sqrt(same) z
def test_predictor_step_ve_oracle():
    model = StubModel(VE10, 4, constant_score(0.5))
    x = np.array([1.0, -1.0, 0.5, 0.0])
    z = np.array([0.2, 0.1, -0.3, 0.4])
    out = predictor_step(VE10, model, x, i=3, noise=z)
    sig_i = 0.01 * 100.0 ** 0.3
    sig_prev = 0.01 * 100.0 ** 0.2
    diff = sig_i ** 2 - sig_prev ** 2
    assert np.allclose(out, x + diff * 0.5 + math.sqrt(diff) * z, rtol=1e-13)
    # the score was evaluated at t = i/N
    assert model.calls[0][0] == pytest.approx(0.3)


# hand-computed VP update: (x + beta_i/2 s) / sqrt(1 - beta_i) + sqrt(beta_i) z
def test_predictor_step_vp_oracle():
    model = StubModel(VP25, 3, constant_score(-1.0))
    x = np.array([0.5, 1.5, -2.0])
    z = np.zeros(3)
    out = predictor_step(VP25, model, x, i=5, noise=z)
    beta_i = (0.1 + (5 / 25) * 19.9) / 25  # 0.1632
    assert beta_i == pytest.approx(0.1632)
    assert np.allclose(out, (x - 0.5 * beta_i) / math.sqrt(1 - beta_i), rtol=1e-13)


def test_predictor_step_index_bounds_and_rng():
    model = StubModel(VE10, 2, constant_score(0.0))
    x = np.zeros(2)
    with pytest.raises(BadParams):
        predictor_step(VE10, model, x, i=0, noise=x)
    with pytest.raises(BadParams):
        predictor_step(VE10, model, x, i=11, noise=x)
    with pytest.raises(BadParams):
        predictor_step(VE10, model, x, i=1)  # neither rng nor noise
    out = predictor_step(VE10, model, x, i=1, rng=np.random.default_rng(0))
    assert out.shape == (2,)


def test_predictor_step_floors_time_at_eps():
    spec = SdeSpec(SdeKind.VE, n_steps=10 ** 6)
    model = StubModel(spec, 2, constant_score(0.0))
    predictor_step(spec, model, np.zeros(2), i=1, noise=np.zeros(2))
    assert model.calls[0][0] == T_EPS  # 1/1e6 < T_EPS floors to T_EPS


# hand-computed: eps = 2 (snr ||z|| / ||s||)^2, update x + eps s + sqrt(2 eps) z
def test_corrector_step_oracle():
    model = StubModel(VE10, 4, constant_score(2.0))
    x = np.array([0.0, 1.0, -1.0, 0.5])
    z = np.array([1.0, -1.0, 1.0, -1.0])
    out = corrector_step(VE10, model, x, t=0.5, snr=0.16, noise=z)
    s_norm = 2.0 * 2.0  # ||(2,2,2,2)|| = 4
    eps = 2.0 * (0.16 * 2.0 / s_norm) ** 2  # ||z|| = 2
    assert np.allclose(out, x + eps * 2.0 + math.sqrt(2 * eps) * z, rtol=1e-13)


def test_corrector_step_is_per_row():
    def rowwise(x, t, c):
        s = np.ones_like(x)
        s[1] *= 10.0  # second row has a 10x larger score norm
        return s

    model = StubModel(VE10, 3, rowwise)
    x = np.zeros((2, 3))
    z = np.ones((2, 3))
    out = corrector_step(VE10, model, x, t=0.5, noise=z)
    # row eps values differ by 100x, so the rows move by different amounts
    eps0 = 2.0 * (0.16 * math.sqrt(3) / math.sqrt(3)) ** 2
    eps1 = 2.0 * (0.16 * math.sqrt(3) / (10 * math.sqrt(3))) ** 2
    assert np.allclose(out[0], eps0 + math.sqrt(2 * eps0), rtol=1e-12)
    assert np.allclose(out[1], eps1 * 10.0 + math.sqrt(2 * eps1), rtol=1e-12)


def test_corrector_step_zero_score_skips_row(caplog):
    model = StubModel(VE10, 3, constant_score(0.0))
    x = np.array([1.0, 2.0, 3.0])
    with caplog.at_level(logging.WARNING, logger="tsdenoise.sampling"):
        out = corrector_step(VE10, model, x, t=0.5, noise=np.ones(3))
    assert np.array_equal(out, x)
    assert any("zero score norm" in r.message for r in caplog.records)


def test_corrector_step_validation():
    model = StubModel(VE10, 2, constant_score(1.0))
    with pytest.raises(BadParams):
        corrector_step(VE10, model, np.zeros(2), t=0.5, snr=0.0, noise=np.zeros(2))
    with pytest.raises(BadParams):
        corrector_step(VE10, model, np.zeros(2), t=0.5)


def test_denoise_config_validation_and_round_trip():
    cfg = DenoiseConfig(t_prime=0.3, n_seeds=2, eta_tv=0.0)
    assert DenoiseConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(BadParams):
        DenoiseConfig(t_prime=0.0)
    with pytest.raises(BadParams):
        DenoiseConfig(t_prime=1.1)
    with pytest.raises(BadParams):
        DenoiseConfig(n_seeds=0)
    with pytest.raises(BadParams):
        DenoiseConfig(snr=0.0)
    with pytest.raises(BadParams):
        DenoiseConfig.from_dict({"t_prime": 0.3, "bogus": 1})


def test_denoise_single_step_full_replay():
    # K = 1 reverse step: replay the exact rng stream and guidance order
    cfg = DenoiseConfig(t_prime=0.01, n_seeds=1, base_seed=3, corrector_steps=1,
                        omega=1.0, eta_tv=0.05, eta_f=0.02, fourier_threshold=0.1)
    model = StubModel(VE100, 6, constant_score(0.7))
    x0 = np.linspace(-1.0, 1.0, 6)
    result = denoise(x0, model, cfg=cfg)

    rng = np.random.default_rng(3)
    t_start = 0.01
    _, std = mean_std_of_t(VE100, t_start)
    x = x0[None, :] + float(std) * rng.standard_normal(6)[None, :]
    z = rng.standard_normal(6)[None, :]
    sig_i = 0.01 * 100.0 ** 0.01
    sig_prev = 0.01  # sigma at t = 0 on the step grid, no epsilon floor
    diff = sig_i ** 2 - sig_prev ** 2
    x = x + diff * 0.7 + math.sqrt(diff) * z
    z = rng.standard_normal(6)[None, :]
    s = np.full_like(x, 0.7)
    eps = 2.0 * (0.16 * np.linalg.norm(z) / np.linalg.norm(s)) ** 2
    x = x + eps * s + math.sqrt(2 * eps) * z
    x = x - 0.05 * tv_grad(x)
    x = x - 0.02 * fourier_grad(x, x0[None, :], 0.1)

    assert np.allclose(result.denoised, x[0], rtol=1e-12)
    # score calls condition on the input window itself
    t_pred, c_pred = model.calls[0]
    assert t_pred == pytest.approx(0.01)
    assert np.array_equal(c_pred, x0[None, :])
    # corrector runs at the post-step time floored at T_EPS
    assert model.calls[1][0] == T_EPS


def test_denoise_exact_score_contracts_to_data_ve():
    # for data concentrated at mu the exact VE score is -(x - mu)/sigma(t)^2;
    # the reverse loop must walk the noised sample back to mu
    mu = np.sin(np.linspace(0, 3 * np.pi, 12))

    def exact(x, t, c):
        _, std = mean_std_of_t(VE100, t)
        return -(x - mu) / float(std) ** 2

    model = StubModel(VE100, 12, exact)
    cfg = DenoiseConfig(t_prime=0.5, n_seeds=4, corrector_steps=1,
                        eta_tv=0.0, eta_f=0.0)
    result = denoise(mu, model, cfg=cfg)
    start_noise = float(mean_std_of_t(VE100, 0.5)[1])  # 0.1
    err = np.max(np.abs(result.denoised - mu))
    assert err < 0.5 * start_noise
    assert err < 0.06


def test_denoise_exact_score_contracts_to_data_vp():
    mu = np.cos(np.linspace(0, 2 * np.pi, 10))
    spec = SdeSpec(SdeKind.VP, n_steps=100)

    def exact(x, t, c):
        mean_c, std = mean_std_of_t(spec, t)
        return -(x - float(mean_c) * mu) / float(std) ** 2

    model = StubModel(spec, 10, exact)
    cfg = DenoiseConfig(t_prime=0.5, n_seeds=4, corrector_steps=1,
                        eta_tv=0.0, eta_f=0.0)
    result = denoise(mu, model, cfg=cfg)
    assert np.max(np.abs(result.denoised - mu)) < 0.2


def test_denoise_seed_average_identity():
    model = StubModel(VE100, 5, constant_score(0.2))
    x0 = np.array([0.1, 0.4, -0.2, 0.0, 0.3])
    cfg = DenoiseConfig(t_prime=0.1, n_seeds=4, base_seed=10)
    result = denoise(x0, model, cfg=cfg)
    assert result.per_seed.shape == (4, 5)
    assert np.allclose(result.denoised, result.per_seed.mean(axis=0), rtol=1e-15)
    # each per-seed row equals an independent single-seed run
    for j in range(4):
        single = denoise(x0, model, cfg=DenoiseConfig(t_prime=0.1, n_seeds=1,
                                                      base_seed=10 + j))
        assert np.array_equal(single.denoised, result.per_seed[j])


def test_denoise_batch_matches_single():
    rng = np.random.default_rng(12)
    x0 = rng.normal(size=(3, 8))

    def pull(x, t, c):
        return -x  # arbitrary state-dependent score

    model = StubModel(VE100, 8, pull)
    cfg = DenoiseConfig(t_prime=0.2, n_seeds=2, corrector_steps=1)
    batch = denoise_batch(x0, model, cfg=cfg)
    assert batch.denoised.shape == (3, 8)
    for r in range(3):
        single = denoise(x0[r], model, cfg=cfg)
        assert np.allclose(batch.denoised[r], single.denoised, atol=1e-8)


def test_denoise_validation():
    model = StubModel(VE100, 5, constant_score(0.0))
    with pytest.raises(ShapeMismatch):
        denoise(np.zeros(4), model)
    with pytest.raises(WrongKind):
        denoise(np.zeros(5), model, spec=SdeSpec(SdeKind.VE, n_steps=7))
    with pytest.raises(ShapeMismatch):
        denoise_batch(np.zeros((2, 4)), model)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_denoise_non_finite_state():
    model = StubModel(VE100, 4, constant_score(math.inf))
    with pytest.raises(NonFiniteState):
        denoise(np.zeros(4), model, cfg=DenoiseConfig(t_prime=0.1, n_seeds=1))


def test_denoise_zero_guidance_weights_skip_guidance():
    # eta = 0 must leave the state untouched by the guidance terms: compare a
    # plain run against one whose guidance would be a no-op anyway
    model = StubModel(VE100, 6, constant_score(0.1))
    x0 = np.zeros(6)
    cfg_off = DenoiseConfig(t_prime=0.05, n_seeds=1, corrector_steps=0,
                            eta_tv=0.0, eta_f=0.0)
    res_off = denoise(x0, model, cfg=cfg_off)
    assert np.all(np.isfinite(res_off.denoised))
    cfg_tv = DenoiseConfig(t_prime=0.05, n_seeds=1, corrector_steps=0,
                           eta_tv=0.3, eta_f=0.0)
    res_tv = denoise(x0, model, cfg=cfg_tv)
    assert not np.array_equal(res_off.denoised, res_tv.denoised)

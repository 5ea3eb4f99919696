import math

import numpy as np
import pytest

from kprior import kernels, sampling
from kprior.degradation import DegradeConfig, degrade

from _reference import make_test_image


def _gauss_cfg(**kw):
    base = dict(num_samples=5, family="gaussian", scale=2, side=11, walk_scale=1.0)
    base.update(kw)
    return sampling.SamplerConfig(**base)


def test_independent_draw_within_ranges():
    cfg = _gauss_cfg(num_samples=1, proposal="independent")
    state = sampling.initial_state(cfg)
    cands = sampling.sample_candidates(state, cfg, np.random.default_rng(0))
    assert len(cands) == 1
    lat, k = cands[0]
    lo, hi = kernels.sigma_range(cfg.scale)
    assert lo <= lat.sigma1 <= hi and lo <= lat.sigma2 <= hi
    assert 0.0 <= lat.theta < math.pi
    kernels.check_kernel(k)


def test_random_walk_zero_scale_replays_best():
    cfg = _gauss_cfg(walk_scale=0.0)
    best = kernels.GaussianLatent(1.2, 2.2, 0.5)
    state = sampling.SamplerState(best, 3, 0.0)
    cands = sampling.sample_candidates(state, cfg, np.random.default_rng(1))
    ref = kernels.gaussian_kernel(best, cfg.side)
    for lat, k in cands:
        assert lat == best
        np.testing.assert_array_equal(k, ref)


def test_random_walk_falls_back_to_independent():
    cfg = _gauss_cfg()
    state = sampling.initial_state(cfg)
    assert state.last_best_latent is None
    cands = sampling.sample_candidates(state, cfg, np.random.default_rng(2))
    lo, hi = kernels.sigma_range(cfg.scale)
    for lat, _ in cands:
        assert lo <= lat.sigma1 <= hi


def test_independent_sigma_coverage():
    cfg = _gauss_cfg(num_samples=1000, proposal="independent")
    state = sampling.initial_state(cfg)
    cands = sampling.sample_candidates(state, cfg, np.random.default_rng(3))
    sig1 = np.array([lat.sigma1 for lat, _ in cands])
    lo, hi = kernels.sigma_range(cfg.scale)
    assert (sig1.max() - sig1.min()) / (hi - lo) >= 0.9


def test_motion_candidates_valid():
    cfg = sampling.SamplerConfig(num_samples=4, family="motion", scale=2, side=11,
                                 proposal="independent")
    state = sampling.initial_state(cfg)
    for lat, k in sampling.sample_candidates(state, cfg, np.random.default_rng(4)):
        kernels.check_kernel(k)
        llo, lhi = sampling.motion_length_range(cfg.side)
        assert llo <= lat.length_scale <= lhi


def test_weights_identical_candidates():
    cfg = _gauss_cfg()
    x = make_test_image(0, 16)
    k = kernels.gaussian_kernel(kernels.GaussianLatent(1.0, 1.0, 0.0), 11)
    y = degrade(x, k, DegradeConfig(scale=2))
    lat = kernels.GaussianLatent(1.5, 1.5, 0.0)
    cands = [(lat, kernels.gaussian_kernel(lat, 11))] * 4
    w = sampling.candidate_weights(cands, x, y, cfg)
    np.testing.assert_allclose(w, 1.0, atol=1e-12)


def test_weight_arithmetic_fixture():
    # losses (after floor) 0.1 and 0.3: raw 10 and 10/3, mean-normalized 1.5 and 0.5
    w = sampling._weights_from_losses(np.array([0.1, 0.3]))
    np.testing.assert_allclose(w, [1.5, 0.5], atol=1e-12)


def test_weights_monotone_in_loss():
    rng = np.random.default_rng(5)
    cfg = _gauss_cfg(num_samples=6, proposal="independent")
    x = make_test_image(1, 16)
    k_true = kernels.gaussian_kernel(kernels.GaussianLatent(1.1, 2.0, 0.3), 11)
    y = degrade(x, k_true, DegradeConfig(scale=2))
    cands = sampling.sample_candidates(sampling.initial_state(cfg), cfg, rng)
    losses = sampling.candidate_losses(cands, x, y, cfg)
    w = sampling.candidate_weights(cands, x, y, cfg)
    order_by_loss = np.argsort(losses)
    order_by_weight = np.argsort(w)[::-1]
    np.testing.assert_array_equal(order_by_loss, order_by_weight)


def test_planted_true_kernel_wins():
    rng = np.random.default_rng(6)
    cfg = _gauss_cfg(num_samples=5, proposal="independent")
    x = make_test_image(2, 16)
    lat_true = kernels.GaussianLatent(1.4, 0.8, 1.1)
    k_true = kernels.gaussian_kernel(lat_true, 11)
    y = degrade(x, k_true, DegradeConfig(scale=2))
    cands = sampling.sample_candidates(sampling.initial_state(cfg), cfg, rng)
    cands[2] = (lat_true, k_true)
    w = sampling.candidate_weights(cands, x, y, cfg)
    assert int(np.argmax(w)) == 2


def test_weights_uniform_when_floor_dominates():
    rng = np.random.default_rng(7)
    cfg = _gauss_cfg(num_samples=5, proposal="independent", delta_floor=1e9)
    x = make_test_image(3, 16)
    k = kernels.gaussian_kernel(kernels.GaussianLatent(1.0, 1.0, 0.0), 11)
    y = degrade(x, k, DegradeConfig(scale=2))
    cands = sampling.sample_candidates(sampling.initial_state(cfg), cfg, rng)
    w = sampling.candidate_weights(cands, x, y, cfg)
    np.testing.assert_allclose(w, 1.0, atol=1e-6)


def test_nonfinite_candidates_discarded():
    cfg = _gauss_cfg(num_samples=2)
    x = np.full((16, 16), np.nan)
    y = np.zeros((8, 8))
    lat = kernels.GaussianLatent(1.0, 1.0, 0.0)
    cands = [(lat, kernels.gaussian_kernel(lat, 11))] * 2
    with pytest.raises(ValueError):
        with pytest.warns(UserWarning):
            sampling.candidate_weights(cands, x, y, cfg)


def test_kernel_prior_single_candidate():
    cfg = _gauss_cfg()
    state = sampling.initial_state(cfg)
    lat = kernels.GaussianLatent(1.0, 2.0, 0.2)
    k = kernels.gaussian_kernel(lat, 11)
    prior, new_state = sampling.kernel_prior([(lat, k)], np.array([1.0]), cfg, state)
    np.testing.assert_allclose(prior, k, atol=1e-12)
    assert new_state.last_best_latent == lat
    assert new_state.iteration == 1


def test_kernel_prior_equal_weights_is_mean():
    cfg = _gauss_cfg()
    state = sampling.initial_state(cfg)
    lats = [kernels.GaussianLatent(0.8 + 0.3 * i, 1.5, 0.1 * i) for i in range(4)]
    cands = [(lat, kernels.gaussian_kernel(lat, 11)) for lat in lats]
    prior, _ = sampling.kernel_prior(cands, np.ones(4), cfg, state)
    mean = np.mean([k for _, k in cands], axis=0)
    np.testing.assert_allclose(prior, mean / mean.sum(), atol=1e-12)
    kernels.check_kernel(prior)


def test_kernel_prior_anneals_walk_scale():
    cfg = _gauss_cfg(anneal=0.9, walk_scale=2.0)
    state = sampling.initial_state(cfg)
    lat = kernels.GaussianLatent(1.0, 1.0, 0.0)
    cands = [(lat, kernels.gaussian_kernel(lat, 11))]
    scales = [state.walk_scale]
    for _ in range(3):
        _, state = sampling.kernel_prior(cands, np.array([1.0]), cfg, state)
        scales.append(state.walk_scale)
    assert all(b < a for a, b in zip(scales, scales[1:]))


def test_kernel_prior_empty_raises():
    cfg = _gauss_cfg()
    with pytest.raises(ValueError):
        sampling.kernel_prior([], np.zeros(0), cfg, sampling.initial_state(cfg))


def test_weighted_prior_beats_plain_mean():
    # with one candidate planted at the truth, the weighted average should be
    # closer to the true kernel than the unweighted mean almost always
    cfg = _gauss_cfg(num_samples=5, proposal="independent")
    x = make_test_image(4, 16)
    wins = 0
    for seed in range(50):
        rng = np.random.default_rng(100 + seed)
        lat_true = sampling.draw_independent_latent(cfg, rng)
        k_true = kernels.gaussian_kernel(lat_true, cfg.side)
        y = degrade(x, k_true, DegradeConfig(scale=2))
        cands = sampling.sample_candidates(sampling.initial_state(cfg), cfg, rng)
        cands[0] = (lat_true, k_true)
        w = sampling.candidate_weights(cands, x, y, cfg)
        prior, _ = sampling.kernel_prior(cands, w, cfg, sampling.initial_state(cfg))
        mean = np.mean([k for _, k in cands], axis=0)
        if np.linalg.norm(prior - k_true) < np.linalg.norm(mean / mean.sum() - k_true):
            wins += 1
    assert wins >= 45


def test_sample_prior_round_info():
    cfg = _gauss_cfg(num_samples=3)
    x = make_test_image(5, 16)
    k = kernels.gaussian_kernel(kernels.GaussianLatent(1.0, 1.5, 0.4), 11)
    y = degrade(x, k, DegradeConfig(scale=2))
    prior, state, info = sampling.sample_prior(
        x, y, sampling.initial_state(cfg), cfg, np.random.default_rng(8)
    )
    kernels.check_kernel(prior)
    assert state.iteration == 1
    assert len(info["losses"]) == 3 and len(info["weights"]) == 3
    assert info["best_index"] == int(np.argmax(info["weights"]))
    assert set(info["best_latent"]) == {"sigma1", "sigma2", "theta"}

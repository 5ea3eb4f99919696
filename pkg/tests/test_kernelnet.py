import numpy as np
import pytest

from kprior import kernelnet as kn

from _reference import fd_gradient, rel_err

TINY_DIMS = (4, 6, 9)


def test_forward_simplex():
    params = kn.init_params(0, TINY_DIMS)
    k = kn.forward(params)
    assert k.shape == (3, 3)
    assert np.all(k > 0)
    assert abs(k.sum() - 1.0) < 1e-9


def test_zero_weights_give_uniform_kernel():
    params = kn.init_params(0, TINY_DIMS)
    zeroed = kn.KernelNetParams(
        params.layer_dims,
        tuple(np.zeros_like(w) for w in params.weights),
        tuple(np.zeros_like(b) for b in params.biases),
        params.input_noise,
        params.seed,
    )
    np.testing.assert_allclose(kn.forward(zeroed), np.full((3, 3), 1.0 / 9.0), atol=1e-15)


def test_init_deterministic():
    a = kn.init_params(7, TINY_DIMS)
    b = kn.init_params(7, TINY_DIMS)
    for wa, wb in zip(a.weights, b.weights):
        np.testing.assert_array_equal(wa, wb)
    np.testing.assert_array_equal(a.input_noise, b.input_noise)


def test_init_near_uniform_over_seeds():
    side = 19
    dims = (200, 1000, 1000, side * side)
    uniform = 1.0 / (side * side)
    worst = max(kn.forward(kn.init_params(seed, dims)).max() for seed in range(100))
    assert worst <= 5.0 * uniform


def test_param_count_desk_config():
    params = kn.init_params(0, (200, 1000, 1000, 361))
    n = kn.num_params(params)
    assert n == 200 * 1000 + 1000 + 1000 * 1000 + 1000 + 1000 * 361 + 361
    assert 1.5e6 < n < 1.6e6


def test_init_rejects_bad_output_dim():
    with pytest.raises(ValueError):
        kn.init_params(0, (4, 10))  # 10 is not a square
    with pytest.raises(ValueError):
        kn.init_params(0, (4, 16))  # side 4 is even


def test_backward_zero_upstream():
    params = kn.init_params(1, TINY_DIMS)
    g = kn.backward(params, np.zeros((3, 3)))
    for arr in (*g.weights, *g.biases):
        np.testing.assert_array_equal(arr, 0.0)


def test_backward_shape_mismatch():
    params = kn.init_params(1, TINY_DIMS)
    with pytest.raises(ValueError):
        kn.backward(params, np.zeros((4, 4)))


def _loss_for(params, upstream):
    return float((upstream * kn.forward(params)).sum())


def test_backward_matches_finite_differences():
    params = kn.init_params(2, TINY_DIMS)
    rng = np.random.default_rng(3)
    upstream = rng.standard_normal((3, 3))
    grad = kn.backward(params, upstream)
    for i in range(len(params.weights)):
        for field, g in (("weights", grad.weights[i]), ("biases", grad.biases[i])):
            def loss(arr, i=i, field=field):
                mats = list(getattr(params, field))
                mats[i] = arr
                trial = kn.KernelNetParams(
                    params.layer_dims,
                    tuple(mats) if field == "weights" else params.weights,
                    tuple(mats) if field == "biases" else params.biases,
                    params.input_noise,
                    params.seed,
                )
                return _loss_for(trial, upstream)

            fd = fd_gradient(loss, getattr(params, field)[i].copy())
            # per-parameter agreement, tolerance tied to the gradient scale
            tol = 1e-5 * max(float(np.abs(fd).max()), 1e-6)
            assert np.abs(g - fd).max() <= tol


def test_backward_constant_upstream_gives_zero():
    # softmax outputs sum to one, so a constant upstream has zero gradient
    params = kn.init_params(4, TINY_DIMS)
    g = kn.backward(params, np.ones((3, 3)))
    for arr in (*g.weights, *g.biases):
        assert np.abs(arr).max() < 1e-12


def test_directional_derivative_identity():
    params = kn.init_params(5, TINY_DIMS)
    rng = np.random.default_rng(6)
    upstream = rng.standard_normal((3, 3))
    grad = kn.backward(params, upstream)
    eps = 1e-6
    for trial in range(3):
        d_w = [rng.standard_normal(w.shape) for w in params.weights]
        d_b = [rng.standard_normal(b.shape) for b in params.biases]

        def shifted(sign):
            return kn.KernelNetParams(
                params.layer_dims,
                tuple(w + sign * eps * d for w, d in zip(params.weights, d_w)),
                tuple(b + sign * eps * d for b, d in zip(params.biases, d_b)),
                params.input_noise,
                params.seed,
            )

        numeric = (_loss_for(shifted(+1), upstream) - _loss_for(shifted(-1), upstream)) / (2 * eps)
        analytic = sum(float((g * d).sum()) for g, d in zip(grad.weights, d_w))
        analytic += sum(float((g * d).sum()) for g, d in zip(grad.biases, d_b))
        assert rel_err(np.array([numeric]), np.array([analytic])) < 1e-4


def test_forward_deterministic():
    params = kn.init_params(8, TINY_DIMS)
    np.testing.assert_array_equal(kn.forward(params), kn.forward(params))


def test_save_load_roundtrip(tmp_path):
    params = kn.init_params(9, (6, 10, 25))
    path = tmp_path / "net.bin"
    kn.save_params(path, params)
    loaded = kn.load_params(path)
    assert loaded.layer_dims == params.layer_dims
    assert loaded.seed == params.seed
    np.testing.assert_array_equal(loaded.input_noise, params.input_noise)
    for a, b in zip(loaded.weights, params.weights):
        np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(kn.forward(loaded), kn.forward(params))


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"nope" + b"\0" * 64)
    with pytest.raises(ValueError):
        kn.load_params(path)

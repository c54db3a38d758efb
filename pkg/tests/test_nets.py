import numpy as np
import pytest

from rlwean.nets import (AdamState, GradientBuffer, MlpModel, adam_update,
                         backward, clip_grad_norm, forward, init_adam,
                         init_mlp, zero_grads)


def test_zero_network_outputs_zero():
    model = MlpModel([3, 4, 2],
                     [np.zeros((4, 3)), np.zeros((2, 4))],
                     [np.zeros(4), np.zeros(2)])
    np.testing.assert_array_equal(forward(model, np.ones(3)), np.zeros(2))


def test_single_linear_layer_is_affine():
    w = np.array([[2.0, -1.0], [0.5, 3.0]])
    b = np.array([1.0, -2.0])
    model = MlpModel([2, 2], [w], [b])
    x = np.array([3.0, 4.0])
    np.testing.assert_allclose(forward(model, x), w @ x + b)


def test_two_layer_hand_computation():
    w1 = np.array([[1.0, 0.0], [0.0, 1.0]])
    b1 = np.array([0.5, -0.5])
    w2 = np.array([[1.0, 2.0]])
    b2 = np.array([0.25])
    model = MlpModel([2, 2, 1], [w1, w2], [b1, b2])
    x = np.array([0.2, 0.8])
    h = np.tanh(w1 @ x + b1)
    expected = w2 @ h + b2
    np.testing.assert_allclose(forward(model, x), expected, atol=1e-15)


def test_batch_forward_matches_loop():
    rng = np.random.default_rng(0)
    model = init_mlp([4, 8, 3], rng)
    xs = rng.standard_normal((10, 4))
    batch = forward(model, xs)
    for i in range(10):
        np.testing.assert_allclose(batch[i], forward(model, xs[i]))


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(1)
    model = init_mlp([4, 8, 8, 2], rng)
    x = rng.standard_normal(4)
    gout = rng.standard_normal(2)
    grads = backward(model, x, gout)
    h = 1e-5
    for p, g in zip(model.weights + model.biases,
                    grads.d_weights + grads.d_biases):
        flat_p, flat_g = p.reshape(-1), g.reshape(-1)
        for j in range(flat_p.size):
            orig = flat_p[j]
            flat_p[j] = orig + h
            up = float(forward(model, x) @ gout)
            flat_p[j] = orig - h
            down = float(forward(model, x) @ gout)
            flat_p[j] = orig
            fd = (up - down) / (2 * h)
            assert abs(fd - flat_g[j]) <= 1e-4 * max(abs(fd), 1e-8)


def test_batched_backward_sums_over_batch():
    rng = np.random.default_rng(2)
    model = init_mlp([3, 5, 2], rng)
    xs = rng.standard_normal((6, 3))
    gs = rng.standard_normal((6, 2))
    batched = backward(model, xs, gs)
    summed = zero_grads(model)
    for x, g in zip(xs, gs):
        single = backward(model, x, g)
        for dw, s in zip(single.d_weights, summed.d_weights):
            s += dw
        for db, s in zip(single.d_biases, summed.d_biases):
            s += db
    for a, b in zip(batched.d_weights + batched.d_biases,
                    summed.d_weights + summed.d_biases):
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_zero_output_gradient_gives_zero_buffer():
    rng = np.random.default_rng(3)
    model = init_mlp([3, 4, 2], rng)
    grads = backward(model, rng.standard_normal(3), np.zeros(2))
    assert grads.global_norm() == 0.0


def test_gradient_linearity_in_output_gradient():
    rng = np.random.default_rng(4)
    model = init_mlp([3, 4, 2], rng)
    x = rng.standard_normal(3)
    g = rng.standard_normal(2)
    g1 = backward(model, x, g)
    g2 = backward(model, x, 2.0 * g)
    for a, b in zip(g1.d_weights + g1.d_biases, g2.d_weights + g2.d_biases):
        np.testing.assert_allclose(2.0 * a, b, atol=1e-12)


def test_clip_grad_norm():
    buf = GradientBuffer([np.array([[3.0, 4.0]])], [np.zeros(1)])
    norm = clip_grad_norm(buf, 1.0)
    assert norm == pytest.approx(5.0)
    assert buf.global_norm() == pytest.approx(1.0)
    # under the cap: untouched
    buf2 = GradientBuffer([np.array([[0.3, 0.4]])], [np.zeros(1)])
    clip_grad_norm(buf2, 1.0)
    assert buf2.global_norm() == pytest.approx(0.5)


def test_adam_zero_gradient_leaves_params():
    rng = np.random.default_rng(5)
    model = init_mlp([2, 3, 1], rng)
    before = model.copy()
    state = init_adam(model, 1e-3)
    adam_update(model, state, zero_grads(model))
    assert state.step_count == 1
    for a, b in zip(model.weights + model.biases,
                    before.weights + before.biases):
        np.testing.assert_array_equal(a, b)


def test_adam_first_step_size():
    # with bias correction, the first step has magnitude ~lr in -sign(g)
    model = MlpModel([1, 1], [np.array([[1.0]])], [np.array([0.0])])
    state = init_adam(model, 0.01)
    grads = GradientBuffer([np.array([[2.5]])], [np.array([0.0])])
    adam_update(model, state, grads)
    assert model.weights[0][0, 0] == pytest.approx(1.0 - 0.01, abs=1e-6)


def test_adam_minimizes_quadratic():
    # loss = 0.5 (w - 3)^2 on a single scalar weight
    model = MlpModel([1, 1], [np.array([[0.0]])], [np.array([0.0])])
    state = init_adam(model, 0.05)
    losses = []
    for _ in range(500):
        w = model.weights[0][0, 0]
        losses.append(0.5 * (w - 3.0) ** 2)
        grads = GradientBuffer([np.array([[w - 3.0]])], [np.array([0.0])])
        adam_update(model, state, grads)
    assert losses[-1] < 1e-3 < losses[0]
    assert np.mean(losses[-50:]) < np.mean(losses[:50])


def test_adam_rejects_nonfinite_gradients():
    rng = np.random.default_rng(6)
    model = init_mlp([2, 2], rng)
    before = model.copy()
    state = init_adam(model, 1e-3)
    grads = zero_grads(model)
    grads.d_weights[0][0, 0] = np.nan
    with pytest.raises(FloatingPointError):
        adam_update(model, state, grads)
    assert state.step_count == 0
    for a, b in zip(model.weights + model.biases,
                    before.weights + before.biases):
        np.testing.assert_array_equal(a, b)


def test_init_determinism_and_bounds():
    a = init_mlp([4, 8, 2], np.random.default_rng(42), output_scale=0.01)
    b = init_mlp([4, 8, 2], np.random.default_rng(42), output_scale=0.01)
    for x, y in zip(a.weights + a.biases, b.weights + b.biases):
        np.testing.assert_array_equal(x, y)
    assert np.max(np.abs(a.weights[0])) <= np.sqrt(1.0 / 4)
    assert np.max(np.abs(a.weights[1])) <= 0.01 * np.sqrt(1.0 / 8)
    with pytest.raises(ValueError):
        init_mlp([4], np.random.default_rng(0))

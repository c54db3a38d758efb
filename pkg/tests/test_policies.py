import numpy as np
import pytest

from rlwean.nets import MlpModel, backward, init_mlp
from rlwean.policies import (CategoricalPolicy, GaussianPolicy, action_probs,
                             log_prob_and_entropy, log_softmax, sample_action,
                             softmax)


def fixed_logit_policy(logits):
    """Single-layer net with zero weights so the bias is the logit vector."""
    logits = np.asarray(logits, dtype=np.float64)
    n = len(logits)
    net = MlpModel([1, n], [np.zeros((n, 1))], [logits.copy()])
    return CategoricalPolicy(net)


def test_uniform_logits_give_uniform_probs():
    policy = fixed_logit_policy([0.0, 0.0, 0.0, 0.0])
    obs = np.zeros(1)
    probs = action_probs(policy, obs)
    np.testing.assert_allclose(probs, 0.25, atol=1e-15)
    logp, entropy = log_prob_and_entropy(policy, obs, 2)
    assert logp == pytest.approx(np.log(0.25))
    assert entropy == pytest.approx(np.log(4.0))


def test_extreme_logits_pick_one_action():
    policy = fixed_logit_policy([1000.0, 0.0])
    rng = np.random.default_rng(0)
    actions = {sample_action(policy, np.zeros(1), rng)[0] for _ in range(10_000)}
    assert actions == {0}


def test_sample_frequencies_match_softmax():
    logits = np.array([0.5, -0.3, 1.2])
    policy = fixed_logit_policy(logits)
    probs = softmax(logits)
    rng = np.random.default_rng(1)
    n = 100_000
    counts = np.zeros(3)
    for _ in range(n):
        a, _ = sample_action(policy, np.zeros(1), rng)
        counts[a] += 1
    for i in range(3):
        se = np.sqrt(probs[i] * (1 - probs[i]) / n)
        assert abs(counts[i] / n - probs[i]) < 3 * se


def test_probabilities_sum_to_one():
    rng = np.random.default_rng(2)
    net = init_mlp([3, 8, 5], rng)
    policy = CategoricalPolicy(net)
    for _ in range(20):
        probs = action_probs(policy, rng.standard_normal(3))
        assert abs(probs.sum() - 1.0) < 1e-10
        logp = log_softmax(rng.standard_normal(5) * 10)
        assert abs(np.exp(logp).sum() - 1.0) < 1e-10


def test_sampled_log_prob_consistent_with_evaluation():
    rng = np.random.default_rng(3)
    net = init_mlp([2, 8, 4], rng)
    policy = CategoricalPolicy(net)
    obs = rng.standard_normal(2)
    a, logp = sample_action(policy, obs, rng)
    logp2, _ = log_prob_and_entropy(policy, obs, a)
    assert logp == pytest.approx(logp2, abs=1e-12)


def test_categorical_log_prob_gradient_matches_fd():
    rng = np.random.default_rng(4)
    net = init_mlp([3, 6, 4], rng)
    policy = CategoricalPolicy(net)
    obs = rng.standard_normal(3)
    action = 2
    probs = action_probs(policy, obs)
    onehot = np.zeros(4)
    onehot[action] = 1.0
    grads = backward(net, obs, onehot - probs)  # d logp / d logits
    h = 1e-6
    for p, g in zip(net.weights + net.biases,
                    grads.d_weights + grads.d_biases):
        flat_p, flat_g = p.reshape(-1), g.reshape(-1)
        for j in range(0, flat_p.size, 3):  # spot-check a third of the params
            orig = flat_p[j]
            flat_p[j] = orig + h
            up = log_prob_and_entropy(policy, obs, action)[0]
            flat_p[j] = orig - h
            down = log_prob_and_entropy(policy, obs, action)[0]
            flat_p[j] = orig
            fd = (up - down) / (2 * h)
            assert abs(fd - flat_g[j]) <= 1e-4 * max(abs(fd), 1e-6)


def test_gaussian_log_prob_and_entropy():
    net = MlpModel([1, 1], [np.zeros((1, 1))], [np.zeros(1)])
    policy = GaussianPolicy(net, log_std=np.zeros(1))
    logp, entropy = log_prob_and_entropy(policy, np.zeros(1), np.zeros(1))
    assert logp == pytest.approx(-0.5 * np.log(2 * np.pi))
    # standard normal differential entropy: 0.5 ln(2 pi e) ~ 1.4189385
    assert entropy == pytest.approx(0.5 * np.log(2 * np.pi * np.e))


def test_gaussian_sample_statistics():
    net = MlpModel([1, 2], [np.zeros((2, 1))], [np.array([1.0, -2.0])])
    policy = GaussianPolicy(net, log_std=np.log(np.array([0.5, 2.0])))
    rng = np.random.default_rng(5)
    samples = np.array([sample_action(policy, np.zeros(1), rng)[0]
                        for _ in range(50_000)])
    np.testing.assert_allclose(samples.mean(axis=0), [1.0, -2.0], atol=0.05)
    np.testing.assert_allclose(samples.std(axis=0), [0.5, 2.0], rtol=0.03)


def test_rpo_perturbation_only_with_rng():
    net = MlpModel([1, 1], [np.zeros((1, 1))], [np.zeros(1)])
    policy = GaussianPolicy(net, log_std=np.zeros(1), rpo_alpha=0.5)
    base, _ = log_prob_and_entropy(policy, np.zeros(1), np.array([0.3]))
    again, _ = log_prob_and_entropy(policy, np.zeros(1), np.array([0.3]))
    assert base == again  # no rng: deterministic
    perturbed, _ = log_prob_and_entropy(policy, np.zeros(1), np.array([0.3]),
                                        rng=np.random.default_rng(0))
    assert perturbed != base


def test_invalid_action_rejected():
    policy = fixed_logit_policy([0.0, 0.0])
    with pytest.raises(ValueError):
        log_prob_and_entropy(policy, np.zeros(1), 5)

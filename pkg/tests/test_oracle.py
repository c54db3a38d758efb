import numpy as np
import pytest

from rlwean.envs import EnvConfig, TabularModel, as_tabular
from rlwean.errors import UnsupportedError
from rlwean.oracle import (TabularPolicy, exact_policy_gradient, exact_q,
                           exact_value, expected_return, gradient_variance,
                           random_tabular_policy, sample_trajectories,
                           solve_linear, value_iteration)
from rlwean.policies import softmax
from rlwean.verify import demo_logits, demo_mdp


def uniform_policy(model):
    p = np.full((model.state_count, model.action_count),
                1.0 / model.action_count)
    return TabularPolicy(p)


def test_solve_linear_small_systems():
    a = np.array([[2.0, 1.0], [1.0, 3.0]])
    b = np.array([5.0, 10.0])
    np.testing.assert_allclose(solve_linear(a, b), np.linalg.solve(a, b),
                               atol=1e-12)
    with pytest.raises(FloatingPointError):
        solve_linear(np.array([[1.0, 2.0], [2.0, 4.0]]), np.array([1.0, 2.0]))


def test_zero_reward_mdp_has_zero_values():
    model = as_tabular(EnvConfig("chain", horizon=64))
    zero = TabularModel(model.state_count, model.action_count,
                        model.transition, np.zeros_like(model.reward),
                        model.initial_distribution, model.horizon,
                        model.terminal)
    policy = uniform_policy(model)
    np.testing.assert_allclose(exact_value(zero, policy, 0.9), 0.0, atol=1e-12)
    np.testing.assert_allclose(exact_q(zero, policy, 0.9), 0.0, atol=1e-12)


def test_self_loop_geometric_series():
    # one state, one action, r = 1, gamma = 0.5 -> V = 1 / (1 - 0.5) = 2
    model = TabularModel(1, 1, np.ones((1, 1, 1)), np.ones((1, 1)),
                         np.ones(1), horizon=10)
    v = exact_value(model, TabularPolicy(np.ones((1, 1))), 0.5)
    assert v[0] == pytest.approx(2.0, abs=1e-12)


def test_linear_solve_matches_iterative_fixed_point():
    # two independent oracles for V^pi at gamma < 1
    model = as_tabular(EnvConfig("windy-grid", wind_enabled=True,
                                 wind_strength=0.3, horizon=64))
    rng = np.random.default_rng(2)
    policy = random_tabular_policy(model.state_count, model.action_count, rng)
    gamma = 0.99
    v_solve = exact_value(model, policy, gamma)
    pi = policy.probabilities
    r_pi = np.sum(pi * model.reward, axis=1)
    p_pi = np.einsum("sa,sat->st", pi, model.transition)
    v_iter = np.zeros(model.state_count)
    for _ in range(5000):
        v_iter = r_pi + gamma * p_pi @ v_iter
    np.testing.assert_allclose(v_solve, v_iter, atol=1e-8)


def test_q_next_to_terminal_equals_immediate_reward():
    model = as_tabular(EnvConfig("chain", horizon=64))
    policy = uniform_policy(model)
    q = exact_q(model, policy, 0.99)
    # state 3, move right: lands in the terminal state, so Q = r = 1
    assert q[3, 1] == pytest.approx(1.0, abs=1e-12)
    assert np.all(q[model.terminal] == 0.0)


def test_value_iteration_chain_optimal():
    model = as_tabular(EnvConfig("chain", horizon=64))
    q_star = value_iteration(model, 0.99)
    # optimal: always right; V*(s) = 0.99^(3 - s) for s = 0..3
    for s in range(4):
        assert q_star[s].max() == pytest.approx(0.99 ** (3 - s), abs=1e-10)
        assert q_star[s].argmax() == 1


def test_expected_return_hand_enumeration():
    model = demo_mdp(horizon=2)
    logits = np.zeros((2, 2))  # uniform policy
    # from s0: a0 (r=0, stay) or a1 (r=1, go to s1); then another action.
    # E[R] = 0.25*(0+0) + 0.25*(0+1) + 0.25*(1+2) + 0.25*(1+0) = 1.25
    assert expected_return(model, logits, 2, 1.0) == pytest.approx(1.25)


def test_constant_reward_gradient_is_zero():
    model = demo_mdp(horizon=3)
    const = TabularModel(2, 2, model.transition,
                         np.full((2, 2), 0.7), model.initial_distribution,
                         model.horizon)
    grad = exact_policy_gradient(const, demo_logits(), 3, 1.0).values
    np.testing.assert_allclose(grad, 0.0, atol=1e-10)


def test_exact_gradient_matches_finite_differences():
    model = demo_mdp(horizon=3)
    logits = demo_logits()
    grad = exact_policy_gradient(model, logits, 3, 1.0).values
    h = 1e-6
    for s in range(2):
        for a in range(2):
            up = logits.copy()
            up[s, a] += h
            down = logits.copy()
            down[s, a] -= h
            fd = (expected_return(model, up, 3, 1.0)
                  - expected_return(model, down, 3, 1.0)) / (2 * h)
            assert abs(fd - grad[s, a]) <= 1e-6 * max(1.0, abs(fd))


def test_enumeration_guards():
    big = TabularModel(8, 8, np.ones((8, 8, 8)) / 8, np.zeros((8, 8)),
                       np.ones(8) / 8, horizon=2)
    with pytest.raises(UnsupportedError):
        expected_return(big, np.zeros((8, 8)), 2, 1.0)
    with pytest.raises(UnsupportedError):
        exact_policy_gradient(demo_mdp(), demo_logits(), 9, 1.0)


def test_sampled_return_matches_enumeration():
    model = demo_mdp(horizon=2)
    logits = demo_logits()
    exact = expected_return(model, logits, 2, 1.0)
    probs = softmax(logits)
    _, _, rewards, _ = sample_trajectories(model, probs, 50_000,
                                           np.random.default_rng(0))
    returns = rewards.sum(axis=1)
    se = returns.std() / np.sqrt(len(returns))
    assert abs(returns.mean() - exact) < 3 * se


def test_sampled_trajectories_respect_termination():
    model = as_tabular(EnvConfig("chain", horizon=8))
    probs = uniform_policy(model).probabilities
    states, actions, rewards, alive = sample_trajectories(
        model, probs, 2000, np.random.default_rng(1))
    # no steps recorded after an episode dies, and no reward collected either
    for i in range(2000):
        dead = ~alive[i]
        assert np.all(rewards[i][dead] == 0.0)
        if dead.any():
            first = int(np.argmax(dead))
            assert not alive[i, first:].any()


def test_monte_carlo_value_matches_exact():
    model = as_tabular(EnvConfig("chain", horizon=8))
    policy = uniform_policy(model)
    v = exact_value(model, policy, 1.0)
    _, _, rewards, _ = sample_trajectories(model, policy.probabilities,
                                           100_000, np.random.default_rng(2))
    returns = rewards.sum(axis=1)
    se = returns.std() / np.sqrt(len(returns))
    assert abs(returns.mean() - v[0]) < 3 * se


def test_exact_baseline_centers_advantages():
    # with b = V^pi, per-trajectory advantage sums average to zero
    model = as_tabular(EnvConfig("chain", horizon=8))
    policy = uniform_policy(model)
    v = exact_value(model, policy, 1.0)
    states, _, rewards, alive = sample_trajectories(
        model, policy.probabilities, 10_000, np.random.default_rng(3))
    returns = rewards.sum(axis=1)
    # first-step advantage: G(tau) - V(s_0), exactly mean-zero in expectation
    adv0 = returns - v[states[:, 0]]
    se = adv0.std() / np.sqrt(len(adv0))
    assert abs(adv0.mean()) < 3 * se


def test_gradient_variance_mean_is_baseline_invariant():
    model = demo_mdp()
    logits = demo_logits()
    exact = exact_policy_gradient(model, logits, model.horizon, 1.0).values
    v = exact_value(model, TabularPolicy(softmax(logits)), 1.0)
    for i, baseline in enumerate((None, v, np.array([5.0, -3.0]))):
        mean, trace, se = gradient_variance(model, logits, baseline, 40_000,
                                            np.random.default_rng(10 + i))
        rel = np.linalg.norm(mean - exact) / np.linalg.norm(exact)
        assert rel < 0.05
        assert trace > 0 and se > 0


def test_gradient_variance_reduction_with_exact_v():
    model = demo_mdp()
    logits = demo_logits()
    v = exact_value(model, TabularPolicy(softmax(logits)), 1.0)
    _, t_none, se_none = gradient_variance(model, logits, None, 40_000,
                                           np.random.default_rng(20))
    _, t_v, se_v = gradient_variance(model, logits, v, 40_000,
                                     np.random.default_rng(21))
    assert t_none - t_v > 3 * np.hypot(se_none, se_v)


def test_gradient_variance_input_validation():
    model = demo_mdp()
    with pytest.raises(ValueError):
        gradient_variance(model, demo_logits(), None, 1,
                          np.random.default_rng(0))
    with pytest.raises(ValueError):
        gradient_variance(model, demo_logits(), np.zeros(5), 100,
                          np.random.default_rng(0))


def test_tabular_policy_validation():
    with pytest.raises(ValueError):
        TabularPolicy(np.array([[0.5, 0.6]]))
    with pytest.raises(ValueError):
        TabularPolicy(np.array([[-0.1, 1.1]]))

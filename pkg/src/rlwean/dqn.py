"""Plain DQN used to produce Q-function prior artifacts.

Single-threaded, epsilon-greedy behavior with linear epsilon decay, uniform
replay sampling, hard target-network copies, and squared TD error. No
double/dueling/prioritized variants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs import EnvConfig, make_env
from .errors import UnsupportedError
from .nets import MlpModel, adam_update, backward, forward, init_adam, init_mlp
from .priors import PriorArtifact, save_artifact

HIDDEN_DIMS = [64, 64]
DQN_LEARNING_RATE = 1e-3


@dataclass
class DqnConfig:
    total_timesteps: int = 100_000
    buffer_capacity: int = 50_000
    batch_size: int = 128
    gamma: float = 0.99
    target_update_interval: int = 500
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.5
    learning_starts: int = 1000
    train_frequency: int = 4
    learning_rate: float = DQN_LEARNING_RATE

    def validate(self) -> None:
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ValueError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if not 0.0 < self.epsilon_decay_fraction <= 1.0:
            raise ValueError("epsilon_decay_fraction must lie in (0, 1]")


def epsilon_at(config: DqnConfig, t: int) -> float:
    """Linear decay from epsilon_start to epsilon_end over the first
    decay_fraction of training."""
    decay_steps = config.epsilon_decay_fraction * config.total_timesteps
    frac = min(t / decay_steps, 1.0)
    return config.epsilon_start + frac * (config.epsilon_end - config.epsilon_start)


class ReplayBuffer:
    """Fixed-capacity ring buffer of transitions."""

    def __init__(self, capacity: int, obs_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.terminated = np.zeros(capacity, dtype=bool)
        self._next = 0
        self.size = 0

    def add(self, obs, action, reward, next_obs, terminated) -> None:
        i = self._next
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.terminated[i] = terminated
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        """Uniform sample without replacement within the minibatch."""
        idx = rng.choice(self.size, size=min(batch_size, self.size),
                         replace=False)
        return (self.obs[idx], self.actions[idx], self.rewards[idx],
                self.next_obs[idx], self.terminated[idx])


def dqn_train(env_config: EnvConfig, config: DqnConfig, seed: int):
    """Train DQN; returns (q_network, learning curve of
    (timestep, episodic_return_mean) rows). Deterministic given seed."""
    config.validate()
    env = make_env(env_config)
    if env.action_space.kind != "discrete":
        raise UnsupportedError("DQN requires a discrete action space")
    action_count = env.action_space.count
    rng = np.random.default_rng(seed)

    q_net = init_mlp([env.obs_dim] + HIDDEN_DIMS + [action_count], rng)
    target_net = q_net.copy()
    opt = init_adam(q_net, config.learning_rate)
    buffer = ReplayBuffer(config.buffer_capacity, env.obs_dim)

    obs = env.reset(seed=seed)
    ep_return = 0.0
    recent_returns: list[float] = []
    curve = []
    report_interval = max(config.total_timesteps // 50, 1)

    for t in range(config.total_timesteps):
        if rng.random() < epsilon_at(config, t):
            action = int(rng.integers(action_count))
        else:
            action = int(np.argmax(forward(q_net, obs)))
        result = env.step(action)
        buffer.add(obs, action, result.reward, result.observation,
                   result.terminated)
        ep_return += result.reward
        if result.terminated or result.truncated:
            recent_returns.append(ep_return)
            ep_return = 0.0
            obs = env.reset()
        else:
            obs = result.observation

        if t >= config.learning_starts and t % config.train_frequency == 0:
            b_obs, b_act, b_rew, b_next, b_term = buffer.sample(
                config.batch_size, rng)
            next_q = forward(target_net, b_next).max(axis=1)
            target = b_rew + config.gamma * (1.0 - b_term) * next_q
            q = forward(q_net, b_obs)
            td_err = q[np.arange(len(b_act)), b_act] - target
            dq = np.zeros_like(q)
            dq[np.arange(len(b_act)), b_act] = td_err / len(b_act)
            grads = backward(q_net, b_obs, dq)
            adam_update(q_net, opt, grads)

        if t % config.target_update_interval == 0:
            target_net = q_net.copy()

        if (t + 1) % report_interval == 0 and recent_returns:
            window = recent_returns[-20:]
            curve.append((t + 1, float(np.mean(window))))

    return q_net, curve


def greedy_return(q_net: MlpModel, env_config: EnvConfig, seed: int = 0,
                  episodes: int = 20) -> float:
    """Mean undiscounted return of the greedy policy extracted from q_net."""
    env = make_env(env_config)
    totals = []
    for ep in range(episodes):
        obs = env.reset(seed=seed + ep)
        total, done = 0.0, False
        while not done:
            action = int(np.argmax(forward(q_net, obs)))
            result = env.step(action)
            total += result.reward
            obs = result.observation
            done = result.terminated or result.truncated
        totals.append(total)
    return float(np.mean(totals))


def export_prior(q_network: MlpModel, metadata: dict, path) -> PriorArtifact:
    """Write a kind="q" prior artifact; load->evaluate is bit-exact."""
    artifact = PriorArtifact(
        kind="q_function",
        network=q_network.copy(),
        obs_dim=q_network.input_dim,
        action_count=q_network.output_dim,
        source_env_id=metadata.get("source_env_id", ""),
        source_algorithm=metadata.get("source_algorithm", "dqn"),
        source_seed=int(metadata.get("source_seed", 0)),
        created_at=metadata.get("created_at", ""),
    )
    save_artifact(artifact, path)
    return artifact

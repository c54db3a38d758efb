"""Policy-gradient training with a weaning-weighted prior value baseline,
plus exact tabular oracles for verifying unbiasedness and variance
reduction."""

from .envs import ActionSpace, EnvConfig, StepResult, TabularModel, as_tabular, make_env
from .nets import AdamState, GradientBuffer, MlpModel, adam_update, backward, forward, init_adam, init_mlp
from .policies import CategoricalPolicy, GaussianPolicy, log_prob_and_entropy, sample_action
from .priors import (BaselineSpec, PriorArtifact, WeaningSchedule,
                     combined_baseline, load_artifact, prior_value,
                     q_to_value, save_artifact, weaning_weight)
from .ppo import RolloutBatch, TrainConfig, Trajectory, collect_rollout, compute_advantages, compute_returns, ppo_update, train
from .dqn import DqnConfig, ReplayBuffer, dqn_train, export_prior
from .oracle import (ExactGradient, TabularPolicy, exact_policy_gradient,
                     exact_q, exact_value, gradient_variance, value_iteration)
from .scenarios import ScenarioConfig, compare, default_scenario, run_scenario
from .verify import run_verification

__version__ = "0.1.0"

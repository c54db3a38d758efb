"""Experiment harness: the four prior-reuse settings as named scenarios,
multi-seed orchestration, prior selection/export, and CSV learning curves.

Setting 1: same task, Q-function prior from DQN, fixed w = 0.9.
Setting 2: changed dynamics (wind), Q-function prior, step-decay weaning.
Setting 3: changed reward (reach -> reach-fast), value prior, step decay.
Setting 4: repeat run, value prior from a previous run, step decay.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .dqn import DqnConfig, dqn_train, export_prior
from .envs import EnvConfig
from .priors import (BaselineSpec, PriorArtifact, WeaningSchedule,
                     check_compatibility, load_artifact, save_artifact)
from .ppo import TrainConfig, train

CSV_HEADER = ["timestep", "episodic_return_mean", "episodic_return_std",
              "w_t", "value_loss", "policy_loss", "entropy"]

DEFAULT_TARGET_SEEDS = tuple(range(10))
DEFAULT_SOURCE_SEEDS = (0, 1, 2)
DEFAULT_BUDGET = 100_000


def optimal_return(env_config: EnvConfig) -> float:
    """Hand-computed optimal undiscounted episodic return per environment."""
    if env_config.env_id == "chain":
        return 1.0  # four right moves, +1 at the end
    if env_config.env_id == "windy-grid":
        return 0.92  # 8 moves at -0.01 each, +1 at the goal
    if env_config.reward_variant == "reach":
        return 1.0
    return 0.96  # ~9 steps of living cost partially offset by shaping


@dataclass
class ScenarioConfig:
    setting: int
    mode: str  # "rrl" | "tbr"
    source_env: EnvConfig
    source_algorithm: str  # "dqn" | "pg"
    source_seeds: tuple
    source_total_timesteps: int
    target_env: EnvConfig
    target_seeds: tuple
    target_total_timesteps: int
    schedule: WeaningSchedule
    train_config: TrainConfig = field(default_factory=TrainConfig)

    def validate(self) -> None:
        if self.setting not in (1, 2, 3, 4):
            raise ValueError(f"setting must be 1-4, got {self.setting}")
        if self.mode not in ("rrl", "tbr"):
            raise ValueError(f"mode must be rrl or tbr, got {self.mode!r}")
        self.source_env.validate()
        self.target_env.validate()
        if self.setting == 1:
            if self.source_env != self.target_env:
                raise ValueError("setting 1 requires source env == target env")
            if self.source_algorithm != "dqn":
                raise ValueError("setting 1 requires a DQN source")
            if self.schedule.kind != "fixed":
                raise ValueError("setting 1 uses a fixed weaning schedule")
        elif self.setting == 2:
            if self.source_algorithm != "dqn":
                raise ValueError("setting 2 requires a DQN source")
            same_but_wind = replace(
                self.source_env, wind_enabled=self.target_env.wind_enabled,
                wind_strength=self.target_env.wind_strength)
            if same_but_wind != self.target_env or \
                    (self.source_env.wind_enabled,
                     self.source_env.wind_strength) == \
                    (self.target_env.wind_enabled,
                     self.target_env.wind_strength):
                raise ValueError(
                    "setting 2 requires source/target differing by wind only")
            if self.schedule.kind != "step_decay":
                raise ValueError("setting 2 uses a step_decay schedule")
        elif self.setting == 3:
            if self.source_algorithm != "pg":
                raise ValueError("setting 3 requires a policy-gradient source")
            if replace(self.source_env,
                       reward_variant=self.target_env.reward_variant) \
                    != self.target_env or \
                    self.source_env.reward_variant == \
                    self.target_env.reward_variant:
                raise ValueError("setting 3 requires source/target differing "
                                 "by reward_variant only")
        else:
            if self.source_env != self.target_env:
                raise ValueError("setting 4 requires source env == target env")
            if self.source_algorithm != "pg":
                raise ValueError("setting 4 requires a policy-gradient source")


def default_scenario(setting: int, mode: str = "rrl",
                     target_total_timesteps: int = DEFAULT_BUDGET,
                     source_total_timesteps: int = DEFAULT_BUDGET,
                     target_seeds=DEFAULT_TARGET_SEEDS,
                     source_seeds=DEFAULT_SOURCE_SEEDS,
                     schedule: WeaningSchedule | None = None) -> ScenarioConfig:
    """Desk-scale defaults for each of the four settings."""
    interval = max(target_total_timesteps // 10, 1)
    if setting == 1:
        env = EnvConfig("windy-grid", wind_enabled=False, horizon=64)
        src, tgt, algo = env, env, "dqn"
        sched = schedule or WeaningSchedule("fixed", 0.9)
    elif setting == 2:
        src = EnvConfig("windy-grid", wind_enabled=False, horizon=64)
        tgt = EnvConfig("windy-grid", wind_enabled=True, wind_strength=0.3,
                        horizon=64)
        algo = "dqn"
        sched = schedule or WeaningSchedule("step_decay", 0.5, 0.1, interval)
    elif setting == 3:
        src = EnvConfig("goal-world", reward_variant="reach", horizon=100)
        tgt = EnvConfig("goal-world", reward_variant="reach-fast", horizon=100)
        algo = "pg"
        sched = schedule or WeaningSchedule("step_decay", 0.5, 0.1, interval)
    elif setting == 4:
        env = EnvConfig("goal-world", reward_variant="reach", horizon=100)
        src, tgt, algo = env, env, "pg"
        sched = schedule or WeaningSchedule("step_decay", 0.5, 0.1, interval)
    else:
        raise ValueError(f"setting must be 1-4, got {setting}")
    config = ScenarioConfig(
        setting=setting, mode=mode, source_env=src, source_algorithm=algo,
        source_seeds=tuple(source_seeds),
        source_total_timesteps=source_total_timesteps,
        target_env=tgt, target_seeds=tuple(target_seeds),
        target_total_timesteps=target_total_timesteps, schedule=sched,
        train_config=TrainConfig(total_timesteps=target_total_timesteps))
    config.validate()
    return config


def write_curve_csv(path, rows) -> None:
    """One CSV per run; decimals at full round-trip precision."""
    with open(path, "w", newline="") as f:
        f.write(",".join(CSV_HEADER) + "\n")
        for row in rows:
            f.write(",".join(repr(v) if isinstance(v, float) else str(v)
                             for v in row) + "\n")


def read_curve_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        return [{k: float(v) for k, v in row.items()} for row in reader]


def train_source_prior(config: ScenarioConfig, artifact_path) -> PriorArtifact:
    """Train the source over its seeds and export the best-final-return
    seed's network as the prior artifact."""
    best_perf, best_net, best_seed = -np.inf, None, None
    if config.source_algorithm == "dqn":
        dqn_config = DqnConfig(total_timesteps=config.source_total_timesteps)
        for seed in config.source_seeds:
            q_net, curve = dqn_train(config.source_env, dqn_config, seed)
            perf = curve[-1][1] if curve else -np.inf
            if perf > best_perf:
                best_perf, best_net, best_seed = perf, q_net, seed
        return export_prior(best_net, {
            "source_env_id": config.source_env.env_id,
            "source_algorithm": "dqn",
            "source_seed": best_seed,
        }, artifact_path)

    train_config = replace(config.train_config,
                           total_timesteps=config.source_total_timesteps)
    for seed in config.source_seeds:
        result = train(config.source_env, train_config,
                       lambda vn: BaselineSpec(config.schedule, vn, None),
                       seed)
        tail = result.curve[-max(len(result.curve) // 10, 1):]
        perf = float(np.mean([row[1] for row in tail]))
        if perf > best_perf:
            best_perf, best_net, best_seed = perf, result.value_net, seed
    artifact = PriorArtifact(
        kind="value_function", network=best_net.copy(),
        obs_dim=best_net.input_dim,
        source_env_id=config.source_env.env_id,
        source_algorithm="pg", source_seed=best_seed)
    save_artifact(artifact, artifact_path)
    return artifact


def run_scenario(config: ScenarioConfig, out_dir,
                 prior_path=None) -> dict:
    """Train (or load) the prior, then run all target seeds; one CSV per
    (scenario, seed). Returns paths of everything written."""
    config.validate()
    os.makedirs(out_dir, exist_ok=True)
    prior = None
    artifact_path = None
    if config.mode == "rrl":
        if prior_path is not None and os.path.exists(prior_path):
            prior = load_artifact(prior_path)
            artifact_path = prior_path
        else:
            artifact_path = prior_path or os.path.join(out_dir, "prior.json")
            prior = train_source_prior(config, artifact_path)
        # Fail fast, before any target training starts.
        expected_kind = "q_function" if config.source_algorithm == "dqn" \
            else "value_function"
        if prior.kind != expected_kind:
            raise ValueError(f"scenario expects a {expected_kind} prior, "
                             f"got {prior.kind}")
        from .envs import make_env
        probe = make_env(config.target_env)
        action_count = probe.action_space.count \
            if probe.action_space.kind == "discrete" else None
        check_compatibility(prior, probe.obs_dim, action_count)

    train_config = replace(config.train_config,
                           total_timesteps=config.target_total_timesteps)
    csv_paths = {}
    for seed in config.target_seeds:
        result = train(
            config.target_env, train_config,
            lambda vn: BaselineSpec(config.schedule, vn, prior), seed)
        path = os.path.join(out_dir, f"{config.mode}_seed{seed}.csv")
        write_curve_csv(path, result.curve)
        csv_paths[seed] = path
    return {"csv_paths": csv_paths, "prior_path": artifact_path}


def steps_to_threshold(rows: list[dict], threshold: float) -> float:
    """First timestep whose episodic_return_mean >= threshold; inf if never."""
    for row in rows:
        if row["episodic_return_mean"] >= threshold:
            return row["timestep"]
    return float("inf")


def final_return(rows: list[dict], tail_fraction: float = 0.1) -> float:
    tail = rows[-max(int(len(rows) * tail_fraction), 1):]
    return float(np.mean([row["episodic_return_mean"] for row in tail]))


@dataclass
class ComparisonSummary:
    threshold: float
    per_seed: dict  # seed -> (rrl_steps, tbr_steps)
    rrl_median: float
    tbr_median: float
    rrl_wins: int
    ties: int
    tbr_wins: int
    rrl_mean_final: float
    tbr_mean_final: float


def _dir_curves(run_dir, mode: str) -> dict:
    curves = {}
    for name in sorted(os.listdir(run_dir)):
        if name.startswith(f"{mode}_seed") and name.endswith(".csv"):
            seed = int(name[len(f"{mode}_seed"):-len(".csv")])
            curves[seed] = read_curve_csv(os.path.join(run_dir, name))
    return curves


def compare(rrl_dir, tbr_dir, threshold: float) -> ComparisonSummary:
    """Median steps-to-threshold per arm plus per-seed win counts."""
    rrl = _dir_curves(rrl_dir, "rrl")
    tbr = _dir_curves(tbr_dir, "tbr")
    if set(rrl) != set(tbr) or not rrl:
        raise ValueError(f"seed sets differ or empty: rrl={sorted(rrl)} "
                         f"tbr={sorted(tbr)}")
    per_seed, wins, ties, losses = {}, 0, 0, 0
    for seed in sorted(rrl):
        a = steps_to_threshold(rrl[seed], threshold)
        b = steps_to_threshold(tbr[seed], threshold)
        per_seed[seed] = (a, b)
        if a < b:
            wins += 1
        elif a == b:
            ties += 1
        else:
            losses += 1
    rrl_steps = [v[0] for v in per_seed.values()]
    tbr_steps = [v[1] for v in per_seed.values()]
    return ComparisonSummary(
        threshold=threshold, per_seed=per_seed,
        rrl_median=float(np.median(rrl_steps)),
        tbr_median=float(np.median(tbr_steps)),
        rrl_wins=wins, ties=ties, tbr_wins=losses,
        rrl_mean_final=float(np.mean([final_return(rrl[s]) for s in rrl])),
        tbr_mean_final=float(np.mean([final_return(tbr[s]) for s in tbr])))

"""Command-line experiment harness.

Subcommands: run, compare, verify, export-prior, inspect-prior.
Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import yaml

from .dqn import DqnConfig, dqn_train, export_prior
from .envs import EnvConfig
from .ppo import TrainConfig, train
from .priors import (BaselineSpec, PriorArtifact, WeaningSchedule,
                     load_artifact, save_artifact)
from .scenarios import (ScenarioConfig, compare, default_scenario,
                        optimal_return, run_scenario)
from .verify import run_verification


def _env_from_dict(d: dict) -> EnvConfig:
    return EnvConfig(**d)


def _schedule_from_dict(d: dict) -> WeaningSchedule:
    return WeaningSchedule(**d)


def load_scenario_file(path) -> ScenarioConfig:
    with open(path) as f:
        doc = yaml.safe_load(f)
    train_config = TrainConfig(**doc.get("train", {}))
    source = doc["source"]
    target = doc["target"]
    config = ScenarioConfig(
        setting=int(doc["setting"]),
        mode=doc.get("mode", "rrl"),
        source_env=_env_from_dict(source["env"]),
        source_algorithm=source.get("algorithm", "dqn"),
        source_seeds=tuple(source.get("seeds", (0, 1, 2))),
        source_total_timesteps=int(source.get("total_timesteps", 100_000)),
        target_env=_env_from_dict(target["env"]),
        target_seeds=tuple(target.get("seeds", range(10))),
        target_total_timesteps=int(target.get("total_timesteps", 100_000)),
        schedule=_schedule_from_dict(doc["schedule"]),
        train_config=train_config,
    )
    config.validate()
    return config


def _apply_overrides(config: ScenarioConfig, args) -> ScenarioConfig:
    if args.mode:
        config = replace(config, mode=args.mode)
    if args.seed is not None:
        config = replace(config, target_seeds=(args.seed,))
    if args.seeds:
        seeds = tuple(int(s) for s in args.seeds.split(","))
        config = replace(config, target_seeds=seeds)
    if args.total_timesteps:
        config = replace(
            config, target_total_timesteps=args.total_timesteps,
            train_config=replace(config.train_config,
                                 total_timesteps=args.total_timesteps))
    schedule = config.schedule
    if args.w0 is not None:
        schedule = replace(schedule, w0=args.w0)
    if args.w_decrement is not None:
        schedule = replace(schedule, decrement=args.w_decrement)
    if args.w_interval is not None:
        schedule = replace(schedule, interval_steps=args.w_interval)
    config = replace(config, schedule=schedule)
    config.validate()
    return config


def cmd_run(args) -> int:
    if args.config:
        config = load_scenario_file(args.config)
        if args.setting and args.setting != config.setting:
            raise ValueError("--setting conflicts with the config file")
    elif args.setting:
        config = default_scenario(args.setting,
                                  mode=args.mode or "rrl")
    else:
        raise ValueError("run requires --config or --setting")
    config = _apply_overrides(config, args)
    result = run_scenario(config, args.out, prior_path=args.prior)
    for seed, path in result["csv_paths"].items():
        print(f"seed {seed}: {path}")
    if result["prior_path"]:
        print(f"prior: {result['prior_path']}")
    return 0


def cmd_compare(args) -> int:
    threshold = args.threshold
    summary = compare(args.rrl_dir, args.tbr_dir, threshold)
    print(f"threshold: {threshold}")
    print("seed,rrl_steps_to_threshold,tbr_steps_to_threshold")
    for seed, (a, b) in sorted(summary.per_seed.items()):
        print(f"{seed},{a},{b}")
    print(f"rrl median: {summary.rrl_median}")
    print(f"tbr median: {summary.tbr_median}")
    print(f"rrl wins: {summary.rrl_wins}, ties: {summary.ties}, "
          f"tbr wins: {summary.tbr_wins}")
    print(f"rrl mean final return: {summary.rrl_mean_final}")
    print(f"tbr mean final return: {summary.tbr_mean_final}")
    return 0


def cmd_verify(args) -> int:
    results = run_verification(args.level)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def cmd_export_prior(args) -> int:
    env_config = EnvConfig(env_id=args.env, wind_enabled=args.wind_enabled,
                           wind_strength=args.wind_strength,
                           reward_variant=args.reward_variant,
                           horizon=args.horizon)
    metadata = {"source_env_id": args.env, "source_seed": args.seed}
    if args.algorithm == "dqn":
        q_net, _ = dqn_train(env_config,
                             DqnConfig(total_timesteps=args.total_timesteps),
                             args.seed)
        export_prior(q_net, {**metadata, "source_algorithm": "dqn"}, args.out)
    else:
        result = train(env_config,
                       TrainConfig(total_timesteps=args.total_timesteps),
                       lambda vn: BaselineSpec(
                           WeaningSchedule("fixed", 0.0), vn, None),
                       args.seed)
        artifact = PriorArtifact(
            kind="value_function", network=result.value_net,
            obs_dim=result.value_net.input_dim,
            source_env_id=args.env, source_algorithm="pg",
            source_seed=args.seed)
        save_artifact(artifact, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_inspect_prior(args) -> int:
    prior = load_artifact(args.path)
    print(f"kind: {prior.kind}")
    print(f"obs_dim: {prior.obs_dim}")
    if prior.kind == "q_function":
        print(f"action_count: {prior.action_count}")
    print(f"layer_dims: {prior.network.layer_dims}")
    print(f"source_env_id: {prior.source_env_id}")
    print(f"source_algorithm: {prior.source_algorithm}")
    print(f"source_seed: {prior.source_seed}")
    print(f"created_at: {prior.created_at}")
    print(f"format_version: {prior.format_version}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rlwean",
        description="Policy-gradient training with weaned prior value "
                    "baselines, plus exact verification oracles.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario (source + target arms)")
    p_run.add_argument("--config", help="YAML scenario file")
    p_run.add_argument("--setting", type=int, choices=(1, 2, 3, 4))
    p_run.add_argument("--mode", choices=("rrl", "tbr"))
    p_run.add_argument("--seed", type=int, help="single target seed")
    p_run.add_argument("--seeds", help="comma-separated target seeds")
    p_run.add_argument("--out", default="runs", help="output directory")
    p_run.add_argument("--total-timesteps", type=int)
    p_run.add_argument("--w0", type=float)
    p_run.add_argument("--w-decrement", type=float)
    p_run.add_argument("--w-interval", type=int)
    p_run.add_argument("--prior", help="reuse an existing prior artifact")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="compare rrl vs tbr run dirs")
    p_cmp.add_argument("rrl_dir")
    p_cmp.add_argument("tbr_dir")
    p_cmp.add_argument("--threshold", type=float, required=True)
    p_cmp.set_defaults(func=cmd_compare)

    p_ver = sub.add_parser("verify", help="run the oracle property suite")
    p_ver.add_argument("--level", choices=("quick", "full"), default="quick")
    p_ver.set_defaults(func=cmd_verify)

    p_exp = sub.add_parser("export-prior",
                           help="train a source agent and export its prior")
    p_exp.add_argument("--env", required=True,
                       choices=("chain", "windy-grid", "goal-world"))
    p_exp.add_argument("--algorithm", choices=("dqn", "pg"), default="dqn")
    p_exp.add_argument("--seed", type=int, default=0)
    p_exp.add_argument("--total-timesteps", type=int, default=100_000)
    p_exp.add_argument("--wind-enabled", action="store_true")
    p_exp.add_argument("--wind-strength", type=float, default=0.0)
    p_exp.add_argument("--reward-variant", default="reach",
                       choices=("reach", "reach-fast"))
    p_exp.add_argument("--horizon", type=int, default=64)
    p_exp.add_argument("--out", required=True)
    p_exp.set_defaults(func=cmd_export_prior)

    p_ins = sub.add_parser("inspect-prior", help="print artifact metadata")
    p_ins.add_argument("path")
    p_ins.set_defaults(func=cmd_inspect_prior)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

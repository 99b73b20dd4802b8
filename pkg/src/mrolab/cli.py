"""Command-line entry point.

Subcommands cover the full pipeline: `gen-data` rolls the offline dataset,
`train-cql` / `train-dt` fit the two learners, `eval` compares a policy
against the rule-based baseline over a scenario grid, `sweep-cio` maps
initial to converged offsets, and `baseline-curves` dumps the early/late
response curve. Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .config import ExperimentConfig, config_hash, load_config
from .dataset import OfflineDataset, generate_dataset, scenarios_from_grid
from .evaluate import (
    baseline_curves,
    converged_cio_sweep,
    emit_curves,
    emit_sweep,
    evaluate,
    report_emit,
    sweep_mode,
)
from .policies import make_behavior_policy

BEHAVIOR_NAMES = ("rnd", "up", "down", "mro")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 by default; we use 1
        raise UsageError(message)


def _grid_scenarios(cfg: ExperimentConfig, which: str):
    g = cfg.grid
    if which == "train":
        return scenarios_from_grid(g.train_loads, g.train_velocities, g.train_seeds, cfg.scenario)
    if which == "val":
        return scenarios_from_grid(g.val_loads, g.val_velocities, g.val_seeds, cfg.scenario)
    if which == "single":
        return [cfg.scenario]
    raise UsageError(f"unknown grid {which!r} (expected train, val, or single)")


def _write_curve_csv(path: Path, curve: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        if not curve:
            fh.write("step,loss\n")
            return
        w = csv.DictWriter(fh, fieldnames=list(curve[0].keys()))
        w.writeheader()
        w.writerows(curve)


def cmd_gen_data(args) -> int:
    cfg = load_config(args.config)
    scenarios = _grid_scenarios(cfg, args.grid)
    episodes = args.episodes or cfg.data.episodes_per_cell
    seed = cfg_seed(args, 0)
    ds = generate_dataset(
        scenarios=scenarios,
        policies=list(cfg.data.policies),
        episodes_per_cell=episodes,
        sim=cfg.sim,
        reward_cfg=cfg.reward,
        weights=cfg.mro_weights,
        thresholds=cfg.mro_thresholds,
        base_seed=seed,
        meta_extra={"config_hash": config_hash(cfg), "grid": args.grid},
        progress=_progress("gen", args) if args.verbose else None,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    ds.save(out)
    print(f"wrote {len(ds)} trajectories (T={ds.horizon}) to {out}")
    return 0


def cmd_train_cql(args) -> int:
    from .agents import train_cql

    cfg = load_config(args.config)
    ds = OfflineDataset.load(args.dataset)
    if not args.no_filter:
        threshold = args.filter_rtg if args.filter_rtg is not None else cfg.cql.filter_rtg
        before = len(ds)
        ds = ds.filter_rtg(threshold, cfg.cql.filter_zero_failures_only)
        print(f"filtered dataset: {before} -> {len(ds)} trajectories (rtg >= {threshold:g})")
    p = cfg.cql
    model, curve = train_cql(
        ds,
        hidden=p.hidden,
        gamma=p.gamma,
        alpha=args.cql_alpha if args.cql_alpha is not None else p.alpha,
        learning_rate=p.learning_rate,
        batch_size=p.batch_size,
        steps=args.steps or p.steps,
        target_sync=p.target_sync,
        huber_delta=p.huber_delta,
        divergence_threshold=p.divergence_threshold,
        divergence_patience=p.divergence_patience,
        seed=cfg_seed(args, p.seed),
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out)
    _write_curve_csv(out.with_suffix(".curve.csv"), curve)
    print(f"trained value model for {len(curve)} steps; checkpoint at {out}")
    return 0


def cmd_train_dt(args) -> int:
    from .agents import train_dt

    cfg = load_config(args.config)
    ds = OfflineDataset.load(args.dataset)
    p = cfg.dt
    model, curve = train_dt(
        ds,
        context=args.context_k or p.context,
        embed=p.embed,
        blocks=p.blocks,
        learning_rate=p.learning_rate,
        batch_size=p.batch_size,
        steps=args.steps or p.steps,
        seed=cfg_seed(args, p.seed),
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out)
    _write_curve_csv(out.with_suffix(".curve.csv"), curve)
    print(f"trained sequence model (K={model.cfg.context}) for {len(curve)} steps; checkpoint at {out}")
    return 0


def _policy_factory(name: str, args, cfg: ExperimentConfig):
    name = name.lower()
    if name in BEHAVIOR_NAMES:
        return lambda: make_behavior_policy(name, cfg.mro_weights, cfg.mro_thresholds)
    if name == "cql":
        from .agents import CqlPolicy, QModel

        if not args.checkpoint:
            raise UsageError("--checkpoint is required for the cql policy")
        model = QModel.load(args.checkpoint)
        return lambda: CqlPolicy(model)
    if name == "dt":
        from .agents import DTModel, DTPolicy

        if not args.checkpoint:
            raise UsageError("--checkpoint is required for the dt policy")
        model = DTModel.load(args.checkpoint)
        target = (
            args.target_rtg
            if args.target_rtg is not None
            else model.cfg.rtg_scale * cfg.dt.target_rtg_multiplier
        )
        return lambda: DTPolicy(model, target)
    raise UsageError(f"unknown policy {name!r}")


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    scenarios = _grid_scenarios(cfg, args.grid)
    factory = _policy_factory(args.policy, args, cfg)
    report = evaluate(
        candidates={args.policy.lower(): factory},
        scenarios=scenarios,
        episodes_per_cell=args.episodes or cfg.grid.episodes_per_cell,
        sim=cfg.sim,
        reward_cfg=cfg.reward,
        weights=cfg.mro_weights,
        thresholds=cfg.mro_thresholds,
        base_seed=cfg_seed(args, 0),
        progress=_progress("eval", args) if args.verbose else None,
    )
    files = report_emit(report, args.out)
    for g in report.groups:
        if g.group == "all":
            gain = "" if g.rgain_pct is None else f"  rGain {g.rgain_pct:+.1f}%"
            print(f"{g.policy:>6}  mean {g.mean:.2f}  std {g.std:.2f}  max {g.max:.2f}{gain}")
    print("wrote " + ", ".join(str(f) for f in files))
    return 0


def cmd_sweep_cio(args) -> int:
    cfg = load_config(args.config)
    factory = _policy_factory(args.policy, args, cfg)
    scenario = cfg.scenario.with_(seed=cfg_seed(args, cfg.scenario.seed))
    sweep = converged_cio_sweep(factory, scenario, cfg.sim, cfg.reward)
    path = emit_sweep(sweep, args.out, name=f"cio_sweep_{args.policy.lower()}.csv")
    finals = sorted(set(sweep.values()))
    print(f"finals {finals} (mode {sweep_mode(sweep)}); wrote {path}")
    return 0


def cmd_baseline_curves(args) -> int:
    cfg = load_config(args.config)
    curves = baseline_curves(
        cfg.scenario,
        cfg.sim,
        cfg.mro_weights,
        seeds=tuple(range(1, 1 + args.curve_seeds)),
        windows=args.windows,
    )
    path = emit_curves(curves, args.out)
    print(f"wrote {path}")
    return 0


def cfg_seed(args, default: int) -> int:
    return default if args.seed is None else args.seed


def _progress(tag, args):
    def cb(item):
        print(f"[{tag}] {item}", file=sys.stderr)

    return cb


def build_parser() -> _Parser:
    parser = _Parser(prog="mrolab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="key=value experiment configuration file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", required=out_required)
        p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("gen-data", help="generate the offline trajectory dataset")
    common(p)
    p.add_argument("--grid", default="train", help="train, val, or single")
    p.add_argument("--episodes", type=int, default=None, help="episodes per grid cell")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train-cql", help="train the conservative value model")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--cql-alpha", type=float, default=None)
    p.add_argument("--filter-rtg", type=float, default=None)
    p.add_argument("--no-filter", action="store_true", help="train on the unfiltered dataset")
    p.add_argument("--steps", type=int, default=None)
    p.set_defaults(func=cmd_train_cql)

    p = sub.add_parser("train-dt", help="train the return-conditioned sequence model")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--context-k", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.set_defaults(func=cmd_train_dt)

    p = sub.add_parser("eval", help="evaluate a policy (baseline always included)")
    common(p)
    p.add_argument("--policy", required=True, help="rnd, up, down, mro, cql, or dt")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--grid", default="train", help="train, val, or single")
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--target-rtg", type=float, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-cio", help="converged offset per initial offset")
    common(p)
    p.add_argument("--policy", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--target-rtg", type=float, default=None)
    p.set_defaults(func=cmd_sweep_cio)

    p = sub.add_parser("baseline-curves", help="early/late issue sums per offset")
    common(p)
    p.add_argument("--curve-seeds", type=int, default=4)
    p.add_argument("--windows", type=int, default=20)
    p.set_defaults(func=cmd_baseline_curves)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (KeyboardInterrupt,):
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

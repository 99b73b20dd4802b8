"""Policy evaluation over scenario grids and plot-ready report emission.

Candidates and the rule-based baseline run the same episode slots (same
world seeds, same initial offsets), so relative gains are paired
comparisons. Reports aggregate per policy and per (load, velocity) group
plus an "all" row; emission produces CSV tables, a JSON dump that reloads
to an equal report, return histograms, and the early/late-versus-offset
curve data.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset import episode_seeds
from .mro import IssueWeights, MroThresholds, early_sum, late_sum
from .policies import Policy, Trajectory, make_behavior_policy, run_episode, scenario_id
from .rewards import RewardConfig
from .sim import ScenarioConfig, SimParams, World

BASELINE = "mro"


@dataclass(frozen=True)
class EpisodeRow:
    policy: str
    scenario_id: str
    load: float
    velocity: float
    scenario_seed: int
    episode: int
    world_seed: int
    init_cio: int
    final_cio: int
    rtg: float
    empty_windows: int


@dataclass
class GroupStats:
    policy: str
    group: str
    n: int
    mean: float
    std: float
    max: float
    final_cios: str
    rgain_pct: float | None


@dataclass
class EvalReport:
    baseline: str
    rows: list[EpisodeRow]
    groups: list[GroupStats] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "baseline": self.baseline,
            "rows": [asdict(r) for r in self.rows],
            "groups": [asdict(g) for g in self.groups],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            baseline=d["baseline"],
            rows=[EpisodeRow(**r) for r in d["rows"]],
            groups=[GroupStats(**g) for g in d["groups"]],
        )

    def mean_rtg(self, policy: str, group: str = "all") -> float:
        for g in self.groups:
            if g.policy == policy and g.group == group:
                return g.mean
        raise KeyError(f"no aggregate for ({policy}, {group})")

    def rgain(self, policy: str, group: str = "all") -> float | None:
        for g in self.groups:
            if g.policy == policy and g.group == group:
                return g.rgain_pct
        raise KeyError(f"no aggregate for ({policy}, {group})")


def relative_gain_pct(mean_policy: float, mean_baseline: float) -> float:
    """100 * (policy - baseline) / baseline."""
    if mean_baseline == 0:
        raise ZeroDivisionError("baseline mean return is zero")
    return 100.0 * (mean_policy - mean_baseline) / mean_baseline


def _cio_summary(finals: list[int]) -> str:
    distinct = sorted(set(finals))
    if len(distinct) <= 3:
        return ",".join(str(c) for c in distinct)
    return "-"


def aggregate_rows(rows: list[EpisodeRow], baseline: str) -> list[GroupStats]:
    groups: dict[tuple[str, str], list[EpisodeRow]] = {}
    for r in rows:
        groups.setdefault((r.policy, "all"), []).append(r)
        groups.setdefault((r.policy, f"{r.load:g}/{r.velocity:g}"), []).append(r)
    means = {key: float(np.mean([r.rtg for r in rs])) for key, rs in groups.items()}
    out = []
    for (policy, group), rs in sorted(groups.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        base_mean = means.get((baseline, group))
        rgain = None
        if base_mean is not None and policy != baseline and base_mean != 0:
            rgain = relative_gain_pct(means[(policy, group)], base_mean)
        out.append(
            GroupStats(
                policy=policy,
                group=group,
                n=len(rs),
                mean=means[(policy, group)],
                std=float(np.std([r.rtg for r in rs], ddof=0)),
                max=float(np.max([r.rtg for r in rs])),
                final_cios=_cio_summary([r.final_cio for r in rs]),
                rgain_pct=rgain,
            )
        )
    return out


def _episode_row(traj: Trajectory, policy_name: str, sc: ScenarioConfig, episode: int,
                 world_seed: int, init_cio: int) -> EpisodeRow:
    return EpisodeRow(
        policy=policy_name,
        scenario_id=scenario_id(sc),
        load=sc.load,
        velocity=sc.velocity,
        scenario_seed=sc.seed,
        episode=episode,
        world_seed=world_seed,
        init_cio=init_cio,
        final_cio=traj.final_cio(),
        rtg=traj.rtg[0],
        empty_windows=sum(tr.empty_window for tr in traj.transitions),
    )


def evaluate(
    candidates: dict[str, "callable"],
    scenarios: list[ScenarioConfig],
    episodes_per_cell: int,
    sim: SimParams,
    reward_cfg: RewardConfig,
    weights: IssueWeights | None = None,
    thresholds: MroThresholds | None = None,
    base_seed: int = 0,
    progress=None,
) -> EvalReport:
    """Run candidate policy factories (plus the baseline) over the grid.

    `candidates` maps policy name to a zero-argument factory returning a
    fresh `Policy`. The rule-based baseline is always evaluated.
    """
    if not scenarios:
        raise ValueError("empty scenario grid")
    pols = dict(candidates)
    if BASELINE not in pols:
        pols[BASELINE] = lambda: make_behavior_policy("mro", weights, thresholds)
    rows: list[EpisodeRow] = []
    for si, sc in enumerate(scenarios):
        for ep in range(episodes_per_cell):
            world_seed, init_cio = episode_seeds(base_seed, si, ep)
            for name, factory in pols.items():
                traj = run_episode(
                    scenario=sc,
                    sim=sim,
                    policy=factory(),
                    reward_cfg=reward_cfg,
                    init_cio=init_cio,
                    world_seed=world_seed,
                )
                rows.append(_episode_row(traj, name, sc, ep, world_seed, init_cio))
                if progress is not None:
                    progress(rows[-1])
    report = EvalReport(baseline=BASELINE, rows=rows)
    report.groups = aggregate_rows(rows, BASELINE)
    return report


def converged_cio_sweep(
    policy_factory,
    scenario: ScenarioConfig,
    sim: SimParams,
    reward_cfg: RewardConfig,
    horizon: int | None = None,
) -> dict[int, int]:
    """Final offset after one episode from every initial offset.

    All 17 episodes replay the same traffic (same world seed), isolating
    the effect of the starting point.
    """
    out: dict[int, int] = {}
    for init in range(-8, 9):
        traj = run_episode(
            scenario=scenario,
            sim=sim,
            policy=policy_factory(),
            reward_cfg=reward_cfg,
            init_cio=init,
            world_seed=scenario.seed,
            horizon=horizon,
        )
        out[init] = traj.final_cio()
    return out


def sweep_mode(sweep: dict[int, int]) -> int:
    counts = Counter(sweep.values())
    top = max(counts.values())
    return min(c for c, k in counts.items() if k == top)


def context_sweep(
    dataset,
    contexts: tuple,
    scenarios: list[ScenarioConfig],
    episodes_per_cell: int,
    sim: SimParams,
    reward_cfg: RewardConfig,
    weights: IssueWeights | None = None,
    thresholds: MroThresholds | None = None,
    base_seed: int = 0,
    train_kwargs: dict | None = None,
) -> list[dict]:
    """Train one sequence model per context size and evaluate each.

    Returns one row per K with the trained model, its mean return, and the
    paired gain over the baseline.
    """
    from .agents import DTPolicy, train_dt

    rows = []
    for k in contexts:
        model, _ = train_dt(dataset, context=int(k), **(train_kwargs or {}))
        target = model.cfg.rtg_scale
        report = evaluate(
            candidates={f"dt-k{k}": lambda m=model, t=target: DTPolicy(m, t)},
            scenarios=scenarios,
            episodes_per_cell=episodes_per_cell,
            sim=sim,
            reward_cfg=reward_cfg,
            weights=weights,
            thresholds=thresholds,
            base_seed=base_seed,
        )
        rows.append(
            {
                "context": int(k),
                "model": model,
                "mean": report.mean_rtg(f"dt-k{k}"),
                "rgain_pct": report.rgain(f"dt-k{k}"),
                "report": report,
            }
        )
    return rows


def baseline_curves(
    scenario: ScenarioConfig,
    sim: SimParams,
    weights: IssueWeights,
    seeds: tuple = (1, 2, 3, 4),
    windows: int = 20,
) -> list[dict]:
    """Mean early/late sums and event totals per offset (curve data)."""
    out = []
    for cio in range(-8, 9):
        es, ls, ns = [], [], []
        for seed in seeds:
            world = World(scenario.with_(seed=int(seed)), sim)
            for _ in range(windows):
                c, _ = world.run_window(cio)
                es.append(early_sum(c, weights))
                ls.append(late_sum(c, weights))
                ns.append(c.n_all)
        out.append(
            {
                "cio": cio,
                "e_sum_mean": float(np.mean(es)),
                "l_sum_mean": float(np.mean(ls)),
                "n_all_mean": float(np.mean(ns)),
            }
        )
    return out


# -- emission ---------------------------------------------------------------------


def rtg_histogram(rows: list[EpisodeRow], n_bins: int = 20) -> dict[str, list]:
    """Shared-range per-policy bin counts; counts sum to the episode count."""
    if not rows:
        return {"edges": [], "policies": {}}
    values = np.array([r.rtg for r in rows])
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, n_bins + 1)
    per_policy: dict[str, list] = {}
    for policy in sorted({r.policy for r in rows}):
        vals = np.array([r.rtg for r in rows if r.policy == policy])
        counts, _ = np.histogram(vals, bins=edges)
        per_policy[policy] = counts.tolist()
    return {"edges": edges.tolist(), "policies": per_policy}


def report_emit(report: EvalReport, out_dir: str | Path, formats: tuple = ("csv", "json")) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if "csv" in formats:
        p = out / "summary.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["policy", "group", "n", "mean", "std", "max", "final_cios", "rgain_pct"])
            for g in report.groups:
                w.writerow(
                    [
                        g.policy,
                        g.group,
                        g.n,
                        f"{g.mean:.6f}",
                        f"{g.std:.6f}",
                        f"{g.max:.6f}",
                        g.final_cios,
                        "" if g.rgain_pct is None else f"{g.rgain_pct:+.1f}",
                    ]
                )
        written.append(p)
        p = out / "episodes.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            header = [
                "policy",
                "scenario_id",
                "load",
                "velocity",
                "scenario_seed",
                "episode",
                "world_seed",
                "init_cio",
                "final_cio",
                "rtg",
                "empty_windows",
            ]
            w.writerow(header)
            for r in report.rows:
                w.writerow([getattr(r, h) for h in header])
        written.append(p)
        p = out / "rtg_hist.csv"
        hist = rtg_histogram(report.rows)
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["policy", "bin_left", "bin_right", "count"])
            for policy, counts in hist["policies"].items():
                for i, count in enumerate(counts):
                    w.writerow([policy, hist["edges"][i], hist["edges"][i + 1], count])
        written.append(p)
    if "json" in formats:
        p = out / "report.json"
        p.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n")
        written.append(p)
    return written


def emit_curves(curves: list[dict], out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p = out / "baseline_curves.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cio", "e_sum_mean", "l_sum_mean", "n_all_mean"])
        for row in curves:
            w.writerow([row["cio"], row["e_sum_mean"], row["l_sum_mean"], row["n_all_mean"]])
    return p


def emit_sweep(sweep: dict[int, int], out_dir: str | Path, name: str = "cio_sweep.csv") -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p = out / name
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["init_cio", "final_cio"])
        for init in sorted(sweep):
            w.writerow([init, sweep[init]])
    return p

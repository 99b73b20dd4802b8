"""Offline trajectory datasets: generation, filtering, serialization.

Datasets are JSON-lines files: one metadata header record, then one
trajectory per line. Counters are stored raw; the learned-state transform
(offset scaled to [-1, 1], counts as per-event rates, total count against a
dataset-level reference) and the per-feature standardization statistics are
computed from the stored trajectories and carried in the header, so a
file is a self-contained training input.

Rewards are a pure function of the stored counters, so one simulated
dataset can be re-scored under any reward variant without re-running the
radio world.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .events import HoCounters
from .mro import IssueWeights, MroThresholds
from .policies import Trajectory, Transition, make_behavior_policy, run_episode
from .rewards import RewardConfig, reward_or_empty, rtg as rtg_suffix
from .sim import ScenarioConfig, SimParams

DATASET_VERSION = 1
N_FEATURES = 12


class OverFilteredError(ValueError):
    """Filtering removed every trajectory."""


def feature_vector(c: HoCounters, n_all_ref: float) -> np.ndarray:
    """Raw counters -> learned-state features (rates + scaled totals)."""
    n = max(c.n_all, 1)
    return np.array(
        [
            c.cio / 8.0,
            c.n_suc / n,
            c.n_fte / n,
            c.n_ftl / n,
            c.n_f / n,
            c.n_pp / n,
            c.n_se / n,
            c.n_sl / n,
            c.n_stf / n,
            c.n_wc / n,
            c.n_rc / n,
            c.n_all / max(n_all_ref, 1.0),
        ],
        dtype=np.float64,
    )


@dataclass(frozen=True)
class Normalization:
    mean: tuple
    scale: tuple
    n_all_ref: float

    def transform(self, c: HoCounters) -> np.ndarray:
        f = feature_vector(c, self.n_all_ref)
        return (f - np.asarray(self.mean)) / np.asarray(self.scale)

    def transform_many(self, counters: list[HoCounters]) -> np.ndarray:
        f = np.stack([feature_vector(c, self.n_all_ref) for c in counters])
        return (f - np.asarray(self.mean)) / np.asarray(self.scale)

    def to_dict(self) -> dict:
        return {"mean": list(self.mean), "scale": list(self.scale), "n_all_ref": self.n_all_ref}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalization":
        return cls(mean=tuple(d["mean"]), scale=tuple(d["scale"]), n_all_ref=float(d["n_all_ref"]))


def compute_normalization(trajectories: list[Trajectory]) -> Normalization:
    """Per-feature mean/scale over every observed window of the dataset."""
    counters: list[HoCounters] = []
    for traj in trajectories:
        if traj.transitions:
            counters.append(traj.transitions[0].state)
        counters.extend(tr.next_state for tr in traj.transitions)
    if not counters:
        raise ValueError("cannot normalize an empty dataset")
    n_all_ref = float(np.mean([c.n_all for c in counters]))
    raw = np.stack([feature_vector(c, n_all_ref) for c in counters])
    mean = raw.mean(axis=0)
    scale = np.maximum(raw.std(axis=0), 1e-6)
    return Normalization(mean=tuple(mean.tolist()), scale=tuple(scale.tolist()), n_all_ref=n_all_ref)


class OfflineDataset:
    def __init__(self, trajectories: list[Trajectory], meta: dict, normalization: Normalization | None = None):
        if not trajectories:
            raise ValueError("dataset needs at least one trajectory")
        horizons = {t.horizon for t in trajectories}
        if len(horizons) != 1:
            raise ValueError(f"mixed trajectory horizons: {sorted(horizons)}")
        self.trajectories = list(trajectories)
        self.meta = dict(meta)
        self.meta["T"] = horizons.pop()
        self.normalization = normalization or compute_normalization(self.trajectories)

    @property
    def horizon(self) -> int:
        return self.meta["T"]

    def __len__(self) -> int:
        return len(self.trajectories)

    def max_rtg(self) -> float:
        return max(t.rtg[0] for t in self.trajectories)

    def returns(self) -> np.ndarray:
        return np.array([t.rtg[0] for t in self.trajectories])

    # -- training views ---------------------------------------------------------

    def transition_arrays(self) -> dict[str, np.ndarray]:
        """Flattened normalized transitions for value learning."""
        states, actions, rewards, next_states, terminal = [], [], [], [], []
        for traj in self.trajectories:
            for tr in traj.transitions:
                states.append(tr.state)
                actions.append(tr.action + 1)
                rewards.append(tr.reward)
                next_states.append(tr.next_state)
                terminal.append(tr.terminal)
        return {
            "states": self.normalization.transform_many(states),
            "actions": np.array(actions, dtype=np.int64),
            "rewards": np.array(rewards, dtype=np.float64),
            "next_states": self.normalization.transform_many(next_states),
            "terminal": np.array(terminal, dtype=bool),
        }

    def sequence_arrays(self) -> dict[str, np.ndarray]:
        """Per-trajectory padded-free arrays for sequence modeling."""
        n, T = len(self.trajectories), self.horizon
        states = np.zeros((n, T, N_FEATURES))
        actions = np.zeros((n, T), dtype=np.int64)
        rtgs = np.zeros((n, T))
        for i, traj in enumerate(self.trajectories):
            states[i] = self.normalization.transform_many([tr.state for tr in traj.transitions])
            actions[i] = np.array([tr.action + 1 for tr in traj.transitions])
            rtgs[i] = np.array(traj.rtg)
        return {"states": states, "actions": actions, "rtg": rtgs}

    # -- reward re-scoring and filtering ------------------------------------------

    def with_reward(self, reward_cfg: RewardConfig) -> "OfflineDataset":
        """Re-score all transitions under another reward; counters are reused."""
        out = []
        for traj in self.trajectories:
            transitions = []
            for tr in traj.transitions:
                r, empty = reward_or_empty(tr.next_state, reward_cfg)
                transitions.append(
                    Transition(tr.state, tr.action, r, tr.next_state, empty, tr.terminal)
                )
            out.append(
                Trajectory(
                    scenario_id=traj.scenario_id,
                    policy=traj.policy,
                    init_cio=traj.init_cio,
                    episode_seed=traj.episode_seed,
                    transitions=transitions,
                    rtg=rtg_suffix([t.reward for t in transitions]),
                    scenario=traj.scenario,
                )
            )
        meta = dict(self.meta)
        meta["reward"] = reward_cfg.to_dict()
        return OfflineDataset(out, meta)

    def filter_rtg(self, rtg_threshold: float, zero_failures_only: bool = True) -> "OfflineDataset":
        """Drop high-return trajectories (optionally only failure-free ones).

        Removes falsely optimistic episodes whose return is an artifact of
        observing no failures at all; statistics are recomputed on the
        survivors.
        """
        kept = []
        for traj in self.trajectories:
            high = traj.rtg[0] >= rtg_threshold
            if high and (not zero_failures_only or traj.total_failures() == 0):
                continue
            kept.append(traj)
        if not kept:
            raise OverFilteredError(f"no trajectories below rtg {rtg_threshold}")
        meta = dict(self.meta)
        meta["filter"] = {"rtg_threshold": rtg_threshold, "zero_failures_only": zero_failures_only}
        return OfflineDataset(kept, meta)

    # -- serialization -------------------------------------------------------------

    def save(self, path: str | Path) -> None:
        header = {
            "kind": "meta",
            "version": DATASET_VERSION,
            "normalization": self.normalization.to_dict(),
            **self.meta,
        }
        with open(path, "w") as fh:
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for traj in self.trajectories:
                fh.write(json.dumps({"kind": "trajectory", **traj.to_dict()}, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "OfflineDataset":
        trajectories: list[Trajectory] = []
        meta: dict = {}
        normalization = None
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                doc = json.loads(line)
                kind = doc.pop("kind", None)
                if kind == "meta":
                    if doc.get("version") != DATASET_VERSION:
                        raise ValueError(f"unsupported dataset version {doc.get('version')}")
                    normalization = Normalization.from_dict(doc.pop("normalization"))
                    doc.pop("version")
                    meta = doc
                elif kind == "trajectory":
                    trajectories.append(Trajectory.from_dict(doc))
                else:
                    raise ValueError(f"unknown record kind {kind!r}")
        if normalization is None:
            raise ValueError("dataset file has no metadata header")
        return cls(trajectories, meta, normalization)


def scenarios_from_grid(
    loads, velocities, seeds, base: ScenarioConfig
) -> list[ScenarioConfig]:
    out = []
    for load in loads:
        for velocity in velocities:
            for seed in seeds:
                out.append(base.with_(load=load, velocity=velocity, seed=seed))
    return out


def episode_seeds(base_seed: int, scenario_index: int, episode: int) -> tuple[int, int]:
    """(world seed, initial offset) shared by every policy of one episode slot."""
    ss = np.random.SeedSequence([int(base_seed), int(scenario_index), int(episode)])
    world_seed = int(ss.generate_state(1)[0])
    init_cio = int(np.random.default_rng(ss.spawn(1)[0]).integers(-8, 9))
    return world_seed, init_cio


def generate_dataset(
    scenarios: list[ScenarioConfig],
    policies: list[str],
    episodes_per_cell: int,
    sim: SimParams,
    reward_cfg: RewardConfig,
    weights: IssueWeights | None = None,
    thresholds: MroThresholds | None = None,
    base_seed: int = 0,
    meta_extra: dict | None = None,
    progress=None,
) -> OfflineDataset:
    """Roll every (scenario, policy, episode) cell into one dataset.

    Episode world seeds and initial offsets depend on (scenario, episode)
    only, so different behavior policies face identical traffic.
    """
    if episodes_per_cell < 1:
        raise ValueError("episodes_per_cell must be at least 1")
    horizons = {sc.horizon for sc in scenarios}
    if len(horizons) != 1:
        raise ValueError("all scenarios must share one horizon")
    trajectories = []
    for si, sc in enumerate(scenarios):
        for ep in range(episodes_per_cell):
            world_seed, init_cio = episode_seeds(base_seed, si, ep)
            for pi, kind in enumerate(policies):
                policy = make_behavior_policy(kind, weights, thresholds)
                traj = run_episode(
                    scenario=sc,
                    sim=sim,
                    policy=policy,
                    reward_cfg=reward_cfg,
                    init_cio=init_cio,
                    world_seed=world_seed,
                    policy_seed=int(
                        np.random.SeedSequence([base_seed, si, ep, 1000 + pi]).generate_state(1)[0]
                    ),
                )
                trajectories.append(traj)
                if progress is not None:
                    progress(traj)
    meta = {
        "version_note": "window counters are raw; see normalization for the learned transform",
        "base_seed": base_seed,
        "policies": list(policies),
        "episodes_per_cell": episodes_per_cell,
        "reward": reward_cfg.to_dict(),
        **(meta_extra or {}),
    }
    return OfflineDataset(trajectories, meta)

"""Offset-tuning policies and the episode rollout loop.

A policy maps the current window counters to an applied offset step in
{-1, 0, +1}; the step returned is already clipped so the offset stays in
range. Stateful policies (the sequence model) additionally observe the
realized reward after every window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .events import HoCounters
from .mro import IssueWeights, MroThresholds, clip_action, mro_decide
from .rewards import RewardConfig, reward_or_empty, rtg as rtg_suffix
from .sim import ScenarioConfig, SimParams, World

BEHAVIOR_KINDS = ("rnd", "up", "down", "mro")


class Policy:
    """Base: stateless unless overridden."""

    name = "policy"

    def reset(self, rng: np.random.Generator) -> None:
        pass

    def act(self, counters: HoCounters) -> int:
        raise NotImplementedError

    def observe(self, reward: float) -> None:
        pass


class RandomPolicy(Policy):
    name = "rnd"

    def reset(self, rng):
        self._rng = rng

    def act(self, counters):
        return clip_action(counters.cio, int(self._rng.integers(-1, 2)))


class ConstantPolicy(Policy):
    def __init__(self, step: int, name: str):
        self.step = int(step)
        self.name = name

    def act(self, counters):
        return clip_action(counters.cio, self.step)


class MroPolicy(Policy):
    name = "mro"

    def __init__(self, weights: IssueWeights, thresholds: MroThresholds):
        self.weights = weights
        self.thresholds = thresholds

    def act(self, counters):
        return mro_decide(counters, self.weights, self.thresholds)


def make_behavior_policy(
    kind: str,
    weights: IssueWeights | None = None,
    thresholds: MroThresholds | None = None,
) -> Policy:
    kind = kind.lower()
    if kind == "rnd":
        return RandomPolicy()
    if kind == "up":
        return ConstantPolicy(+1, "up")
    if kind == "down":
        return ConstantPolicy(-1, "down")
    if kind == "mro":
        return MroPolicy(weights or IssueWeights(), thresholds or MroThresholds())
    raise ValueError(f"unknown behavior policy {kind!r}; expected one of {BEHAVIOR_KINDS}")


@dataclass(frozen=True)
class Transition:
    state: HoCounters
    action: int
    reward: float
    next_state: HoCounters
    empty_window: bool = False
    terminal: bool = False

    def __post_init__(self):
        applied = clip_action(self.state.cio, self.action)
        if applied != self.action:
            raise ValueError(f"action {self.action} leaves the offset range from {self.state.cio}")
        if self.next_state.cio != self.state.cio + self.action:
            raise ValueError("next_state offset does not match state offset + action")

    def to_dict(self) -> dict:
        return {
            "state": self.state.to_dict(),
            "action": self.action,
            "reward": self.reward,
            "next_state": self.next_state.to_dict(),
            "empty_window": self.empty_window,
            "terminal": self.terminal,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Transition":
        return cls(
            state=HoCounters.from_dict(d["state"]),
            action=int(d["action"]),
            reward=float(d["reward"]),
            next_state=HoCounters.from_dict(d["next_state"]),
            empty_window=bool(d.get("empty_window", False)),
            terminal=bool(d.get("terminal", False)),
        )


@dataclass
class Trajectory:
    """Fixed-horizon episode: T transitions plus reward-to-go annotations."""

    scenario_id: str
    policy: str
    init_cio: int
    episode_seed: int
    transitions: list[Transition]
    rtg: list[float]
    scenario: dict | None = None

    def __post_init__(self):
        if len(self.rtg) != len(self.transitions):
            raise ValueError("rtg must annotate every transition")

    @property
    def horizon(self) -> int:
        return len(self.transitions)

    def rewards(self) -> list[float]:
        return [tr.reward for tr in self.transitions]

    def total_failures(self) -> int:
        n = self.transitions[0].state.n_f if self.transitions else 0
        return n + sum(tr.next_state.n_f for tr in self.transitions)

    def final_cio(self) -> int:
        return self.transitions[-1].next_state.cio if self.transitions else self.init_cio

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "policy": self.policy,
            "init_cio": self.init_cio,
            "episode_seed": self.episode_seed,
            "scenario": self.scenario,
            "transitions": [tr.to_dict() for tr in self.transitions],
            "rtg": self.rtg,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        return cls(
            scenario_id=d["scenario_id"],
            policy=d["policy"],
            init_cio=int(d["init_cio"]),
            episode_seed=int(d["episode_seed"]),
            transitions=[Transition.from_dict(x) for x in d["transitions"]],
            rtg=[float(x) for x in d["rtg"]],
            scenario=d.get("scenario"),
        )


def scenario_id(sc: ScenarioConfig) -> str:
    return f"l{sc.load:g}-v{sc.velocity:g}-s{sc.seed}"


def run_episode(
    scenario: ScenarioConfig,
    sim: SimParams,
    policy: Policy,
    reward_cfg: RewardConfig,
    init_cio: int,
    world_seed,
    policy_seed=None,
    horizon: int | None = None,
) -> Trajectory:
    """Roll one fixed-horizon episode.

    The first window (at the initial offset) only observes the starting
    state; the T decision steps then earn the rewards summed by the
    reward-to-go annotation.
    """
    T = scenario.horizon if horizon is None else horizon
    world = World(scenario, sim, seed=world_seed)
    policy.reset(np.random.default_rng(policy_seed if policy_seed is not None else world_seed))
    state, _ = world.run_window(init_cio)
    cio = init_cio
    transitions: list[Transition] = []
    for t in range(T):
        action = policy.act(state)
        cio = cio + action
        nxt, _ = world.run_window(cio)
        r, empty = reward_or_empty(nxt, reward_cfg)
        policy.observe(r)
        transitions.append(
            Transition(state, action, r, nxt, empty_window=empty, terminal=(t == T - 1))
        )
        state = nxt
    return Trajectory(
        scenario_id=scenario_id(scenario),
        policy=policy.name,
        init_cio=init_cio,
        episode_seed=int(world_seed) if np.isscalar(world_seed) else -1,
        transitions=transitions,
        rtg=rtg_suffix([tr.reward for tr in transitions]),
        scenario={"load": scenario.load, "velocity": scenario.velocity, "seed": scenario.seed},
    )

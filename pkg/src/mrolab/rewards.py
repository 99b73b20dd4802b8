"""Reward shaping over window counters.

The per-window cost is the weighted rate of early and late issues; the
reward is exp(C - cost), optionally penalized by the magnitude of the
applied offset or by the raw event count. A window with zero handover
events has no observable issues; it is scored at zero cost and flagged so
downstream consumers can tell it apart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .events import HoCounters
from .mro import InsufficientDataError, IssueWeights, early_sum, late_sum

REWARD_VARIANTS = ("plain", "cio_penalty", "event_penalty")


@dataclass(frozen=True)
class RewardConfig:
    w_early: float = 1.0
    w_late: float = 1.0
    calibration: float = 1.0
    variant: str = "plain"
    lambda_cio: float = 0.05
    cio_exponent: float = 1.0
    lambda_event: float = 0.01
    issue_weights: IssueWeights = IssueWeights()

    def __post_init__(self):
        if self.variant not in REWARD_VARIANTS:
            raise ValueError(f"unknown reward variant {self.variant!r}")
        if self.w_early < 0 or self.w_late < 0:
            raise ValueError("rate weights must be non-negative")
        if self.lambda_cio < 0 or self.lambda_event < 0:
            raise ValueError("penalty coefficients must be non-negative")
        if self.variant == "cio_penalty" and self.cio_exponent < 1.0:
            raise ValueError("cio_exponent must be >= 1")

    def to_dict(self) -> dict:
        return {
            "w_early": self.w_early,
            "w_late": self.w_late,
            "calibration": self.calibration,
            "variant": self.variant,
            "lambda_cio": self.lambda_cio,
            "cio_exponent": self.cio_exponent,
            "lambda_event": self.lambda_event,
            "issue_weights": [
                self.issue_weights.w_f,
                self.issue_weights.w_w,
                self.issue_weights.w_p,
                self.issue_weights.w_ss,
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RewardConfig":
        d = dict(d)
        iw = d.pop("issue_weights", None)
        if iw is not None:
            d["issue_weights"] = IssueWeights(*iw)
        return cls(**d)


def cost(c: HoCounters, cfg: RewardConfig) -> float:
    """Weighted early/late issue rate of one window; needs n_all > 0."""
    n = c.n_all
    if n <= 0:
        raise InsufficientDataError("empty window: cost undefined")
    w = cfg.issue_weights
    return cfg.w_early * early_sum(c, w) / n + cfg.w_late * late_sum(c, w) / n


def reward(c: HoCounters, cfg: RewardConfig) -> float:
    """exp(C - cost) minus the configured soft penalty, if any."""
    r = math.exp(cfg.calibration - cost(c, cfg))
    return r - _penalty(c, cfg)


def reward_or_empty(c: HoCounters, cfg: RewardConfig) -> tuple[float, bool]:
    """Reward plus an empty-window flag; empty windows score zero cost."""
    try:
        return reward(c, cfg), False
    except InsufficientDataError:
        return math.exp(cfg.calibration) - _penalty(c, cfg), True


def _penalty(c: HoCounters, cfg: RewardConfig) -> float:
    if cfg.variant == "cio_penalty":
        return cfg.lambda_cio * abs(c.cio) ** cfg.cio_exponent
    if cfg.variant == "event_penalty":
        return cfg.lambda_event * c.n_all
    return 0.0


def rtg(rewards: list[float]) -> list[float]:
    """Undiscounted suffix sums: rtg[t] = rewards[t] + rtg[t+1]."""
    out = [0.0] * len(rewards)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        if not math.isfinite(rewards[t]):
            raise ValueError("rewards must be finite")
        acc += rewards[t]
        out[t] = acc
    return out

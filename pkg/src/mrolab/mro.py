"""Rule-based mobility robustness optimization.

Weighted early/late issue sums, their combined ratio over the total event
count, and the three-threshold ±1 dB adjustment rule used both as the
evaluation baseline and as the expert behavior policy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .events import HoCounters

logger = logging.getLogger(__name__)

CIO_MIN = -8
CIO_MAX = 8


class InsufficientDataError(ValueError):
    """The window carried no handover events; the ratio is undefined."""


@dataclass(frozen=True)
class IssueWeights:
    """Importance weights: failures > wrong-cell > ping-pong >= short-stay."""

    w_f: float = 1.0
    w_w: float = 0.5
    w_p: float = 0.1
    w_ss: float = 0.1

    def __post_init__(self):
        if min(self.w_f, self.w_w, self.w_p, self.w_ss) < 0:
            raise ValueError("issue weights must be non-negative")
        if not (self.w_f > self.w_w > self.w_p >= self.w_ss):
            logger.warning(
                "issue weights break the intended ordering w_f > w_w > w_p >= w_ss: %s", self
            )


@dataclass(frozen=True)
class MroThresholds:
    tau_events: int = 10
    tau_early: float = 0.01
    tau_late: float = 0.01

    def __post_init__(self):
        if self.tau_early <= 0 or self.tau_late <= 0:
            raise ValueError("decision margins must be positive")
        if self.tau_events < 1:
            raise ValueError("tau_events must be at least 1")


def early_sum(c: HoCounters, w: IssueWeights) -> float:
    """Weighted count of early-side issues."""
    return w.w_f * c.n_fte + w.w_p * c.n_pp + w.w_w * c.n_wc + w.w_ss * c.n_stf + w.w_ss * c.n_se


def late_sum(c: HoCounters, w: IssueWeights) -> float:
    """Weighted count of late-side issues."""
    return w.w_f * c.n_ftl + w.w_w * c.n_rc + w.w_ss * c.n_sl


def mro_ratio(c: HoCounters, w: IssueWeights) -> float:
    """(early - late) imbalance per handover event."""
    if c.n_all <= 0:
        raise InsufficientDataError("no handover events in window")
    return (early_sum(c, w) - late_sum(c, w)) / c.n_all


def clip_cio(cio: int) -> int:
    return max(CIO_MIN, min(CIO_MAX, cio))


def clip_action(cio: int, action: int) -> int:
    """Largest part of `action` applicable without leaving the CIO range."""
    return clip_cio(cio + action) - cio


def mro_decide(c: HoCounters, w: IssueWeights, th: MroThresholds) -> int:
    """±1 dB adjustment (0 = keep) from one window of counters.

    Defers (returns 0) when fewer than tau_events handovers were observed;
    the returned step is clipped so the applied CIO stays in range.
    """
    if c.n_all < th.tau_events:
        return 0
    rho = mro_ratio(c, w)
    if rho > th.tau_early:
        action = 1
    elif rho < -th.tau_late:
        action = -1
    else:
        action = 0
    return clip_action(c.cio, action)

"""Handover records, issue taxonomy, and per-window counter aggregation.

A window of raw handover records for the tuned source→target pair (A, B)
is classified into nine event types:

  SUC  plain successful A→B handover
  FTE  too-early failure: random access toward B fails during execution
  FTL  too-late failure: radio link lost in A before the handover command,
       UE ends up on B
  PP   ping-pong: success A→B immediately followed by success B→A
  SE   short-stay early: success A→B then success B→C within the window
  SL   short-stay late: success A→C then success C→B within the window
  StF  success A→B followed within the window by a failed attempt out of B
  WC   wrong cell: failed A→B, UE re-establishes on some third cell C
  RC   wrong-cell re-establishment: failed A→C, UE re-establishes on B

Follow-up qualifiers (PP/SE/SL) label the record that completes the
pattern; StF relabels the qualifying A→B success itself, which is why
windowed classification defers the trailing slice of each window until the
follow-up horizon has fully elapsed. Each preceding success can be claimed
by at most one follow-up event (the earliest one).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class HoOutcome(Enum):
    SUCCESS = "success"
    RLF_BEFORE_COMMAND = "rlf-before-command"
    RLF_DURING_EXECUTION = "rlf-during-execution"
    RLF_IN_SOURCE = "rlf-in-source"


#: outcomes on the early side of the failure taxonomy (failed at the target)
EARLY_OUTCOMES = {HoOutcome.RLF_DURING_EXECUTION}
#: outcomes on the late side (link lost while still served by the source)
LATE_OUTCOMES = {HoOutcome.RLF_BEFORE_COMMAND, HoOutcome.RLF_IN_SOURCE}


class HoEventType(Enum):
    SUC = "SUC"
    FTE = "FTE"
    FTL = "FTL"
    PP = "PP"
    SE = "SE"
    SL = "SL"
    STF = "StF"
    WC = "WC"
    RC = "RC"


@dataclass(frozen=True)
class HoRecord:
    """One completed handover attempt (or radio link failure)."""

    ue: int
    timestamp: float
    source: int
    target: int
    outcome: HoOutcome
    reestablish: int | None = None
    preceding_success_t: float | None = None
    preceding_success_cell: int | None = None
    seq: int = 0

    def __post_init__(self):
        is_failure = self.outcome is not HoOutcome.SUCCESS
        if is_failure and self.reestablish is None:
            raise ValueError("failure records must carry a re-establishment cell")
        if not is_failure and self.reestablish is not None:
            raise ValueError("success records must not carry a re-establishment cell")

    @property
    def is_success(self) -> bool:
        return self.outcome is HoOutcome.SUCCESS

    def sort_key(self):
        return (self.timestamp, self.ue, self.seq)


@dataclass
class HoCounters:
    """State features of one decision window for the tuned pair."""

    cio: int = 0
    n_suc: int = 0
    n_fte: int = 0
    n_ftl: int = 0
    n_pp: int = 0
    n_se: int = 0
    n_sl: int = 0
    n_stf: int = 0
    n_wc: int = 0
    n_rc: int = 0

    @property
    def n_f(self) -> int:
        """Total failures, each carrying exactly one early or late label."""
        return self.n_fte + self.n_ftl + self.n_wc + self.n_rc

    @property
    def n_all(self) -> int:
        return self.n_suc + self.n_fte + self.n_ftl

    def to_dict(self) -> dict:
        return {
            "cio": self.cio,
            "n_suc": self.n_suc,
            "n_fte": self.n_fte,
            "n_ftl": self.n_ftl,
            "n_pp": self.n_pp,
            "n_se": self.n_se,
            "n_sl": self.n_sl,
            "n_stf": self.n_stf,
            "n_wc": self.n_wc,
            "n_rc": self.n_rc,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HoCounters":
        return cls(**{k: int(v) for k, v in d.items()})


def record_to_dict(rec: HoRecord, label: HoEventType | None = None) -> dict:
    out = {
        "ue": rec.ue,
        "timestamp": rec.timestamp,
        "source": rec.source,
        "target": rec.target,
        "outcome": rec.outcome.value,
        "reestablish": rec.reestablish,
        "preceding_success_t": rec.preceding_success_t,
        "preceding_success_cell": rec.preceding_success_cell,
        "seq": rec.seq,
    }
    if label is not None:
        out["label"] = label.value
    return out


def dump_records_jsonl(path, items) -> None:
    """Debug dump: one record per line; items are records or (record, label)."""
    import json

    with open(path, "w") as fh:
        for item in items:
            rec, label = item if isinstance(item, tuple) else (item, None)
            fh.write(json.dumps(record_to_dict(rec, label), sort_keys=True) + "\n")


@dataclass
class _LastSuccess:
    t: float
    source: int
    target: int
    consumed: bool = False


class _PairAutomaton:
    """Sequential labeler for one ordered pair; carries per-UE memory."""

    def __init__(self, pair: tuple[int, int], short_stay_window: float):
        self.a, self.b = pair
        self.window = float(short_stay_window)
        self.memory: dict[int, _LastSuccess] = {}

    def label(self, rec: HoRecord, upcoming: list[HoRecord]) -> HoEventType | None:
        """Label `rec`; `upcoming` holds later same-stream records for look-ahead."""
        a, b = self.a, self.b
        if rec.is_success:
            mem = self.memory.get(rec.ue)
            label: HoEventType | None = None
            claimed = False
            if (
                mem is not None
                and not mem.consumed
                and rec.timestamp - mem.t <= self.window
                and mem.target == rec.source
            ):
                if mem.source == a and mem.target == b and rec.target == a:
                    label, claimed = HoEventType.PP, True
                elif mem.source == a and mem.target == b and rec.target not in (a, b):
                    label, claimed = HoEventType.SE, True
                elif mem.source == a and mem.target not in (a, b) and rec.target == b:
                    label, claimed = HoEventType.SL, True
            if claimed:
                mem.consumed = True
            entry = _LastSuccess(rec.timestamp, rec.source, rec.target)
            if label is None and rec.source == a and rec.target == b:
                follow = self._next_for_ue(rec, upcoming)
                if follow is not None and not follow.is_success and follow.source == b:
                    label = HoEventType.STF
                    entry.consumed = True
                else:
                    label = HoEventType.SUC
            self.memory[rec.ue] = entry
            return label

        # failure record; never updates last-success memory
        if rec.source != a:
            return None
        if rec.target == b:
            if rec.reestablish not in (a, b):
                return HoEventType.WC
            if rec.outcome in EARLY_OUTCOMES:
                return HoEventType.FTE
            return HoEventType.FTL
        if rec.reestablish == b:
            return HoEventType.RC
        return None

    def _next_for_ue(self, rec: HoRecord, upcoming: list[HoRecord]) -> HoRecord | None:
        horizon = rec.timestamp + self.window
        for other in upcoming:
            if other.timestamp > horizon:
                return None
            if other.ue == rec.ue:
                return other
        return None

    def prune(self, before_t: float) -> None:
        stale = [ue for ue, m in self.memory.items() if m.t < before_t]
        for ue in stale:
            del self.memory[ue]


def classify(
    records: list[HoRecord],
    pair: tuple[int, int],
    short_stay_window: float = 1.0,
) -> list[tuple[HoRecord, HoEventType]]:
    """Label a complete, time-ordered record stream for one ordered pair.

    Records that match no pair-relevant pattern are omitted from the result.
    The stream is assumed complete: a trailing success with no visible
    follow-up is a plain SUC.
    """
    for prev, cur in zip(records, records[1:]):
        if cur.timestamp < prev.timestamp:
            raise ValueError("records must be sorted by timestamp")
    automaton = _PairAutomaton(pair, short_stay_window)
    out: list[tuple[HoRecord, HoEventType]] = []
    for i, rec in enumerate(records):
        label = automaton.label(rec, records[i + 1 :])
        if label is not None:
            out.append((rec, label))
    return out


def aggregate(labels: list[tuple[HoRecord, HoEventType]], cio: int = 0) -> HoCounters:
    """Count labels per type into window counters."""
    c = HoCounters(cio=cio)
    for _, label in labels:
        if label is HoEventType.SUC:
            c.n_suc += 1
        elif label is HoEventType.FTE:
            c.n_fte += 1
        elif label is HoEventType.FTL:
            c.n_ftl += 1
        elif label is HoEventType.PP:
            c.n_pp += 1
        elif label is HoEventType.SE:
            c.n_se += 1
        elif label is HoEventType.SL:
            c.n_sl += 1
        elif label is HoEventType.STF:
            c.n_stf += 1
        elif label is HoEventType.WC:
            c.n_wc += 1
        elif label is HoEventType.RC:
            c.n_rc += 1
    return c


@dataclass
class WindowClassifier:
    """Incremental classifier with a one-window look-ahead buffer.

    Records within `maturity_lag` of the window edge are deferred to the
    next window so that follow-up qualifiers (and late-materializing
    failure records) are always fully visible before a record is counted.
    Produces the same labels as `classify` over the concatenated stream.
    """

    pair: tuple[int, int]
    short_stay_window: float
    maturity_lag: float
    _buffer: list[HoRecord] = field(default_factory=list)
    _automaton: _PairAutomaton | None = None

    def __post_init__(self):
        if self.maturity_lag < self.short_stay_window:
            raise ValueError("maturity_lag must cover the short-stay window")
        self._automaton = _PairAutomaton(self.pair, self.short_stay_window)

    def push(self, records: list[HoRecord]) -> None:
        self._buffer.extend(records)

    def close_window(self, window_end: float) -> list[tuple[HoRecord, HoEventType]]:
        """Label and drain all records mature at `window_end`."""
        self._buffer.sort(key=HoRecord.sort_key)
        cutoff = window_end - self.maturity_lag
        n_mature = 0
        while n_mature < len(self._buffer) and self._buffer[n_mature].timestamp <= cutoff:
            n_mature += 1
        out: list[tuple[HoRecord, HoEventType]] = []
        for i in range(n_mature):
            rec = self._buffer[i]
            label = self._automaton.label(rec, self._buffer[i + 1 :])
            if label is not None:
                out.append((rec, label))
        del self._buffer[:n_mature]
        self._automaton.prune(cutoff - 4.0 * self.short_stay_window)
        return out

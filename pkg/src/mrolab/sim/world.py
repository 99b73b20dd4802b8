"""Sample-stepped radio world: mobility, measurements, handovers, failures.

The world advances in fixed measurement ticks (default 40 ms). Each tick:

  1. new UEs arrive (Poisson, rate = load * base rate) and finished UEs leave
  2. positions move, per-cell shadowing evolves along the traveled distance
     with exponential spatial correlation, layer-3 filtered power updates
  3. served UEs accumulate out-of-sync time whenever the serving level sits
     below the failure threshold; expiry declares a radio link failure
  4. a pending handover finishes after the preparation delay: access to the
     target succeeds iff its filtered level clears the access threshold
  5. idle UEs run the entry condition per neighbor, counting consecutive
     samples until the trigger count is reached, which locks a target

Completed attempts materialize as `HoRecord`s: successes at completion
time, failures at the moment the link was lost (they become visible once
the UE has re-established, so the caller sorts by timestamp). All
randomness flows through one seeded generator consumed in a fixed per-tick
order, so identical configs and offset schedules reproduce the record
stream bit for bit. The RNG order is also independent of the offset
schedule: runs that share a seed see identical traffic.
"""

from __future__ import annotations

import math

import numpy as np

from ..events import HoCounters, HoOutcome, HoRecord, WindowClassifier, aggregate
from ..mro import CIO_MAX, CIO_MIN
from .layout import CellLayout, make_layout
from .scenario import ScenarioConfig, SimParams

_IDLE, _PREP, _OUTAGE = 0, 1, 2
_FAIL_CODES = {
    1: HoOutcome.RLF_BEFORE_COMMAND,
    2: HoOutcome.RLF_DURING_EXECUTION,
    3: HoOutcome.RLF_IN_SOURCE,
}


class World:
    def __init__(
        self,
        scenario: ScenarioConfig,
        sim: SimParams | None = None,
        layout: CellLayout | None = None,
        seed: int | np.random.SeedSequence | None = None,
    ):
        self.scenario = scenario
        self.sim = sim or SimParams()
        self.layout = layout or make_layout(
            self.sim.layout, self.sim.site_distance, self.sim.tx_power_dbm, self.sim.carrier_mhz
        )
        self.rng = np.random.default_rng(scenario.seed if seed is None else seed)

        s = self.sim
        self.n_cells = self.layout.n_cells
        self.tick_s = s.sample_ms / 1000.0
        self.tick_count = 0
        self._pending_time = 0.0
        self.speed = scenario.velocity / 3.6  # m/s
        self.arrival_rate = scenario.load * s.base_arrival_rate
        self.xmin, self.xmax, self.ymin, self.ymax = self.layout.bounding_box(s.margin)
        self._pl_half_k = 10.0 * s.pathloss_exponent / 2.0
        self._ttt_samples = s.ttt_samples
        self._seq = 0
        self.n_attempts = 0
        self.records: list[HoRecord] = []
        self._new_records: list[HoRecord] = []
        self.classifier = WindowClassifier(
            pair=self.layout.pair_indices,
            short_stay_window=scenario.short_stay_window,
            maturity_lag=scenario.short_stay_window + scenario.reestablish_delay / 1000.0 + 0.1,
        )

        n0 = 0
        self._alloc(n0)
        self._seed_steady_state_population()

    # -- population bookkeeping -------------------------------------------------

    def _alloc(self, n: int) -> None:
        c = self.n_cells
        self.ue = np.zeros(n, dtype=np.int64)
        self.pos = np.zeros((n, 2))
        self.vel = np.zeros((n, 2))
        self.expiry = np.full(n, np.inf)
        self.waypoint = np.zeros((n, 2))
        self.shadow = np.zeros((n, c))
        self.ema = np.zeros((n, c))
        self.serving = np.zeros(n, dtype=np.int64)
        self.phase = np.zeros(n, dtype=np.int64)
        self.phase_ms = np.zeros(n)
        self.target = np.full(n, -1, dtype=np.int64)
        self.oos_ms = np.zeros(n)
        self.ttt = np.zeros((n, c), dtype=np.int64)
        self.fail_code = np.zeros(n, dtype=np.int64)
        self.fail_t = np.zeros(n)
        self.fail_src = np.full(n, -1, dtype=np.int64)
        self.last_suc_t = np.full(n, -np.inf)
        self.last_suc_src = np.full(n, -1, dtype=np.int64)
        self._next_ue = 0

    @property
    def t(self) -> float:
        return self.tick_count * self.tick_s

    @property
    def n_ue(self) -> int:
        return self.ue.shape[0]

    def _ray_exit_distance(self, pos: np.ndarray, direction: np.ndarray) -> np.ndarray:
        """Distance along `direction` until the bounding box is left."""
        big = 1e12
        with np.errstate(divide="ignore", invalid="ignore"):
            tx1 = (self.xmin - pos[:, 0]) / direction[:, 0]
            tx2 = (self.xmax - pos[:, 0]) / direction[:, 0]
            ty1 = (self.ymin - pos[:, 1]) / direction[:, 1]
            ty2 = (self.ymax - pos[:, 1]) / direction[:, 1]
        tx = np.maximum(np.nan_to_num(tx1, nan=-big, posinf=big, neginf=-big),
                        np.nan_to_num(tx2, nan=-big, posinf=big, neginf=-big))
        ty = np.maximum(np.nan_to_num(ty1, nan=-big, posinf=big, neginf=-big),
                        np.nan_to_num(ty2, nan=-big, posinf=big, neginf=-big))
        return np.minimum(tx, ty)

    def _sample_entry_paths(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Boundary entry points plus unit headings toward the interior core."""
        w, h = self.xmax - self.xmin, self.ymax - self.ymin
        perim = 2.0 * (w + h)
        u = self.rng.uniform(0.0, perim, size=n)
        pos = np.empty((n, 2))
        side1 = u < w
        side2 = (u >= w) & (u < w + h)
        side3 = (u >= w + h) & (u < 2 * w + h)
        side4 = ~(side1 | side2 | side3)
        pos[side1] = np.stack([self.xmin + u[side1], np.full(side1.sum(), self.ymin)], axis=1)
        pos[side2] = np.stack([np.full(side2.sum(), self.xmax), self.ymin + (u[side2] - w)], axis=1)
        pos[side3] = np.stack([self.xmin + (u[side3] - w - h), np.full(side3.sum(), self.ymax)], axis=1)
        pos[side4] = np.stack([np.full(side4.sum(), self.xmin), self.ymin + (u[side4] - 2 * w - h)], axis=1)
        core = 0.30
        cx = self.rng.uniform(self.xmin + core * w, self.xmax - core * w, size=n)
        cy = self.rng.uniform(self.ymin + core * h, self.ymax - core * h, size=n)
        d = np.stack([cx, cy], axis=1) - pos
        norm = np.maximum(np.hypot(d[:, 0], d[:, 1]), 1e-9)[:, None]
        return pos, d / norm

    def _spawn(self, n: int, progress: np.ndarray | None = None) -> None:
        """Create `n` UEs; `progress` in [0,1) places them along their path."""
        if n <= 0:
            return
        s = self.sim
        stationary = self.rng.random(n) < s.stationary_fraction
        entry, heading = self._sample_entry_paths(n)
        sx = self.rng.uniform(self.xmin, self.xmax, size=n)
        sy = self.rng.uniform(self.ymin, self.ymax, size=n)
        dwell = self.rng.exponential(s.stationary_dwell_s, size=n)
        wx = self.rng.uniform(self.xmin, self.xmax, size=n)
        wy = self.rng.uniform(self.ymin, self.ymax, size=n)
        life = self.rng.exponential(s.waypoint_lifetime_s, size=n)
        shadow = self.rng.normal(0.0, s.shadowing_sigma_db, size=(n, self.n_cells))

        pos = entry.copy()
        vel = heading * self.speed
        expiry = np.full(n, np.inf)
        waypoint = np.stack([wx, wy], axis=1)
        if s.mobility == "waypoint":
            d = waypoint - pos
            norm = np.maximum(np.hypot(d[:, 0], d[:, 1]), 1e-9)[:, None]
            vel = d / norm * self.speed
            expiry = self.t + life
        if progress is not None:
            reach = self._ray_exit_distance(entry, heading)
            pos = entry + heading * (progress[:, None] * reach[:, None])
            if s.mobility == "waypoint":
                expiry = self.t + life * (1.0 - progress)
        pos[stationary] = np.stack([sx[stationary], sy[stationary]], axis=1)
        vel[stationary] = 0.0
        expiry[stationary] = self.t + dwell[stationary]
        if self.speed <= 0:
            # degenerate all-stationary scenario
            vel[:] = 0.0
            expiry[~stationary] = self.t + dwell[~stationary]

        ids = np.arange(self._next_ue, self._next_ue + n, dtype=np.int64)
        self._next_ue += n
        ema = self._raw_rsrp(pos, shadow)
        serving = ema.argmax(axis=1)

        self.ue = np.concatenate([self.ue, ids])
        self.pos = np.concatenate([self.pos, pos])
        self.vel = np.concatenate([self.vel, vel])
        self.expiry = np.concatenate([self.expiry, expiry])
        self.waypoint = np.concatenate([self.waypoint, waypoint])
        self.shadow = np.concatenate([self.shadow, shadow])
        self.ema = np.concatenate([self.ema, ema])
        self.serving = np.concatenate([self.serving, serving])
        self.phase = np.concatenate([self.phase, np.zeros(n, dtype=np.int64)])
        self.phase_ms = np.concatenate([self.phase_ms, np.zeros(n)])
        self.target = np.concatenate([self.target, np.full(n, -1, dtype=np.int64)])
        self.oos_ms = np.concatenate([self.oos_ms, np.zeros(n)])
        self.ttt = np.concatenate([self.ttt, np.zeros((n, self.n_cells), dtype=np.int64)])
        self.fail_code = np.concatenate([self.fail_code, np.zeros(n, dtype=np.int64)])
        self.fail_t = np.concatenate([self.fail_t, np.zeros(n)])
        self.fail_src = np.concatenate([self.fail_src, np.full(n, -1, dtype=np.int64)])
        self.last_suc_t = np.concatenate([self.last_suc_t, np.full(n, -np.inf)])
        self.last_suc_src = np.concatenate([self.last_suc_src, np.full(n, -1, dtype=np.int64)])

    def _seed_steady_state_population(self) -> None:
        """Start from (approximately) the stationary population.

        Movers: expected count is arrival rate x mean path time, each placed
        at a uniform fraction of its path. Stationary UEs get a memoryless
        residual dwell, so no warm-up run is needed.
        """
        s = self.sim
        if self.arrival_rate <= 0:
            return
        probe_pos, probe_dir = self._sample_entry_paths(256)
        mean_path = float(self._ray_exit_distance(probe_pos, probe_dir).mean())
        if self.speed > 0:
            mean_life_mover = (
                mean_path / self.speed if s.mobility == "straight" else s.waypoint_lifetime_s
            )
        else:
            mean_life_mover = s.stationary_dwell_s
        mover_rate = self.arrival_rate * (1.0 - s.stationary_fraction)
        stat_rate = self.arrival_rate * s.stationary_fraction
        expected = mover_rate * mean_life_mover + stat_rate * s.stationary_dwell_s
        n0 = int(self.rng.poisson(expected))
        if n0 > 0:
            frac = self.rng.uniform(0.0, 1.0, size=n0)
            # stationary/mover split happens inside _spawn; progress only
            # affects movers
            self._spawn(n0, progress=frac)

    def add_probe_ue(self, pos, vel) -> int:
        """Inject one scripted UE (testing hook); returns its id."""
        self._spawn(1)
        i = self.n_ue - 1
        self.pos[i] = np.asarray(pos, dtype=np.float64)
        self.vel[i] = np.asarray(vel, dtype=np.float64)
        self.expiry[i] = np.inf
        self.shadow[i] = 0.0
        self.ema[i] = self._raw_rsrp(self.pos[i : i + 1], self.shadow[i : i + 1])[0]
        self.serving[i] = int(self.ema[i].argmax())
        return int(self.ue[i])

    def _compress(self, keep: np.ndarray) -> None:
        if keep.all():
            return
        for name in (
            "ue",
            "pos",
            "vel",
            "expiry",
            "waypoint",
            "shadow",
            "ema",
            "serving",
            "phase",
            "phase_ms",
            "target",
            "oos_ms",
            "ttt",
            "fail_code",
            "fail_t",
            "fail_src",
            "last_suc_t",
            "last_suc_src",
        ):
            setattr(self, name, getattr(self, name)[keep])

    # -- propagation -------------------------------------------------------------

    def _raw_rsrp(self, pos: np.ndarray, shadow: np.ndarray) -> np.ndarray:
        d = pos[:, None, :] - self.layout.positions[None, :, :]
        d2 = np.maximum(d[:, :, 0] ** 2 + d[:, :, 1] ** 2, 1.0)
        pl = self.sim.pathloss_intercept_db + self._pl_half_k * np.log10(d2)
        return self.layout.tx_power[None, :] - pl - shadow

    def rsrp(self, cell_ident: int, position, shadowing_db: float = 0.0) -> float:
        """Received power from one cell at a position, in dBm."""
        idx = self.layout.index_of(cell_ident)
        p = np.asarray(position, dtype=np.float64)
        d = math.hypot(p[0] - self.layout.positions[idx, 0], p[1] - self.layout.positions[idx, 1])
        d = max(d, 1.0)
        pl = self.sim.pathloss_intercept_db + 10.0 * self.sim.pathloss_exponent * math.log10(d)
        return float(self.layout.tx_power[idx] - pl - shadowing_db)

    # -- record plumbing -----------------------------------------------------------

    def _emit(self, ue_row: int, timestamp: float, source: int, target: int,
              outcome: HoOutcome, reestablish: int | None) -> None:
        has_prev = math.isfinite(self.last_suc_t[ue_row])
        rec = HoRecord(
            ue=int(self.ue[ue_row]),
            timestamp=float(timestamp),
            source=int(source),
            target=int(target),
            outcome=outcome,
            reestablish=None if reestablish is None else int(reestablish),
            preceding_success_t=float(self.last_suc_t[ue_row]) if has_prev else None,
            preceding_success_cell=int(self.last_suc_src[ue_row]) if has_prev else None,
            seq=self._seq,
        )
        self._seq += 1
        self.n_attempts += 1
        self.records.append(rec)
        self._new_records.append(rec)

    def _reestablish(self, rows: np.ndarray) -> None:
        for i in rows:
            best = int(self.ema[i].argmax())
            intended = int(self.target[i])
            self._emit(
                i,
                self.fail_t[i],
                int(self.fail_src[i]),
                best if intended < 0 else intended,
                _FAIL_CODES[int(self.fail_code[i])],
                reestablish=best,
            )
            self.serving[i] = best
            self.phase[i] = _IDLE
            self.target[i] = -1
            self.oos_ms[i] = 0.0
            self.ttt[i, :] = 0

    # -- dynamics ------------------------------------------------------------------

    def _tick(self) -> None:
        s = self.sim
        dt = self.tick_s
        dt_ms = s.sample_ms
        self.tick_count += 1
        now = self.t

        # arrivals (fixed draw order: count first, then attributes)
        n_new = int(self.rng.poisson(self.arrival_rate * dt)) if self.arrival_rate > 0 else 0
        if n_new:
            self._spawn(n_new)

        # motion
        self.pos += self.vel * dt
        if s.mobility == "waypoint" and self.speed > 0:
            d = self.waypoint - self.pos
            dist = np.hypot(d[:, 0], d[:, 1])
            arrived = (dist < self.speed * dt * 1.5) & (self.vel != 0).any(axis=1)
            if arrived.any():
                k = int(arrived.sum())
                nx = self.rng.uniform(self.xmin, self.xmax, size=k)
                ny = self.rng.uniform(self.ymin, self.ymax, size=k)
                self.waypoint[arrived] = np.stack([nx, ny], axis=1)
                d2 = self.waypoint[arrived] - self.pos[arrived]
                norm = np.maximum(np.hypot(d2[:, 0], d2[:, 1]), 1e-9)[:, None]
                self.vel[arrived] = d2 / norm * self.speed

        # departures: out of bounds or expired dwell
        out = (
            (self.pos[:, 0] < self.xmin)
            | (self.pos[:, 0] > self.xmax)
            | (self.pos[:, 1] < self.ymin)
            | (self.pos[:, 1] > self.ymax)
            | (self.expiry <= now)
        )
        if out.any():
            leaving_outage = np.where(out & (self.phase == _OUTAGE))[0]
            if leaving_outage.size:
                self._reestablish(leaving_outage)
            self._compress(~out)
        n = self.n_ue
        if n == 0:
            return

        # shadowing walk along traveled distance, then filtered power
        step = np.hypot(self.vel[:, 0], self.vel[:, 1]) * dt
        rho = np.exp(-step / s.shadowing_decorrelation_m)[:, None]
        eps = self.rng.standard_normal((n, self.n_cells))
        self.shadow = rho * self.shadow + np.sqrt(1.0 - rho * rho) * s.shadowing_sigma_db * eps
        raw = self._raw_rsrp(self.pos, self.shadow)
        self.ema += s.ema_alpha * (raw - self.ema)

        rows = np.arange(n)
        phase0 = self.phase.copy()
        served = phase0 != _OUTAGE
        serv_idx = np.where(served, self.serving, 0)
        serv_ema = self.ema[rows, serv_idx]

        # out-of-sync accumulation -> radio link failure
        below = served & (serv_ema < self.scenario.rlf_threshold)
        self.oos_ms = np.where(below, self.oos_ms + dt_ms, 0.0)
        rlf = served & (self.oos_ms >= self.scenario.rlf_timer)
        if rlf.any():
            idx = np.where(rlf)[0]
            in_prep = phase0[idx] == _PREP
            self.fail_code[idx] = np.where(in_prep, 1, 3)
            self.fail_t[idx] = now
            self.fail_src[idx] = self.serving[idx]
            self.target[idx] = np.where(in_prep, self.target[idx], -1)
            self.phase[idx] = _OUTAGE
            self.phase_ms[idx] = self.scenario.reestablish_delay
            self.serving[idx] = -1
            self.oos_ms[idx] = 0.0
            self.ttt[idx, :] = 0

        # handover execution after the preparation delay
        prep = (phase0 == _PREP) & ~rlf
        if prep.any():
            self.phase_ms[prep] -= dt_ms
            done = prep & (self.phase_ms <= 0.0)
            for i in np.where(done)[0]:
                tgt = int(self.target[i])
                src = int(self.serving[i])
                if self.ema[i, tgt] >= s.access_threshold_dbm:
                    self._emit(i, now, src, tgt, HoOutcome.SUCCESS, None)
                    self.last_suc_t[i] = now
                    self.last_suc_src[i] = src
                    self.serving[i] = tgt
                    self.phase[i] = _IDLE
                    self.target[i] = -1
                    self.oos_ms[i] = 0.0
                    self.ttt[i, :] = 0
                else:
                    self.fail_code[i] = 2
                    self.fail_t[i] = now
                    self.fail_src[i] = src
                    self.phase[i] = _OUTAGE
                    self.phase_ms[i] = self.scenario.reestablish_delay
                    self.serving[i] = -1
                    self.oos_ms[i] = 0.0
                    self.ttt[i, :] = 0

        # entry condition per neighbor for idle UEs
        idle = (phase0 == _IDLE) & ~rlf
        if idle.any():
            off = self.sim.a3.off_a3 + self.sim.a3.hys_a3
            margin = self.ema - serv_ema[:, None] - off - self.layout.cio_db[serv_idx]
            cond = margin > 0.0
            cond[rows, serv_idx] = False
            cond &= idle[:, None]
            self.ttt = np.where(cond, self.ttt + 1, 0)
            trig = (self.ttt >= self._ttt_samples).any(axis=1)
            for i in np.where(trig)[0]:
                ready = np.where(self.ttt[i] >= self._ttt_samples)[0]
                tgt = int(ready[self.ema[i, ready].argmax()])
                self.phase[i] = _PREP
                self.phase_ms[i] = s.prep_ms
                self.target[i] = tgt
                self.ttt[i, :] = 0

        # re-establishment after the outage delay
        outage = phase0 == _OUTAGE
        if outage.any():
            self.phase_ms[outage] -= dt_ms
            back = np.where(outage & (self.phase_ms <= 0.0))[0]
            if back.size:
                self._reestablish(back)

    def advance(self, dt: float) -> list[HoRecord]:
        """Advance by `dt` seconds; returns records materialized meanwhile.

        Time advances in whole measurement samples; a fractional remainder
        carries over to the next call.
        """
        if dt <= 0:
            raise ValueError("dt must be positive")
        self._pending_time += dt
        n_ticks = int(self._pending_time / self.tick_s + 1e-9)
        self._pending_time -= n_ticks * self.tick_s
        self._new_records = []
        for _ in range(n_ticks):
            self._tick()
        out = self._new_records
        self._new_records = []
        self.classifier.push(out)
        return out

    def run_window(self, cio: int) -> tuple[HoCounters, list[HoRecord]]:
        """One decision window at the given pair offset.

        Returns the state-feature counters (offset echoed in the first
        feature) and the records that matured into this window's counts.
        """
        if not (CIO_MIN <= cio <= CIO_MAX) or int(cio) != cio:
            raise ValueError(f"pair offset must be an integer in [{CIO_MIN}, {CIO_MAX}]")
        self.layout.set_pair_cio(int(cio))
        self.advance(self.scenario.window_seconds)
        labeled = self.classifier.close_window(self.t)
        self.last_window_labels = labeled
        counters = aggregate(labeled, cio=int(cio))
        return counters, [rec for rec, _ in labeled]


def run_window(world: World, cio: int) -> tuple[HoCounters, list[HoRecord]]:
    return world.run_window(cio)

"""Scenario and simulator parameter blocks."""

from __future__ import annotations

from dataclasses import dataclass, field

from .layout import A3Config


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulated traffic condition."""

    load: float = 0.6
    velocity: float = 50.0  # km/h
    seed: int = 1
    window_seconds: float = 30.0
    horizon: int = 17
    rlf_threshold: float = -94.0  # dBm serving level below which sync is lost
    rlf_timer: float = 500.0  # ms out-of-sync before a link failure is declared
    reestablish_delay: float = 300.0  # ms from failure to re-establishment
    short_stay_window: float = 1.0  # s follow-up horizon for issue qualifiers

    def __post_init__(self):
        if not (0.0 < self.load <= 1.0):
            raise ValueError("load must lie in (0, 1]")
        if self.velocity < 0:
            raise ValueError("velocity must be non-negative")
        if self.window_seconds <= 0:
            raise ValueError("window_seconds must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.short_stay_window <= 0:
            raise ValueError("short_stay_window must be positive")
        if self.rlf_timer <= 0 or self.reestablish_delay < 0:
            raise ValueError("failure timers must be positive")

    def with_(self, **kw) -> "ScenarioConfig":
        d = self.__dict__.copy()
        d.update(kw)
        return ScenarioConfig(**d)


@dataclass(frozen=True)
class SimParams:
    """Physical-layer and traffic knobs shared across scenarios."""

    layout: str = "grid"
    site_distance: float = 300.0  # m
    margin: float = 150.0  # m of playground beyond the outermost cells
    tx_power_dbm: float = 30.0
    carrier_mhz: float = 3500.0
    pathloss_exponent: float = 3.7
    pathloss_intercept_db: float = 38.0  # loss at 1 m
    shadowing_sigma_db: float = 4.0
    shadowing_decorrelation_m: float = 50.0
    ema_alpha: float = 0.5  # per-sample weight of the layer-3 filter
    sample_ms: float = 40.0
    prep_ms: float = 80.0  # measurement report -> handover execution
    access_threshold_dbm: float = -91.0  # minimum target level to complete access
    base_arrival_rate: float = 3.4  # UEs per second at load 1.0
    stationary_fraction: float = 0.0
    stationary_dwell_s: float = 60.0
    mobility: str = "straight"  # straight | waypoint
    waypoint_lifetime_s: float = 60.0
    a3: A3Config = field(default_factory=A3Config)

    def __post_init__(self):
        if self.sample_ms <= 0:
            raise ValueError("sample_ms must be positive")
        if not (0.0 < self.ema_alpha <= 1.0):
            raise ValueError("ema_alpha must lie in (0, 1]")
        if not (0.0 <= self.stationary_fraction <= 1.0):
            raise ValueError("stationary_fraction must lie in [0, 1]")
        if self.mobility not in ("straight", "waypoint"):
            raise ValueError(f"unknown mobility model {self.mobility!r}")
        if self.base_arrival_rate < 0:
            raise ValueError("base_arrival_rate must be non-negative")

    @property
    def ttt_samples(self) -> int:
        return max(1, int(round(self.a3.ttt_ms / self.sample_ms)))

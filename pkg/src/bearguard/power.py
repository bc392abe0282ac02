"""
Battery/solar energy budget.

Draw is the duty-cycle weighted mean of the active and idle power. Solar harvest is
the panel rating scaled by a 24 h average derating, or by a time-varying profile in
``simulate_soc``. Energy is tracked in watt-hours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

SECONDS_PER_DAY = 86400.0
UNBOUNDED = math.inf


@dataclass(frozen=True)
class PowerConfig:
    battery_capacity: float = 11000.0  # mAh
    nominal_voltage: float = 3.7  # V
    panel_rating: float = 1.0  # W
    harvest_derating: float = 0.15
    draw_active: float = 500.0  # mW
    draw_idle: float = 200.0  # mW
    duty_cycle_active: float = 1.0

    def __post_init__(self) -> None:
        for name in ("battery_capacity", "nominal_voltage", "draw_active", "draw_idle"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.panel_rating < 0:
            raise ValueError("panel_rating must be >= 0")
        if not 0.0 <= self.harvest_derating <= 1.0:
            raise ValueError("harvest_derating must be in [0, 1]")
        if self.draw_idle > self.draw_active:
            raise ValueError("draw_idle must not exceed draw_active")
        if not 0.0 <= self.duty_cycle_active <= 1.0:
            raise ValueError("duty_cycle_active must be in [0, 1]")


@dataclass(frozen=True)
class BatteryState:
    energy_remaining: float  # Wh
    time: float  # s


def capacity_wh(cfg: PowerConfig) -> float:
    return cfg.battery_capacity * cfg.nominal_voltage / 1000.0


def average_draw_mw(cfg: PowerConfig) -> float:
    d = cfg.duty_cycle_active
    return d * cfg.draw_active + (1.0 - d) * cfg.draw_idle


def average_harvest_mw(cfg: PowerConfig, solar_enabled: bool) -> float:
    return cfg.panel_rating * cfg.harvest_derating * 1000.0 if solar_enabled else 0.0


def runtime_days(cfg: PowerConfig, solar_enabled: bool) -> float:
    """Days from full to empty at average draw and harvest; ``inf`` if harvest covers draw."""
    net_mw = average_draw_mw(cfg) - average_harvest_mw(cfg, solar_enabled)
    if net_mw <= 0:
        return UNBOUNDED
    return capacity_wh(cfg) / (net_mw / 1000.0) / 24.0


def max_duty_cycle_for(cfg: PowerConfig, target_days: float, solar_enabled: bool = True) -> float | None:
    """Largest active duty cycle whose runtime reaches ``target_days``, or None if even
    an always-idle device falls short."""
    budget_mw = capacity_wh(cfg) * 1000.0 / (target_days * 24.0) + average_harvest_mw(cfg, solar_enabled)
    if budget_mw < cfg.draw_idle:
        return None
    span = cfg.draw_active - cfg.draw_idle
    if span == 0:
        return 1.0
    return min(1.0, (budget_mw - cfg.draw_idle) / span)


@dataclass(frozen=True)
class DutySweepRow:
    duty_cycle: float
    average_draw_mw: float
    runtime_days: float
    meets_target: bool


def duty_cycle_sweep(
    cfg: PowerConfig,
    duty_cycles: Sequence[float],
    target_days: float = 30.0,
    solar_enabled: bool = True,
) -> list[DutySweepRow]:
    rows = []
    for d in duty_cycles:
        c = PowerConfig(**{**cfg.__dict__, "duty_cycle_active": float(d)})
        days = runtime_days(c, solar_enabled)
        rows.append(DutySweepRow(float(d), average_draw_mw(c), days, days >= target_days))
    return rows


def constant_profile(fraction: float) -> Callable[[float], float]:
    return lambda t: fraction


def day_night_profile(
    day_fraction: float, day_hours: float = 12.0, sunrise_hour: float = 6.0
) -> Callable[[float], float]:
    """Square wave: ``day_fraction`` of panel rating between sunrise and sunset, 0 otherwise."""

    def profile(t: float) -> float:
        hour = (t / 3600.0) % 24.0
        return day_fraction if sunrise_hour <= hour < sunrise_hour + day_hours else 0.0

    return profile


@dataclass(frozen=True)
class SocSeries:
    times: np.ndarray  # s
    energy: np.ndarray  # Wh
    depleted_at: float | None  # s

    def states(self) -> list[BatteryState]:
        return [BatteryState(float(e), float(t)) for t, e in zip(self.times, self.energy)]


def simulate_soc(
    cfg: PowerConfig,
    horizon: float,
    timestep: float,
    day_night_profile: Callable[[float], float] | None = None,
    *,
    solar_enabled: bool = True,
    initial_energy: float | None = None,
) -> SocSeries:
    """Forward-Euler state of charge from a full battery over ``horizon`` days.

    ``day_night_profile(t)`` gives the harvest as a fraction of panel rating at time
    ``t`` (seconds); the default is the flat 24 h derating. Energy is clamped to
    ``[0, capacity]`` after each step.
    """
    if timestep <= 0 or horizon <= 0:
        raise ValueError("timestep and horizon must be > 0")
    if day_night_profile is None:
        day_night_profile = constant_profile(cfg.harvest_derating)
    cap = capacity_wh(cfg)
    draw_w = average_draw_mw(cfg) / 1000.0
    panel_w = cfg.panel_rating if solar_enabled else 0.0
    dt_h = timestep / 3600.0
    n = int(math.ceil(horizon * SECONDS_PER_DAY / timestep - 1e-9))

    times = np.arange(n + 1) * timestep
    energy = np.empty(n + 1)
    e = cap if initial_energy is None else min(max(initial_energy, 0.0), cap)
    energy[0] = e
    depleted_at = 0.0 if e <= 0 else None
    for k in range(n):
        harvest_w = panel_w * day_night_profile(times[k])
        e = min(cap, max(0.0, e + (harvest_w - draw_w) * dt_h))
        energy[k + 1] = e
        if depleted_at is None and e <= 0.0:
            depleted_at = float(times[k + 1])
    return SocSeries(times, energy, depleted_at)

"""
Spray actuation state machine.

A bear segment triggers one spray when the controller is idle, no human is in view and
the canister is not empty. After triggering the controller stays busy for the spray
duration plus a cooldown. Time is supplied by the caller and may never go backwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence

from .core import Decision, EventKind, EventRecord, ObjectClass, Segment

DEFAULT_DEVICE_ID = "unit-0"


class Mode(str, Enum):
    IDLE = "Idle"
    SPRAYING = "Spraying"
    COOLDOWN = "Cooldown"


@dataclass(frozen=True)
class ControllerConfig:
    trigger_latency_budget: float = 0.2
    spray_duration: float = 1.0
    cooldown: float = 30.0
    human_inhibit: bool = True
    canister_total_sprays: int = 20
    actuation_delay: float = 0.05
    human_confidence_threshold: float = 0.5
    device_id: str = DEFAULT_DEVICE_ID

    def __post_init__(self) -> None:
        for name in ("trigger_latency_budget", "spray_duration", "cooldown", "actuation_delay"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.canister_total_sprays < 1:
            raise ValueError("canister_total_sprays must be >= 1")
        if self.actuation_delay > self.trigger_latency_budget:
            raise ValueError(
                f"actuation_delay {self.actuation_delay} s exceeds the "
                f"{self.trigger_latency_budget} s trigger latency budget"
            )
        if not 0.0 <= self.human_confidence_threshold <= 1.0:
            raise ValueError("human_confidence_threshold must be in [0, 1]")


@dataclass(frozen=True)
class CanisterSpec:
    capsaicin_fraction: float = 0.03
    menthol_fraction: float = 0.015
    pressure: float = 2.8  # MPa
    range: float = 13.0  # m

    def __post_init__(self) -> None:
        if not 0.02 <= self.capsaicin_fraction <= 0.05:
            raise ValueError("capsaicin_fraction must be within 2-5 %")
        if not 0.01 <= self.menthol_fraction <= 0.02:
            raise ValueError("menthol_fraction must be within 1-2 %")
        if not 0 < self.pressure <= 2.8:
            raise ValueError("pressure must be in (0, 2.8] MPa")
        if not 0 < self.range <= 13.0:
            raise ValueError("range must be in (0, 13] m")


@dataclass(frozen=True)
class ControllerState:
    mode: Mode = Mode.IDLE
    sprays_remaining: int = 20
    last_trigger_time: float | None = None
    last_time: float = -math.inf

    @classmethod
    def initial(cls, cfg: ControllerConfig) -> "ControllerState":
        return cls(sprays_remaining=cfg.canister_total_sprays)


@dataclass(frozen=True)
class SprayEvent:
    trigger_time: float
    decision_time: float
    duration: float
    sprays_remaining_after: int

    def to_payload(self) -> dict:
        return {
            "trigger_time": self.trigger_time,
            "decision_time": self.decision_time,
            "duration": self.duration,
            "sprays_remaining_after": self.sprays_remaining_after,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "SprayEvent":
        return cls(
            payload["trigger_time"],
            payload["decision_time"],
            payload["duration"],
            payload["sprays_remaining_after"],
        )


def human_in_segment(segment: Segment, cfg: ControllerConfig) -> bool:
    return any(
        d.object_class is ObjectClass.HUMAN and d.confidence >= cfg.human_confidence_threshold
        for f in segment.frames
        for d in f.detections
    )


def _advance(state: ControllerState, now: float, cfg: ControllerConfig) -> ControllerState:
    if state.last_trigger_time is None or state.mode is Mode.IDLE:
        return state
    spray_end = state.last_trigger_time + cfg.spray_duration
    if now >= spray_end + cfg.cooldown:
        return replace(state, mode=Mode.IDLE)
    if now >= spray_end:
        return replace(state, mode=Mode.COOLDOWN)
    return replace(state, mode=Mode.SPRAYING)


def step(
    state: ControllerState,
    segment: Segment,
    human_present: bool,
    now: float,
    cfg: ControllerConfig,
) -> tuple[ControllerState, EventRecord | None]:
    if not now > state.last_time:
        raise ValueError(f"time went backwards: {now} after {state.last_time}")
    state = _advance(replace(state, last_time=now), now, cfg)
    if segment.decision is not Decision.BEAR_DETECTED:
        return state, None
    if human_present and cfg.human_inhibit:
        event = EventRecord(
            cfg.device_id,
            now,
            EventKind.SPRAY_INHIBITED,
            {
                "reason": "human_present",
                "segment_start": segment.start_index,
                "max_bear_confidence": segment.max_bear_confidence,
                "sprays_remaining": state.sprays_remaining,
            },
        )
        return state, event
    if state.mode is not Mode.IDLE or state.sprays_remaining == 0:
        return state, None

    spray = SprayEvent(
        trigger_time=now + cfg.actuation_delay,
        decision_time=now,
        duration=cfg.spray_duration,
        sprays_remaining_after=state.sprays_remaining - 1,
    )
    if spray.trigger_time - spray.decision_time > cfg.trigger_latency_budget:
        raise AssertionError("spray latency exceeds budget")
    state = replace(
        state,
        mode=Mode.SPRAYING,
        sprays_remaining=spray.sprays_remaining_after,
        last_trigger_time=spray.trigger_time,
    )
    payload = spray.to_payload()
    payload["segment_start"] = segment.start_index
    payload["max_bear_confidence"] = segment.max_bear_confidence
    payload["human_present"] = bool(human_present)
    return state, EventRecord(cfg.device_id, now, EventKind.SPRAY_TRIGGERED, payload)


def run_timeline(
    segments: Iterable[tuple[float, Segment, bool]],
    cfg: ControllerConfig,
    state: ControllerState | None = None,
) -> tuple[list[EventRecord], ControllerState]:
    """Fold ``step`` over ``(time, segment, human_present)`` triples."""
    state = ControllerState.initial(cfg) if state is None else state
    events = []
    for now, segment, human in segments:
        state, event = step(state, segment, human, now, cfg)
        if event is not None:
            events.append(event)
    return events, state


def spray_events(records: Sequence[EventRecord]) -> list[SprayEvent]:
    return [SprayEvent.from_payload(r.payload) for r in records if r.kind is EventKind.SPRAY_TRIGGERED]

import dataclasses

import numpy as np
import pytest

from bearguard.controller import (
    CanisterSpec,
    ControllerConfig,
    ControllerState,
    Mode,
    human_in_segment,
    run_timeline,
    spray_events,
    step,
)
from bearguard.core import BoundingBox, Decision, Detection, EventKind, Frame, ObjectClass, Segment, events_to_bytes
from oracles import reference_controller

CFG = ControllerConfig()
BEAR_SEG = Segment((Frame(0, 0.0),), Decision.BEAR_DETECTED, 0.9)
NO_SEG = Segment((Frame(0, 0.0),), Decision.NO_BEAR, 0.1)


def test_defaults():
    assert CFG.trigger_latency_budget == 0.2
    assert CFG.spray_duration == 1.0
    assert CFG.cooldown == 30.0
    assert CFG.human_inhibit is True
    assert CFG.canister_total_sprays == 20


@pytest.mark.parametrize(
    "kw", [{"spray_duration": 0}, {"cooldown": -1}, {"canister_total_sprays": 0}, {"actuation_delay": 0.25}]
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        ControllerConfig(**kw)


def test_canister_bounds():
    CanisterSpec(0.02, 0.01, 2.8, 13)
    CanisterSpec(0.05, 0.02, 1.0, 5)
    for kw in ({"capsaicin_fraction": 0.06}, {"menthol_fraction": 0.005}, {"pressure": 3.0}, {"range": 14}):
        with pytest.raises(ValueError):
            CanisterSpec(**kw)


def test_no_bear_idle_stays_idle():
    state, ev = step(ControllerState.initial(CFG), NO_SEG, False, 1.0, CFG)
    assert ev is None and state.mode is Mode.IDLE


def test_human_inhibits():
    state, ev = step(ControllerState.initial(CFG), BEAR_SEG, True, 1.0, CFG)
    assert ev.kind is EventKind.SPRAY_INHIBITED
    assert state.sprays_remaining == 20 and state.mode is Mode.IDLE


def test_trigger_latency_and_state():
    state, ev = step(ControllerState.initial(CFG), BEAR_SEG, False, 3.0, CFG)
    assert ev.kind is EventKind.SPRAY_TRIGGERED
    (spray,) = spray_events([ev])
    assert spray.trigger_time - spray.decision_time <= 0.2
    assert spray.duration == 1.0
    assert state.sprays_remaining == 19 and state.mode is Mode.SPRAYING


def test_cooldown_timeline():
    # hand-traced: spray at 0 (+0.05), busy until 31.05; t=5 suppressed; t=40 sprays
    timeline = [(0.0, BEAR_SEG, False), (5.0, BEAR_SEG, False), (40.0, BEAR_SEG, False)]
    events, state = run_timeline(timeline, CFG)
    assert [e.kind for e in events] == [EventKind.SPRAY_TRIGGERED] * 2
    assert [e.payload["trigger_time"] for e in events] == pytest.approx([0.05, 40.05])
    assert state.sprays_remaining == 18


def test_mode_progression():
    state, _ = step(ControllerState.initial(CFG), BEAR_SEG, False, 0.0, CFG)
    state, _ = step(state, NO_SEG, False, 0.5, CFG)
    assert state.mode is Mode.SPRAYING
    state, _ = step(state, NO_SEG, False, 2.0, CFG)
    assert state.mode is Mode.COOLDOWN
    state, _ = step(state, NO_SEG, False, 31.05, CFG)
    assert state.mode is Mode.IDLE


def test_refuses_to_rewind():
    state, _ = step(ControllerState.initial(CFG), NO_SEG, False, 5.0, CFG)
    with pytest.raises(ValueError, match="backwards"):
        step(state, NO_SEG, False, 5.0, CFG)


def test_empty_timeline():
    assert run_timeline([], CFG)[0] == []


def test_canister_exhaustion():
    cfg = ControllerConfig(canister_total_sprays=1)
    timeline = [(100.0 * k, BEAR_SEG, False) for k in range(5)]
    events, state = run_timeline(timeline, cfg)
    assert [e.kind for e in events] == [EventKind.SPRAY_TRIGGERED]
    assert state.sprays_remaining == 0


def test_human_detection_threshold():
    box = BoundingBox(0, 0, 10, 10)
    weak = Segment((Frame(0, 0.0, (Detection(ObjectClass.HUMAN, 0.49, box),)),), Decision.BEAR_DETECTED, 0.9)
    strong = Segment((Frame(0, 0.0, (Detection(ObjectClass.HUMAN, 0.5, box),)),), Decision.BEAR_DETECTED, 0.9)
    assert not human_in_segment(weak, CFG)
    assert human_in_segment(strong, CFG)


def random_timeline(rng, n, p_bear=0.5, p_human=0.2):
    times = np.cumsum(rng.exponential(8.0, size=n)) + 0.01
    out = []
    for t in times:
        bear = bool(rng.random() < p_bear)
        seg = BEAR_SEG if bear else NO_SEG
        out.append((float(t), seg, bool(rng.random() < p_human)))
    return out


def test_random_timelines_match_reference_interpreter():
    rng = np.random.default_rng(17)
    for _ in range(100):
        cfg = ControllerConfig(
            cooldown=float(rng.uniform(1, 40)),
            spray_duration=float(rng.uniform(0.5, 3)),
            canister_total_sprays=int(rng.integers(1, 6)),
        )
        tl = random_timeline(rng, int(rng.integers(0, 40)))
        events, _ = run_timeline(tl, cfg)
        got = [
            (e.kind.value, e.timestamp, e.payload["sprays_remaining_after"], e.payload["trigger_time"])
            if e.kind is EventKind.SPRAY_TRIGGERED
            else (e.kind.value, e.timestamp, e.payload["sprays_remaining"])
            for e in events
        ]
        expected = reference_controller([(t, s.decision is Decision.BEAR_DETECTED, h) for t, s, h in tl], cfg)
        assert got == expected


def test_deterministic_bytes():
    rng = np.random.default_rng(4)
    tl = random_timeline(rng, 50)
    a = events_to_bytes(run_timeline(tl, CFG)[0])
    b = events_to_bytes(run_timeline(tl, dataclasses.replace(CFG))[0])
    assert a == b and a

"""
Scenario engine: entities move on a ground plane in front of a camera at the origin
facing +x, and a seeded synthetic detector turns visible entities into per-frame
detections. Detector draws are independent across frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, NamedTuple, Sequence

import numpy as np
from scipy.stats import truncnorm

from .controller import ControllerConfig, ControllerState, human_in_segment, step
from .core import (
    FRAME_SIZE,
    MAX_DETECTIONS_PER_FRAME,
    BoundingBox,
    Detection,
    EventKind,
    EventRecord,
    Frame,
    Lighting,
    ObjectClass,
    Segment,
)
from .metrics import MetricsReport, build_report, evaluate_classes, segment_truth
from .segment_filter import FilterConfig, segment_stream

AZIMUTH_TOLERANCE_DEG = 1e-9
MIN_RANGE_M = 0.1


@dataclass(frozen=True)
class CameraSpec:
    horizontal_fov: float = 90.0
    vertical_fov: float = 60.0
    max_detection_range: float = 25.0
    frame_rate: float = 10.0

    def __post_init__(self) -> None:
        for name in ("horizontal_fov", "vertical_fov"):
            if not 0 < getattr(self, name) < 180:
                raise ValueError(f"{name} must be in (0, 180) degrees")
        if not self.max_detection_range > 0:
            raise ValueError("max_detection_range must be > 0")
        if not self.frame_rate > 0:
            raise ValueError("frame_rate must be > 0")


@dataclass(frozen=True)
class EntityTrack:
    """Piecewise-linear ground track; the entity holds its first and last position
    outside the waypoint time span."""

    entity_class: ObjectClass
    waypoints: tuple[tuple[float, float, float], ...]
    size: float = 1.5

    def __post_init__(self) -> None:
        object.__setattr__(self, "entity_class", ObjectClass(self.entity_class))
        wps = tuple(tuple(float(v) for v in wp) for wp in self.waypoints)
        object.__setattr__(self, "waypoints", wps)
        if not wps:
            raise ValueError("track needs at least one waypoint")
        if any(len(wp) != 3 for wp in wps):
            raise ValueError("waypoints are (time, x, y) triples")
        if any(b[0] <= a[0] for a, b in zip(wps, wps[1:])):
            raise ValueError("waypoint times must strictly increase")
        if not self.size > 0:
            raise ValueError("size must be > 0")

    def positions(self, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        t = [wp[0] for wp in self.waypoints]
        x = np.interp(times, t, [wp[1] for wp in self.waypoints])
        y = np.interp(times, t, [wp[2] for wp in self.waypoints])
        return x, y


def _default_confusion() -> dict[ObjectClass, float]:
    return {ObjectClass.TIBETAN_MASTIFF: 0.00243, ObjectClass.YAK: 0.00222}


@dataclass(frozen=True)
class DetectorProfile:
    true_positive_rate: float = 0.95
    confusion: Mapping[ObjectClass, float] = field(default_factory=_default_confusion)
    # class -> (mean, spread) of a normal truncated to [0, 1]
    confidence_distributions: Mapping[ObjectClass, tuple[float, float]] = field(default_factory=dict)
    night_degradation: float = 0.8
    seed: int = 0
    default_confidence: tuple[float, float] = (0.85, 0.1)
    confusion_confidence_floor: float = 0.70

    def __post_init__(self) -> None:
        object.__setattr__(self, "confusion", {ObjectClass(k): float(v) for k, v in self.confusion.items()})
        object.__setattr__(
            self,
            "confidence_distributions",
            {ObjectClass(k): (float(v[0]), float(v[1])) for k, v in self.confidence_distributions.items()},
        )
        probs = [self.true_positive_rate, *self.confusion.values()]
        if not all(0.0 <= p <= 1.0 for p in probs):
            raise ValueError("detector probabilities must lie in [0, 1]")
        if not 0.0 < self.night_degradation <= 1.0:
            raise ValueError("night_degradation must be in (0, 1]")
        for mean, spread in [self.default_confidence, *self.confidence_distributions.values()]:
            if not 0.0 <= mean <= 1.0 or spread < 0:
                raise ValueError("confidence distribution needs mean in [0, 1] and spread >= 0")
        if not 0.0 <= self.confusion_confidence_floor <= 1.0:
            raise ValueError("confusion_confidence_floor must be in [0, 1]")

    def confidence_params(self, cls: ObjectClass) -> tuple[float, float]:
        return self.confidence_distributions.get(cls, self.default_confidence)


@dataclass(frozen=True)
class Scenario:
    camera: CameraSpec = field(default_factory=CameraSpec)
    tracks: tuple[EntityTrack, ...] = ()
    duration: float = 60.0
    lighting: Lighting = Lighting.DAY
    detector: DetectorProfile = field(default_factory=DetectorProfile)
    device_id: str = "unit-0"

    def __post_init__(self) -> None:
        object.__setattr__(self, "tracks", tuple(self.tracks))
        object.__setattr__(self, "lighting", Lighting(self.lighting))
        if not self.duration > 0:
            raise ValueError("duration must be > 0")
        for tr in self.tracks:
            if tr.waypoints[0][0] < 0 or tr.waypoints[-1][0] > self.duration:
                raise ValueError("waypoint times must lie within [0, duration]")

    @property
    def n_frames(self) -> int:
        return int(round(self.camera.frame_rate * self.duration))

    def frame_times(self) -> np.ndarray:
        return np.arange(self.n_frames) / self.camera.frame_rate


def visible(camera: CameraSpec, position: tuple[float, float]) -> bool:
    x, y = position
    return bool(_visible_mask(camera, np.asarray([x], float), np.asarray([y], float))[0])


def _visible_mask(camera: CameraSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    rng = np.hypot(x, y)
    az = np.degrees(np.arctan2(y, x))
    return (rng <= camera.max_detection_range) & (
        np.abs(az) <= camera.horizontal_fov / 2 + AZIMUTH_TOLERANCE_DEG
    )


def _project_boxes(camera: CameraSpec, x: np.ndarray, y: np.ndarray, size: float) -> np.ndarray:
    """Pinhole projection of a sphere of diameter ``size``; returns (n, 4) x, y, w, h."""
    dist = np.maximum(np.hypot(x, y), MIN_RANGE_M)
    ang = np.degrees(2 * np.arctan(size / 2 / dist))
    half = FRAME_SIZE / 2
    w = ang / camera.horizontal_fov * FRAME_SIZE
    h = ang / camera.vertical_fov * FRAME_SIZE
    cx = half - np.degrees(np.arctan2(y, x)) / (camera.horizontal_fov / 2) * half
    cy = np.full_like(cx, half)

    def span(center, extent):
        lo = np.round(np.clip(center - extent / 2, 0, FRAME_SIZE - 1), 3)
        hi = np.round(np.clip(center + extent / 2, 0, FRAME_SIZE), 3)
        hi = np.maximum(hi, lo + 1)
        return lo, hi - lo

    bx, bw = span(cx, w)
    by, bh = span(cy, h)
    return np.stack([bx, by, bw, bh], axis=1)


def _truncated_normal(rng: np.random.Generator, mean: float, spread: float, lo: float, n: int) -> np.ndarray:
    if spread == 0:
        return np.full(n, min(max(mean, lo), 1.0))
    a, b = (lo - mean) / spread, (1.0 - mean) / spread
    return np.clip(truncnorm.rvs(a, b, loc=mean, scale=spread, size=n, random_state=rng), lo, 1.0)


class _EntityView(NamedTuple):
    track: EntityTrack
    visible: np.ndarray
    boxes: np.ndarray


def _entity_views(scenario: Scenario) -> list[_EntityView]:
    times = scenario.frame_times()
    views = []
    for tr in scenario.tracks:
        x, y = tr.positions(times)
        views.append(_EntityView(tr, _visible_mask(scenario.camera, x, y), _project_boxes(scenario.camera, x, y, tr.size)))
    return views


class _BoxCache(dict):
    def __missing__(self, key):
        box = self[key] = BoundingBox(*key)
        return box


def render_frames(scenario: Scenario) -> list[Frame]:
    """Sample the synthetic detector over every frame of ``scenario``.

    For each visible entity and frame: a correct-class detection with probability
    TPR (times the night factor in the dark), and for confusable classes a Bear
    detection at or above the confusion confidence floor with the class's
    confusion probability. Random draws are taken for every frame regardless of
    visibility so a given seed yields the same stream whatever the geometry.
    """
    det = scenario.detector
    rng = np.random.default_rng(det.seed)
    n = scenario.n_frames
    tpr = det.true_positive_rate
    if scenario.lighting is Lighting.NIGHT:
        tpr *= det.night_degradation
    boxes = _BoxCache()
    per_frame: dict[int, list[Detection]] = {}

    for view in _entity_views(scenario):
        cls = view.track.entity_class
        hit = rng.random(n) < tpr
        conf = _truncated_normal(rng, *det.confidence_params(cls), 0.0, n)
        p_conf = det.confusion.get(cls, 0.0) if cls is not ObjectClass.BEAR else 0.0
        confused = rng.random(n) < p_conf
        bear_mean, bear_spread = det.confidence_params(ObjectClass.BEAR)
        conf_bear = _truncated_normal(rng, bear_mean, bear_spread, det.confusion_confidence_floor, n)

        for i in np.flatnonzero(view.visible & (hit | confused)):
            box = boxes[tuple(view.boxes[i].tolist())]
            dets = per_frame.setdefault(int(i), [])
            if hit[i]:
                dets.append(Detection(cls, float(conf[i]), box))
            if confused[i]:
                dets.append(Detection(ObjectClass.BEAR, float(conf_bear[i]), box))

    times = scenario.frame_times()
    frames = []
    for i in range(n):
        dets = per_frame.get(i)
        if dets and len(dets) > MAX_DETECTIONS_PER_FRAME:
            dets = sorted(dets, key=lambda d: -d.confidence)[:MAX_DETECTIONS_PER_FRAME]
        frames.append(Frame(i, float(times[i]), tuple(dets) if dets else (), scenario.lighting))
    return frames


def ground_truth_frames(scenario: Scenario) -> list[tuple[Detection, ...]]:
    """Per-frame ground truth: every visible entity at confidence 1."""
    gt: list[list[Detection]] = [[] for _ in range(scenario.n_frames)]
    boxes = _BoxCache()
    for view in _entity_views(scenario):
        for i in np.flatnonzero(view.visible):
            gt[i].append(Detection(view.track.entity_class, 1.0, boxes[tuple(view.boxes[i].tolist())]))
    return [tuple(g) for g in gt]


class PipelineResult(NamedTuple):
    segments: list[Segment]
    events: list[EventRecord]
    report: MetricsReport
    final_state: ControllerState


def segment_decision_record(device_id: str, segment: Segment, human: bool) -> EventRecord:
    return EventRecord(
        device_id,
        segment.end_time,
        EventKind.SEGMENT_DECISION,
        {
            "segment_start": segment.start_index,
            "frames": len(segment.frames),
            "decision": segment.decision.value,
            "max_bear_confidence": segment.max_bear_confidence,
            "human_present": human,
            "lighting": segment.frames[0].lighting.value,
        },
    )


def run_pipeline(
    scenario: Scenario, filter_cfg: FilterConfig, ctrl_cfg: ControllerConfig
) -> PipelineResult:
    """Render, segment, drive the controller and score one scenario.

    Every segment yields a SegmentDecision record stamped at its last frame,
    followed by the controller's event for that segment, if any.
    """
    frames = render_frames(scenario)
    segments = segment_stream(frames, filter_cfg)
    state = ControllerState.initial(ctrl_cfg)
    events: list[EventRecord] = []
    for seg in segments:
        human = human_in_segment(seg, ctrl_cfg)
        events.append(segment_decision_record(ctrl_cfg.device_id, seg, human))
        state, event = step(state, seg, human, seg.end_time, ctrl_cfg)
        if event is not None:
            events.append(event)

    gt = ground_truth_frames(scenario)
    preds = [(f.index, f.detections) for f in frames if f.detections]
    truth = [(i, g) for i, g in enumerate(gt) if g]
    classes = evaluate_classes(preds, truth)
    labelled = [
        (segment_truth(gt[s.start_index : s.start_index + len(s.frames)]), s.decision) for s in segments
    ]
    report = build_report(classes, labelled, strict=False)
    return PipelineResult(segments, events, report, state)


def event_counts(events: Sequence[EventRecord]) -> dict[str, int]:
    kinds = [e.kind for e in events]
    return {
        "segments": kinds.count(EventKind.SEGMENT_DECISION),
        "sprays": kinds.count(EventKind.SPRAY_TRIGGERED),
        "inhibits": kinds.count(EventKind.SPRAY_INHIBITED),
        "battery_low": kinds.count(EventKind.BATTERY_LOW),
    }


def misfire_scenario(
    entity_class: ObjectClass,
    per_frame_p: float,
    n_segments: int,
    *,
    seed: int = 0,
    segment_length: int = 10,
    camera: CameraSpec | None = None,
) -> Scenario:
    """A stationary, always-visible non-bear entity used to measure segment misfire rates."""
    camera = camera or CameraSpec()
    duration = n_segments * segment_length / camera.frame_rate
    track = EntityTrack(entity_class, ((0.0, 10.0, 0.0),), size=1.0)
    detector = DetectorProfile(confusion={entity_class: per_frame_p}, seed=seed)
    return Scenario(camera, (track,), duration, Lighting.DAY, detector)


# ---- JSON (de)serialisation ----------------------------------------------------


def scenario_from_dict(obj: Mapping[str, Any]) -> Scenario:
    """Build a Scenario from its JSON form; raises KeyError/TypeError on shape errors
    and ValueError on invariant violations."""
    known = {"camera", "tracks", "duration", "lighting", "detector", "device_id"}
    unknown = set(obj) - known
    if unknown:
        raise KeyError(f"unknown scenario keys {sorted(unknown)}")
    camera = CameraSpec(**obj.get("camera", {}))
    tracks = tuple(
        EntityTrack(
            ObjectClass(t["class"]),
            tuple(tuple(wp) for wp in t["waypoints"]),
            t.get("size", 1.5),
        )
        for t in obj.get("tracks", [])
    )
    d = dict(obj.get("detector", {}))
    if "confidence_distributions" in d:
        d["confidence_distributions"] = {
            k: (v["mean"], v["spread"]) if isinstance(v, Mapping) else tuple(v)
            for k, v in d["confidence_distributions"].items()
        }
    if "default_confidence" in d:
        v = d["default_confidence"]
        d["default_confidence"] = (v["mean"], v["spread"]) if isinstance(v, Mapping) else tuple(v)
    detector = DetectorProfile(**d)
    return Scenario(
        camera=camera,
        tracks=tracks,
        duration=float(obj["duration"]),
        lighting=Lighting(obj.get("lighting", "Day")),
        detector=detector,
        device_id=obj.get("device_id", "unit-0"),
    )


def scenario_to_dict(s: Scenario) -> dict[str, Any]:
    det = s.detector
    return {
        "duration": s.duration,
        "lighting": s.lighting.value,
        "device_id": s.device_id,
        "camera": dict(s.camera.__dict__),
        "detector": {
            "true_positive_rate": det.true_positive_rate,
            "confusion": {k.value: v for k, v in det.confusion.items()},
            "confidence_distributions": {
                k.value: {"mean": m, "spread": sp} for k, (m, sp) in det.confidence_distributions.items()
            },
            "default_confidence": {"mean": det.default_confidence[0], "spread": det.default_confidence[1]},
            "night_degradation": det.night_degradation,
            "confusion_confidence_floor": det.confusion_confidence_floor,
            "seed": det.seed,
        },
        "tracks": [
            {"class": t.entity_class.value, "size": t.size, "waypoints": [list(wp) for wp in t.waypoints]}
            for t in s.tracks
        ],
    }


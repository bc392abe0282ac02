"""
Domain types shared across the pipeline, plus the event-log and annotation formats.

All coordinates live in the 224x224 detector input frame. Every type is a frozen
value object; constructors validate and raise ``ValueError`` on bad input so that
downstream code can assume validity.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Any, Iterable, Sequence

FRAME_SIZE = 224
MAX_DETECTIONS_PER_FRAME = 10
# absorbs float round-off in x + w
_EDGE_TOL = 1e-9


class BearGuardError(Exception):
    """Base class for errors raised by this package."""


class InputError(BearGuardError, ValueError):
    """Input could not be parsed (bad file, bad line, unknown name)."""

    def __init__(self, message: str, *, source: str | None = None, line: int | None = None):
        self.source = source
        self.line = line
        where = ""
        if source is not None:
            where += f"{source}: "
        if line is not None:
            where += f"line {line}: "
        super().__init__(where + message)


class DomainError(BearGuardError, ValueError):
    """Input parsed but violates a domain rule."""


class EventLogWriteError(OSError):
    def __init__(self, message: str, records_written: int, bytes_written: int):
        super().__init__(
            f"{message} (after {records_written} complete records, {bytes_written} bytes)"
        )
        self.records_written = records_written
        self.bytes_written = bytes_written


class ObjectClass(str, Enum):
    BEAR = "Bear"
    HUMAN = "Human"
    YAK = "Yak"
    TIBETAN_MASTIFF = "TibetanMastiff"
    OTHER = "Other"

    @classmethod
    def parse(cls, name: str) -> "ObjectClass":
        try:
            return cls(name)
        except ValueError:
            raise InputError(f"unknown object class {name!r}") from None


class Lighting(str, Enum):
    DAY = "Day"
    NIGHT = "Night"


class Decision(str, Enum):
    BEAR_DETECTED = "BearDetected"
    NO_BEAR = "NoBear"


class EventKind(str, Enum):
    SEGMENT_DECISION = "SegmentDecision"
    SPRAY_TRIGGERED = "SprayTriggered"
    SPRAY_INHIBITED = "SprayInhibited"
    BATTERY_LOW = "BatteryLow"


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in detector pixels, (x, y) is the top-left corner."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "w", "h"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"bbox {name} is not finite")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"bbox must have positive size, got w={self.w}, h={self.h}")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"bbox origin outside frame: ({self.x}, {self.y})")
        if self.x + self.w > FRAME_SIZE + _EDGE_TOL or self.y + self.h > FRAME_SIZE + _EDGE_TOL:
            raise ValueError(
                f"bbox extends past the {FRAME_SIZE}x{FRAME_SIZE} frame: "
                f"x+w={self.x + self.w}, y+h={self.y + self.h}"
            )

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class Detection:
    object_class: ObjectClass
    confidence: float
    bbox: BoundingBox

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class Frame:
    index: int
    timestamp: float
    detections: tuple[Detection, ...] = ()
    lighting: Lighting = Lighting.DAY

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"frame index must be non-negative, got {self.index}")
        if not isinstance(self.detections, tuple):
            object.__setattr__(self, "detections", tuple(self.detections))
        if len(self.detections) > MAX_DETECTIONS_PER_FRAME:
            raise ValueError(
                f"frame {self.index} has {len(self.detections)} detections, "
                f"limit is {MAX_DETECTIONS_PER_FRAME}"
            )


def check_frame_order(frames: Sequence[Frame]) -> None:
    """Raise ``ValueError`` unless indices are consecutive and timestamps strictly increase."""
    for prev, cur in zip(frames, frames[1:]):
        if cur.index != prev.index + 1:
            raise ValueError(f"frame index jumps from {prev.index} to {cur.index}")
        if not cur.timestamp > prev.timestamp:
            raise ValueError(
                f"frame {cur.index} timestamp {cur.timestamp} does not follow {prev.timestamp}"
            )


@dataclass(frozen=True)
class Segment:
    frames: tuple[Frame, ...]
    decision: Decision
    max_bear_confidence: float

    def __post_init__(self) -> None:
        if not isinstance(self.frames, tuple):
            object.__setattr__(self, "frames", tuple(self.frames))
        if not self.frames:
            raise ValueError("segment needs at least one frame")
        check_frame_order(self.frames)
        if not 0.0 <= self.max_bear_confidence <= 1.0:
            raise ValueError(f"max_bear_confidence out of range: {self.max_bear_confidence}")

    @property
    def start_index(self) -> int:
        return self.frames[0].index

    @property
    def end_time(self) -> float:
        return self.frames[-1].timestamp


@dataclass(frozen=True)
class EventRecord:
    device_id: str
    timestamp: float
    kind: EventKind
    payload: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> str:
        obj = {
            "device_id": self.device_id,
            "timestamp": self.timestamp,
            "kind": self.kind.value,
            "payload": self.payload,
        }
        return json.dumps(obj, ensure_ascii=False, allow_nan=False)

    @classmethod
    def from_obj(cls, obj: Any) -> "EventRecord":
        if not isinstance(obj, dict):
            raise ValueError("record is not a JSON object")
        missing = {"device_id", "timestamp", "kind", "payload"} - obj.keys()
        if missing:
            raise ValueError(f"record missing keys: {sorted(missing)}")
        device_id, ts, kind, payload = obj["device_id"], obj["timestamp"], obj["kind"], obj["payload"]
        if not isinstance(device_id, str):
            raise ValueError("device_id must be a string")
        if isinstance(ts, bool) or not isinstance(ts, (int, float)):
            raise ValueError("timestamp must be a number")
        if not isinstance(payload, dict):
            raise ValueError("payload must be an object")
        try:
            kind = EventKind(kind)
        except ValueError:
            raise ValueError(f"unknown event kind {kind!r}") from None
        return cls(device_id, ts, kind, payload)


def write_event_log(records: Iterable[EventRecord], sink: IO[bytes]) -> int:
    """Write ``records`` as JSONL to a binary stream and return the byte count."""
    written = 0
    count = 0
    last_ts = -math.inf
    for rec in records:
        if rec.timestamp < last_ts:
            raise ValueError(
                f"record {count} timestamp {rec.timestamp} precedes {last_ts}; log must be time-ordered"
            )
        last_ts = rec.timestamp
        data = (rec.to_json() + "\n").encode("utf-8")
        try:
            sink.write(data)
        except OSError as exc:
            raise EventLogWriteError(f"event log write failed: {exc}", count, written) from exc
        written += len(data)
        count += 1
    return written


def read_event_log(source: IO[bytes], name: str | None = None) -> list[EventRecord]:
    records = []
    for lineno, raw in enumerate(source, start=1):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InputError(f"invalid UTF-8: {exc}", source=name, line=lineno) from None
        if not text.strip():
            continue
        try:
            records.append(EventRecord.from_obj(json.loads(text)))
        except ValueError as exc:
            # json.JSONDecodeError is a ValueError too
            raise InputError(f"malformed event record: {exc}", source=name, line=lineno) from None
    return records


ANNOTATION_HEADER = ["frame", "class", "conf", "x", "y", "w", "h"]


def read_annotations(
    source: IO[str], name: str | None = None
) -> list[tuple[int, list[Detection]]]:
    """Parse a ``frame,class,conf,x,y,w,h`` CSV into detections grouped by frame."""
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None:
        return []
    if [h.strip() for h in header] != ANNOTATION_HEADER:
        raise InputError(f"expected header {','.join(ANNOTATION_HEADER)}", source=name, line=1)
    grouped: dict[int, list[Detection]] = {}
    for row in reader:
        lineno = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(ANNOTATION_HEADER):
            raise InputError(f"expected 7 fields, got {len(row)}", source=name, line=lineno)
        try:
            frame = int(row[0])
            if frame < 0:
                raise ValueError(f"negative frame index {frame}")
            cls = ObjectClass.parse(row[1].strip())
            conf, x, y, w, h = (float(v) for v in row[2:])
            det = Detection(cls, conf, BoundingBox(x, y, w, h))
        except ValueError as exc:
            raise InputError(str(exc), source=name, line=lineno) from None
        grouped.setdefault(frame, []).append(det)
    return sorted(grouped.items())


def write_annotations(frames: Iterable[tuple[int, Sequence[Detection]]], sink: IO[str]) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(ANNOTATION_HEADER)
    for index, dets in frames:
        for d in dets:
            b = d.bbox
            writer.writerow(
                [index, d.object_class.value, _fmt(d.confidence), _fmt(b.x), _fmt(b.y), _fmt(b.w), _fmt(b.h)]
            )


def _fmt(v: float) -> str:
    return repr(float(v)) if not float(v).is_integer() else str(int(v))


def events_to_bytes(records: Iterable[EventRecord]) -> bytes:
    buf = io.BytesIO()
    write_event_log(records, buf)
    return buf.getvalue()

"""Video-level bear decision: a window of frames is a bear sighting if any frame's
bear confidence reaches the threshold."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .core import Decision, Frame, ObjectClass, Segment, check_frame_order


class Windowing(str, Enum):
    TUMBLING = "Tumbling"
    SLIDING = "Sliding"


@dataclass(frozen=True)
class FilterConfig:
    segment_length: int = 10
    bear_threshold: float = 0.70
    windowing: Windowing = Windowing.TUMBLING

    def __post_init__(self) -> None:
        if isinstance(self.segment_length, bool) or not isinstance(self.segment_length, int):
            raise ValueError("segment_length must be an integer")
        if self.segment_length < 1:
            raise ValueError(f"segment_length must be >= 1, got {self.segment_length}")
        if not 0.0 < self.bear_threshold <= 1.0:
            raise ValueError(f"bear_threshold must be in (0, 1], got {self.bear_threshold}")
        object.__setattr__(self, "windowing", Windowing(self.windowing))


def frame_bear_confidence(frame: Frame) -> float:
    return max(
        (d.confidence for d in frame.detections if d.object_class is ObjectClass.BEAR),
        default=0.0,
    )


def classify_segment(frames: Sequence[Frame], cfg: FilterConfig) -> Segment:
    if len(frames) != cfg.segment_length:
        raise ValueError(f"expected {cfg.segment_length} frames, got {len(frames)}")
    peak = max(frame_bear_confidence(f) for f in frames)
    # equality counts as a detection
    decision = Decision.BEAR_DETECTED if peak >= cfg.bear_threshold else Decision.NO_BEAR
    return Segment(tuple(frames), decision, peak)


def segment_stream(frames: Sequence[Frame], cfg: FilterConfig) -> list[Segment]:
    """Cut a frame stream into windows and classify each.

    Tumbling windows are disjoint and a trailing partial window is dropped. Sliding
    windows advance one frame at a time.
    """
    frames = list(frames)
    check_frame_order(frames)
    n = cfg.segment_length
    if cfg.windowing is Windowing.TUMBLING:
        starts = range(0, len(frames) - n + 1, n)
    else:
        starts = range(0, len(frames) - n + 1)
    return [classify_segment(frames[s : s + n], cfg) for s in starts]

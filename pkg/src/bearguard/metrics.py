"""
Detection and video-level evaluation metrics.

Conventions (the usual modern ones): IoU matching threshold 0.5, greedy matching in
descending confidence order, all-point interpolated AP over the precision envelope.
The false-positive rate is counted over non-bear *segments*, not frames.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import BoundingBox, Decision, Detection, DomainError, Frame, ObjectClass
from .segment_filter import FilterConfig, segment_stream

DEFAULT_IOU_THRESHOLD = 0.5


def iou(a: BoundingBox, b: BoundingBox) -> float:
    ix = max(0.0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0.0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.area + b.area - inter
    return min(1.0, inter / union)


@dataclass(frozen=True)
class MatchResult:
    true_positives: int
    false_positives: int
    false_negatives: int
    # (prediction index, ground-truth index, iou)
    matched_pairs: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self) -> None:
        preds = [p for p, _, _ in self.matched_pairs]
        gts = [g for _, g, _ in self.matched_pairs]
        if len(set(preds)) != len(preds) or len(set(gts)) != len(gts):
            raise ValueError("an index appears in more than one matched pair")
        if self.true_positives != len(self.matched_pairs):
            raise ValueError("true_positives must equal the number of matched pairs")

    def tp_flags(self, n_preds: int) -> list[bool]:
        flags = [False] * n_preds
        for p, _, _ in self.matched_pairs:
            flags[p] = True
        return flags


def confidence_order(preds: Sequence[Detection]) -> list[int]:
    """Indices sorted by descending confidence, ties by ascending index."""
    return sorted(range(len(preds)), key=lambda i: (-preds[i].confidence, i))


def match_greedy(
    preds: Sequence[Detection],
    gts: Sequence[Detection],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> MatchResult:
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    unmatched = set(range(len(gts)))
    pairs = []
    for p in confidence_order(preds):
        best_g, best_iou = -1, -1.0
        for g in sorted(unmatched):
            v = iou(preds[p].bbox, gts[g].bbox)
            if v >= iou_threshold and v > best_iou:
                best_g, best_iou = g, v
        if best_g >= 0:
            unmatched.discard(best_g)
            pairs.append((p, best_g, best_iou))
    tp = len(pairs)
    return MatchResult(tp, len(preds) - tp, len(gts) - tp, tuple(pairs))


def precision_recall_curve(
    ranked: Sequence[tuple[float, bool]], total_gt: int
) -> tuple[np.ndarray, np.ndarray]:
    """Precision and recall at every rank cut of a confidence-sorted list."""
    flags = np.array([bool(f) for _, f in ranked], dtype=bool)
    tp = np.cumsum(flags)
    fp = np.cumsum(~flags)
    recall = tp / total_gt
    precision = tp / np.maximum(tp + fp, 1)
    return precision, recall


def average_precision(ranked: Sequence[tuple[float, bool]], total_gt: int) -> float:
    """All-point interpolated AP for a list sorted by descending confidence."""
    if total_gt <= 0:
        raise ValueError("no ground truth")
    n_tp = sum(1 for _, f in ranked if f)
    if n_tp > total_gt:
        raise ValueError(f"{n_tp} true positives exceed total_gt={total_gt}")
    confs = [c for c, _ in ranked]
    if any(a < b for a, b in zip(confs, confs[1:])):
        raise ValueError("ranked list must be sorted by descending confidence")
    if not ranked:
        return 0.0
    precision, recall = precision_recall_curve(ranked, total_gt)
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.nonzero(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def mean_average_precision(per_class_ap: Mapping[ObjectClass, float]) -> float:
    if not per_class_ap:
        raise ValueError("mean_average_precision needs at least one class")
    return math.fsum(per_class_ap.values()) / len(per_class_ap)


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def false_positive_rate(fp: int, tn: int) -> float:
    if fp + tn <= 0:
        raise ValueError("false_positive_rate needs fp + tn > 0")
    return fp / (fp + tn)


def video_misclassification_rate(
    segments: Sequence[tuple[ObjectClass, Decision]],
) -> dict[ObjectClass, float]:
    """Fraction of each non-bear class's segments that were flagged as bear."""
    totals: Counter[ObjectClass] = Counter()
    flagged: Counter[ObjectClass] = Counter()
    for cls, decision in segments:
        if cls is ObjectClass.BEAR:
            continue
        totals[cls] += 1
        if decision is Decision.BEAR_DETECTED:
            flagged[cls] += 1
    return {cls: flagged[cls] / totals[cls] for cls in ObjectClass if totals[cls]}


def _is_ratio(v: float) -> bool:
    return 0.0 <= v <= 1.0


@dataclass(frozen=True)
class MetricsReport:
    map_value: float
    precision: float
    recall: float
    f1: float
    fpr: float
    per_class_video_misid: dict[ObjectClass, float] = field(default_factory=dict)
    per_class_ap: dict[ObjectClass, float] = field(default_factory=dict)
    true_positives: int = 0
    false_positives: int = 0
    false_negatives: int = 0
    segments: int = 0
    negative_segments: int = 0

    def __post_init__(self) -> None:
        ratios = [self.map_value, self.precision, self.recall, self.f1, self.fpr]
        ratios += list(self.per_class_video_misid.values()) + list(self.per_class_ap.values())
        if not all(_is_ratio(v) for v in ratios):
            raise ValueError("every ratio in a MetricsReport must lie in [0, 1]")
        if not math.isclose(self.f1, f1_score(self.precision, self.recall), abs_tol=1e-12):
            raise ValueError("f1 is inconsistent with precision and recall")

    def to_dict(self) -> dict:
        return {
            "map": self.map_value,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "fpr": self.fpr,
            "per_class_video_misid": {c.value: v for c, v in self.per_class_video_misid.items()},
            "per_class_ap": {c.value: v for c, v in self.per_class_ap.items()},
            "true_positives": self.true_positives,
            "false_positives": self.false_positives,
            "false_negatives": self.false_negatives,
            "segments": self.segments,
            "negative_segments": self.negative_segments,
        }


@dataclass
class ClassEvaluation:
    """Pooled matching outcome for one class across all frames."""

    ranked: list[tuple[float, bool]]
    total_gt: int

    @property
    def tp(self) -> int:
        return sum(1 for _, f in self.ranked if f)

    @property
    def fp(self) -> int:
        return len(self.ranked) - self.tp


FrameDetections = Sequence[tuple[int, Sequence[Detection]]]


def evaluate_classes(
    predictions: FrameDetections,
    ground_truth: FrameDetections,
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> dict[ObjectClass, ClassEvaluation]:
    """Match per frame and class, then pool ranked (confidence, is_tp) lists per class.

    Classes are those present in either input. A class with predictions but no ground
    truth has ``total_gt == 0``; callers decide whether that is an error.
    """
    preds_by_frame = {i: list(d) for i, d in predictions}
    gts_by_frame = {i: list(d) for i, d in ground_truth}
    classes = {d.object_class for _, ds in predictions for d in ds}
    classes |= {d.object_class for _, ds in ground_truth for d in ds}
    out: dict[ObjectClass, ClassEvaluation] = {}
    for cls in sorted(classes, key=lambda c: list(ObjectClass).index(c)):
        scored: list[tuple[float, int, bool]] = []
        total_gt = 0
        order = 0
        for frame in sorted(preds_by_frame.keys() | gts_by_frame.keys()):
            p = [d for d in preds_by_frame.get(frame, []) if d.object_class is cls]
            g = [d for d in gts_by_frame.get(frame, []) if d.object_class is cls]
            total_gt += len(g)
            flags = match_greedy(p, g, iou_threshold).tp_flags(len(p))
            for d, f in zip(p, flags):
                scored.append((d.confidence, order, f))
                order += 1
        scored.sort(key=lambda t: (-t[0], t[1]))
        out[cls] = ClassEvaluation([(c, f) for c, _, f in scored], total_gt)
    return out


def segment_truth(frames: Sequence[Sequence[Detection]]) -> ObjectClass:
    """Ground-truth label of a segment: Bear if any bear appears, else the most common class."""
    counts: Counter[ObjectClass] = Counter(d.object_class for ds in frames for d in ds)
    if counts[ObjectClass.BEAR]:
        return ObjectClass.BEAR
    if not counts:
        return ObjectClass.OTHER
    order = list(ObjectClass)
    return max(counts, key=lambda c: (counts[c], -order.index(c)))


def build_report(
    classes: Mapping[ObjectClass, ClassEvaluation],
    labelled_segments: Sequence[tuple[ObjectClass, Decision]],
    *,
    strict: bool = True,
) -> MetricsReport:
    """Combine pooled detection results and segment decisions into a report.

    Precision and recall are pooled over every class and every prediction (no
    confidence cut). mAP averages AP over the classes that have ground truth. With
    ``strict`` a prediction class absent from ground truth, or no ground truth at
    all, raises ``DomainError``; otherwise the undefined quantities report 0.
    """
    with_gt = {c: e for c, e in classes.items() if e.total_gt > 0}
    orphan = sorted(c.value for c, e in classes.items() if e.total_gt == 0 and e.ranked)
    if strict and orphan:
        raise DomainError(f"class mismatch: predictions for {orphan} have no ground truth")
    if strict and not with_gt:
        raise DomainError("ground truth is empty")
    per_class_ap = {c: average_precision(e.ranked, e.total_gt) for c, e in with_gt.items()}
    map_value = mean_average_precision(per_class_ap) if per_class_ap else 0.0
    tp = sum(e.tp for e in classes.values())
    fp = sum(e.fp for e in classes.values())
    total_gt = sum(e.total_gt for e in classes.values())
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / total_gt if total_gt else 0.0

    negatives = [d for c, d in labelled_segments if c is not ObjectClass.BEAR]
    seg_fp = sum(1 for d in negatives if d is Decision.BEAR_DETECTED)
    fpr = false_positive_rate(seg_fp, len(negatives) - seg_fp) if negatives else 0.0

    return MetricsReport(
        map_value=map_value,
        precision=precision,
        recall=recall,
        f1=f1_score(precision, recall),
        fpr=fpr,
        per_class_video_misid=video_misclassification_rate(labelled_segments),
        per_class_ap=per_class_ap,
        true_positives=tp,
        false_positives=fp,
        false_negatives=total_gt - tp,
        segments=len(labelled_segments),
        negative_segments=len(negatives),
    )


def frames_from_dataset(
    detections: FrameDetections, n_frames: int, frame_period: float = 0.1
) -> list[Frame]:
    """Densify a sparse (frame, detections) listing into a consecutive frame stream."""
    by_index = {i: tuple(d) for i, d in detections}
    return [Frame(i, i * frame_period, by_index.get(i, ())) for i in range(n_frames)]


def evaluate_dataset(
    predictions: FrameDetections,
    ground_truth: FrameDetections,
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    filter_cfg: FilterConfig | None = None,
    *,
    strict: bool = True,
) -> MetricsReport:
    """Score a prediction CSV against a ground-truth CSV.

    Frames run from 0 to the highest index in either file; frames absent from
    both are empty. Segments are cut with ``filter_cfg`` and labelled from the
    ground truth for the segment-level FPR and video misidentification rates.
    """
    filter_cfg = filter_cfg or FilterConfig()
    classes = evaluate_classes(predictions, ground_truth, iou_threshold)
    indices = [i for i, _ in predictions] + [i for i, _ in ground_truth]
    n_frames = max(indices) + 1 if indices else 0
    segments = segment_stream(frames_from_dataset(predictions, n_frames), filter_cfg)
    gt_by_frame = {i: d for i, d in ground_truth}
    labelled = [
        (
            segment_truth([gt_by_frame.get(f.index, ()) for f in s.frames]),
            s.decision,
        )
        for s in segments
    ]
    return build_report(classes, labelled, strict=strict)

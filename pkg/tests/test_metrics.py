import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from bearguard.core import BoundingBox, Decision, Detection, DomainError, ObjectClass
from bearguard.metrics import (
    ClassEvaluation,
    MetricsReport,
    average_precision,
    build_report,
    evaluate_classes,
    evaluate_dataset,
    f1_score,
    false_positive_rate,
    iou,
    match_greedy,
    mean_average_precision,
    segment_truth,
    video_misclassification_rate,
)
from oracles import brute_force_match, raster_iou, staircase_ap

BEAR = ObjectClass.BEAR


def det(x, y, w, h, conf=1.0, cls=BEAR):
    return Detection(cls, conf, BoundingBox(x, y, w, h))


@st.composite
def int_boxes(draw):
    w = draw(st.integers(1, 120))
    h = draw(st.integers(1, 120))
    x = draw(st.integers(0, 224 - w))
    y = draw(st.integers(0, 224 - h))
    return BoundingBox(x, y, w, h)


# ---- iou -----------------------------------------------------------------------


def test_iou_examples():
    a = BoundingBox(0, 0, 10, 10)
    assert iou(a, a) == 1.0
    assert iou(a, BoundingBox(100, 100, 10, 10)) == 0.0
    assert iou(a, BoundingBox(5, 0, 10, 10)) == pytest.approx(0.3333333333333333, abs=1e-15)
    assert iou(a, BoundingBox(10, 0, 10, 10)) == 0.0  # touching edges


@settings(max_examples=300, deadline=None)
@given(int_boxes(), int_boxes())
def test_iou_properties_and_raster_oracle(a, b):
    v = iou(a, b)
    assert 0.0 <= v <= 1.0
    assert v == iou(b, a)
    assert iou(a, a) == 1.0
    assert v == pytest.approx(raster_iou((a.x, a.y, a.w, a.h), (b.x, b.y, b.w, b.h)), abs=1e-12)


# ---- matching ------------------------------------------------------------------


def test_match_empty():
    r = match_greedy([], [], 0.5)
    assert (r.true_positives, r.false_positives, r.false_negatives) == (0, 0, 0)


def test_match_identity():
    d = det(10, 10, 50, 50)
    r = match_greedy([d], [d], 0.5)
    assert (r.true_positives, r.false_positives, r.false_negatives) == (1, 0, 0)
    assert r.matched_pairs == ((0, 0, 1.0),)


@pytest.mark.parametrize("t", [0.0, -0.1, 1.01])
def test_match_threshold_domain(t):
    with pytest.raises(ValueError):
        match_greedy([], [], t)


def test_higher_confidence_claims_first():
    gt = [det(0, 0, 20, 20)]
    weak_exact = det(0, 0, 20, 20, conf=0.6)
    strong_offset = det(4, 0, 20, 20, conf=0.9)
    r = match_greedy([weak_exact, strong_offset], gt, 0.5)
    assert r.matched_pairs[0][0] == 1
    assert r.tp_flags(2) == [False, True]


def test_confidence_ties_broken_by_input_order():
    gt = [det(0, 0, 20, 20)]
    r = match_greedy([det(0, 0, 20, 20, 0.8), det(0, 0, 20, 20, 0.8)], gt, 0.5)
    assert r.tp_flags(2) == [True, False]


def test_three_preds_two_gts_against_oracle():
    rng = np.random.default_rng(42)
    checked = 0
    for _ in range(200):
        gts = [det(*map(int, (rng.integers(0, 150), rng.integers(0, 150), rng.integers(20, 60), rng.integers(20, 60)))) for _ in range(2)]
        preds = []
        for _ in range(3):
            g = gts[int(rng.integers(2))].bbox
            dx, dy = (int(v) for v in rng.integers(-12, 13, size=2))
            x, y = min(max(g.x + dx, 0), 224 - g.w), min(max(g.y + dy, 0), 224 - g.h)
            preds.append(det(x, y, g.w, g.h, conf=round(float(rng.random()), 1)))
        flags = match_greedy(preds, gts, 0.5).tp_flags(3)
        expected = brute_force_match(
            [(p.confidence, p.bbox) for p in preds], [g.bbox for g in gts], iou, 0.5
        )
        assert flags == expected
        checked += any(expected)
    assert checked > 50


@settings(max_examples=200, deadline=None)
@given(
    st.lists(int_boxes(), max_size=6),
    st.lists(int_boxes(), max_size=6),
    st.lists(st.floats(0, 1), min_size=6, max_size=6),
    st.floats(0.05, 1.0),
)
def test_match_counts_conserved(pred_boxes, gt_boxes, confs, thr):
    preds = [Detection(BEAR, c, b) for b, c in zip(pred_boxes, confs)]
    gts = [Detection(BEAR, 1.0, b) for b in gt_boxes]
    r = match_greedy(preds, gts, thr)
    assert r.true_positives + r.false_negatives == len(gts)
    assert r.true_positives + r.false_positives == len(preds)
    assert all(v >= thr for _, _, v in r.matched_pairs)


# ---- AP ------------------------------------------------------------------------


def test_ap_perfect_detector():
    assert average_precision([(0.9, True), (0.8, True), (0.1, True)], 3) == 1.0


def test_ap_single_false_positive():
    assert average_precision([(0.9, False)], 1) == 0.0


def test_ap_five_element_staircase():
    ranked = [(0.9, True), (0.8, False), (0.7, True), (0.6, True), (0.5, False)]
    # frozen from the recall-level oracle, see tests/oracles.py
    assert average_precision(ranked, 4) == pytest.approx(0.625, abs=1e-12)
    assert staircase_ap([f for _, f in ranked], 4) == pytest.approx(0.625, abs=1e-12)


def test_ap_errors():
    with pytest.raises(ValueError, match="no ground truth"):
        average_precision([(0.5, True)], 0)
    with pytest.raises(ValueError, match="sorted"):
        average_precision([(0.1, True), (0.5, True)], 2)
    with pytest.raises(ValueError, match="exceed"):
        average_precision([(0.5, True), (0.4, True)], 1)


def test_ap_no_predictions():
    assert average_precision([], 3) == 0.0


@settings(max_examples=300, deadline=None)
@given(st.lists(st.booleans(), max_size=12), st.integers(0, 5), st.floats(0.01, 100))
def test_ap_matches_staircase_and_is_scale_invariant(flags, extra_gt, scale):
    total = sum(flags) + extra_gt
    assume(total > 0)
    confs = np.linspace(1.0, 0.01, len(flags)) if flags else []
    ranked = [(float(c), f) for c, f in zip(confs, flags)]
    ap = average_precision(ranked, total)
    assert ap == pytest.approx(staircase_ap(flags, total), abs=1e-9)
    rescaled = [(c * scale, f) for c, f in ranked]
    assert average_precision(rescaled, total) == ap


# ---- scalar metrics ------------------------------------------------------------


def test_map():
    assert mean_average_precision({BEAR: 1.0}) == 1.0
    assert mean_average_precision({BEAR: 0.8, ObjectClass.YAK: 0.6}) == pytest.approx(0.7, abs=1e-15)
    with pytest.raises(ValueError):
        mean_average_precision({})


def test_f1_examples():
    assert f1_score(1.0, 1.0) == 1.0
    assert f1_score(0.0, 0.9) == 0.0
    assert f1_score(0.0, 0.0) == 0.0
    # harmonic mean of 0.958 and 0.936
    assert f1_score(0.958, 0.936) == pytest.approx(0.9468722280887012, abs=1e-12)
    assert round(f1_score(0.958, 0.936), 3) == 0.947


@given(st.floats(1e-6, 1), st.floats(1e-6, 1))
def test_f1_bounds(p, r):
    f = f1_score(p, r)
    assert min(p, r) - 1e-12 <= f <= max(p, r) + 1e-12
    assert f <= 2 * min(p, r) + 1e-12


def test_fpr():
    assert false_positive_rate(0, 100) == 0.0
    assert false_positive_rate(379, 9621) == pytest.approx(0.0379, abs=1e-15)
    with pytest.raises(ValueError):
        false_positive_rate(0, 0)
    rng = np.random.default_rng(1)
    for fp, tn in rng.integers(0, 1000, size=(100, 2)):
        if fp + tn:
            assert false_positive_rate(int(fp), int(tn)) == fp / (fp + tn)


def test_video_misid_examples():
    segs = [(ObjectClass.YAK, Decision.NO_BEAR)] * 5 + [(BEAR, Decision.BEAR_DETECTED)]
    assert video_misclassification_rate(segs) == {ObjectClass.YAK: 0.0}
    mastiff = [(ObjectClass.TIBETAN_MASTIFF, Decision.BEAR_DETECTED)] * 24 + [
        (ObjectClass.TIBETAN_MASTIFF, Decision.NO_BEAR)
    ] * 976
    assert video_misclassification_rate(mastiff) == {ObjectClass.TIBETAN_MASTIFF: 0.024}
    assert video_misclassification_rate([]) == {}


def test_video_misid_converges_to_segment_law():
    # per-frame flip probability p, 10 independent frames per segment
    p = 0.05
    rng = np.random.default_rng(3)
    flips = rng.random((20000, 10)) < p
    segs = [
        (ObjectClass.YAK, Decision.BEAR_DETECTED if row.any() else Decision.NO_BEAR) for row in flips
    ]
    q = 1 - (1 - p) ** 10
    se = math.sqrt(q * (1 - q) / len(segs))
    assert abs(video_misclassification_rate(segs)[ObjectClass.YAK] - q) < 4 * se


# ---- report --------------------------------------------------------------------


def test_report_invariants_checked():
    with pytest.raises(ValueError, match="f1"):
        MetricsReport(0.5, 0.5, 0.5, 0.9, 0.0)
    with pytest.raises(ValueError, match="ratio"):
        MetricsReport(1.5, 0.5, 0.5, 0.5, 0.0)
    MetricsReport(0.5, 0.0, 0.0, 0.0, 0.0)


def test_segment_truth():
    y = det(0, 0, 10, 10, cls=ObjectClass.YAK)
    b = det(0, 0, 10, 10)
    assert segment_truth([[y], [y, b]]) is BEAR
    assert segment_truth([[], []]) is ObjectClass.OTHER
    assert segment_truth([[y], [det(0, 0, 5, 5, cls=ObjectClass.HUMAN)], [y]]) is ObjectClass.YAK


def test_evaluate_perfect_and_empty_predictions():
    gt = [(0, [det(10, 10, 50, 50)]), (3, [det(100, 100, 30, 30, cls=ObjectClass.YAK)])]
    r = evaluate_dataset(gt, gt)
    assert (r.map_value, r.recall, r.precision) == (1.0, 1.0, 1.0)
    r = evaluate_dataset([], gt)
    assert r.recall == 0.0 and r.map_value == 0.0


def test_evaluate_strict_errors():
    gt = [(0, [det(10, 10, 50, 50)])]
    with pytest.raises(DomainError, match="class mismatch"):
        evaluate_dataset([(0, [det(10, 10, 50, 50, cls=ObjectClass.YAK)])], gt)
    with pytest.raises(DomainError, match="empty"):
        evaluate_dataset([], [])
    r = evaluate_dataset([(0, [det(10, 10, 50, 50, cls=ObjectClass.YAK)])], gt, strict=False)
    assert r.precision == 0.0 and r.per_class_ap == {BEAR: 0.0}


def test_evaluate_classes_pools_across_frames():
    preds = [(0, [det(0, 0, 20, 20, 0.3)]), (1, [det(0, 0, 20, 20, 0.9), det(100, 100, 20, 20, 0.5)])]
    gts = [(0, [det(0, 0, 20, 20)]), (1, [det(0, 0, 20, 20)])]
    ev = evaluate_classes(preds, gts)[BEAR]
    assert ev.ranked == [(0.9, True), (0.5, False), (0.3, True)]
    assert ev.total_gt == 2


def test_build_report_segment_fpr():
    classes = {BEAR: ClassEvaluation([(0.9, True)], 1)}
    labelled = [(BEAR, Decision.BEAR_DETECTED), (ObjectClass.YAK, Decision.BEAR_DETECTED)] + [
        (ObjectClass.OTHER, Decision.NO_BEAR)
    ] * 3
    r = build_report(classes, labelled)
    assert r.fpr == 0.25
    assert r.per_class_video_misid == {ObjectClass.YAK: 1.0, ObjectClass.OTHER: 0.0}

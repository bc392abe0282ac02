"""
Synthetic evaluation dataset pinned to a target operating point.

Three classes (Bear, Yak, TibetanMastiff) each get ``gt_per_class`` ground-truth
boxes, of which a fixed share is detected. False positives are inserted as one
contiguous block in each class's confidence ranking; sliding that block up or down
moves the class AP without touching precision or recall, so the block position is
searched to land each AP on the target.

Layout in 10-frame segments:

* bear segments: one bear box in every frame
* yak / mastiff segments: one animal box in the first frame
* background segments: no ground truth, host the yak and mastiff false positives;
  the final yak false positive sits on the last frame so no segment is partial

Bear false positives sit in yak and mastiff segments at confidence >= 0.70, so the
video-level misidentification rate of those classes is also set by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .core import BoundingBox, Detection, ObjectClass, read_annotations, write_annotations
from .metrics import average_precision

PREDICTIONS_FILE = "fixture_predictions.csv"
GROUND_TRUTH_FILE = "fixture_ground_truth.csv"


@dataclass(frozen=True)
class FixtureTargets:
    map_value: float = 0.914
    recall: float = 0.936
    precision: float = 0.958
    yak_video_misid: float = 0.022
    mastiff_video_misid: float = 0.024
    gt_per_class: int = 1000
    segment_length: int = 10
    seed: int = 2024


def _ranking(n_tp: int, n_fp: int, block_at: int) -> list[bool]:
    return [True] * block_at + [False] * n_fp + [True] * (n_tp - block_at)


def _tune_block(n_tp: int, n_fp: int, total_gt: int, target_ap: float) -> int:
    """Block position whose AP is closest to ``target_ap`` (AP grows with position)."""

    def ap(k: int) -> float:
        ranked = [(float(-i), f) for i, f in enumerate(_ranking(n_tp, n_fp, k))]
        return average_precision(ranked, total_gt)

    lo, hi = 0, n_tp
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ap(mid) < target_ap:
            lo = mid
        else:
            hi = mid
    return min((lo, hi), key=lambda k: abs(ap(k) - target_ap))


def _confidences(n: int, high_until: int) -> np.ndarray:
    """Strictly decreasing confidences; ranks before ``high_until`` get >= 0.70."""
    high = np.linspace(0.99, 0.70, max(high_until, 1))[:high_until]
    low = np.linspace(0.69, 0.05, max(n - high_until, 1))[: n - high_until]
    return np.round(np.concatenate([high, low]), 6)


def _box(rng: np.random.Generator) -> tuple[float, float, float, float]:
    w, h = (float(v) for v in rng.integers(30, 90, size=2))
    x = float(rng.integers(2, 224 - int(w) - 2))
    y = float(rng.integers(2, 224 - int(h) - 2))
    return x, y, w, h


def _jitter(box: tuple[float, float, float, float]) -> BoundingBox:
    x, y, w, h = box
    return BoundingBox(x + 2 if x + w + 2 <= 224 else x - 2, y, w, h)


def build_fixture(
    targets: FixtureTargets = FixtureTargets(),
) -> tuple[list[tuple[int, list[Detection]]], list[tuple[int, list[Detection]]]]:
    """Return ``(predictions, ground_truth)`` grouped by frame index."""
    rng = np.random.default_rng(targets.seed)
    L = targets.segment_length
    G = targets.gt_per_class
    n_tp = round(targets.recall * G)
    total_fp = round(3 * n_tp / targets.precision) - 3 * n_tp

    n_yak_seg = n_mastiff_seg = G
    bear_fp_yak = round(targets.yak_video_misid * n_yak_seg)
    bear_fp_mastiff = round(targets.mastiff_video_misid * n_mastiff_seg)
    n_fp = {ObjectClass.BEAR: bear_fp_yak + bear_fp_mastiff}
    rest = total_fp - n_fp[ObjectClass.BEAR]
    n_fp[ObjectClass.YAK] = rest - rest // 2
    n_fp[ObjectClass.TIBETAN_MASTIFF] = rest // 2

    bear_seg = G // L
    first = {
        ObjectClass.BEAR: 0,
        ObjectClass.YAK: bear_seg * L,
        ObjectClass.TIBETAN_MASTIFF: (bear_seg + n_yak_seg) * L,
    }
    background_start = (bear_seg + n_yak_seg + n_mastiff_seg) * L
    # one background segment per yak false positive; the last one ends the stream
    n_frames = background_start + n_fp[ObjectClass.YAK] * L

    gt_frames = {
        ObjectClass.BEAR: list(range(0, G)),
        ObjectClass.YAK: [first[ObjectClass.YAK] + s * L for s in range(n_yak_seg)],
        ObjectClass.TIBETAN_MASTIFF: [first[ObjectClass.TIBETAN_MASTIFF] + s * L for s in range(n_mastiff_seg)],
    }
    # frames that host each class's false positives
    fp_frames = {
        ObjectClass.BEAR: [gt_frames[ObjectClass.YAK][i] + 1 for i in range(bear_fp_yak)]
        + [gt_frames[ObjectClass.TIBETAN_MASTIFF][i] + 1 for i in range(bear_fp_mastiff)],
        ObjectClass.YAK: [background_start + (i + 1) * L - 1 for i in range(n_fp[ObjectClass.YAK])],
        ObjectClass.TIBETAN_MASTIFF: [background_start + i * L for i in range(n_fp[ObjectClass.TIBETAN_MASTIFF])],
    }

    preds: dict[int, list[Detection]] = {}
    gts: dict[int, list[Detection]] = {}
    for cls in (ObjectClass.BEAR, ObjectClass.YAK, ObjectClass.TIBETAN_MASTIFF):
        boxes = [_box(rng) for _ in range(G)]
        for f, b in zip(gt_frames[cls], boxes):
            gts.setdefault(f, []).append(Detection(cls, 1.0, BoundingBox(*b)))
        detected = sorted(rng.choice(G, size=n_tp, replace=False).tolist())

        block = _tune_block(n_tp, n_fp[cls], G, targets.map_value)
        ranking = _ranking(n_tp, n_fp[cls], block)
        confs = _confidences(len(ranking), block + n_fp[cls])
        tp_iter = iter(rng.permutation(detected).tolist())
        fp_iter = iter(fp_frames[cls])
        for conf, is_tp in zip(confs, ranking):
            if is_tp:
                g = next(tp_iter)
                frame, bbox = gt_frames[cls][g], _jitter(boxes[g])
            else:
                frame, bbox = next(fp_iter), BoundingBox(*_box(rng))
            preds.setdefault(frame, []).append(Detection(cls, float(conf), bbox))

    assert max(preds) == n_frames - 1
    return sorted(preds.items()), sorted(gts.items())


def write_fixture(directory: str | Path, targets: FixtureTargets = FixtureTargets()) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    preds, gts = build_fixture(targets)
    p, g = directory / PREDICTIONS_FILE, directory / GROUND_TRUTH_FILE
    with p.open("w", encoding="utf-8", newline="") as fh:
        write_annotations(preds, fh)
    with g.open("w", encoding="utf-8", newline="") as fh:
        write_annotations(gts, fh)
    return p, g


def bundled_fixture_paths() -> tuple[Path, Path]:
    base = resources.files("bearguard") / "data"
    return Path(str(base / PREDICTIONS_FILE)), Path(str(base / GROUND_TRUTH_FILE))


def load_bundled_fixture():
    p, g = bundled_fixture_paths()
    with p.open(encoding="utf-8") as fp, g.open(encoding="utf-8") as fg:
        return read_annotations(fp, str(p)), read_annotations(fg, str(g))

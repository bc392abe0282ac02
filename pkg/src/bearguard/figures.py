"""Report figures written next to the CSV/JSON outputs of the CLI."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .core import Decision, EventKind, EventRecord, ObjectClass, Segment  # noqa: E402
from .metrics import ClassEvaluation, MetricsReport, average_precision, precision_recall_curve  # noqa: E402
from .power import DutySweepRow, SocSeries  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 3.8),
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "bearguard",
}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, bbox_inches="tight", metadata={"Software": None} if path.suffix == ".png" else None)
    plt.close(fig)
    return path


def pr_curves(classes: Mapping[ObjectClass, ClassEvaluation], path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for cls, ev in classes.items():
            if ev.total_gt == 0 or not ev.ranked:
                continue
            precision, recall = precision_recall_curve(ev.ranked, ev.total_gt)
            ap = average_precision(ev.ranked, ev.total_gt)
            ax.step(recall, precision, where="post", label=f"{cls.value} (AP {ap:.3f})")
        ax.set_xlim(0, 1.0)
        ax.set_ylim(0, 1.02)
        ax.set_xlabel("recall")
        ax.set_ylabel("precision")
        ax.legend(loc="lower left")
        return _save(fig, path)


def misid_bars(report: MetricsReport, path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        items = sorted(report.per_class_video_misid.items(), key=lambda kv: -kv[1])
        names = [c.value for c, _ in items]
        rates = [100 * v for _, v in items]
        ax.bar(names, rates, color="0.45")
        for i, r in enumerate(rates):
            ax.annotate(f"{r:.1f}%", (i, r), ha="center", va="bottom", fontsize=8)
        ax.set_ylabel("segments flagged as bear (%)")
        ax.set_title("video-level misidentification")
        return _save(fig, path)


def segment_timeline(
    segments: Sequence[Segment], events: Sequence[EventRecord], threshold: float, path: Path
) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        t = [s.end_time for s in segments]
        conf = [s.max_bear_confidence for s in segments]
        colors = ["tab:red" if s.decision is Decision.BEAR_DETECTED else "0.6" for s in segments]
        ax.scatter(t, conf, c=colors, s=8, zorder=2)
        ax.axhline(threshold, color="k", lw=0.8, ls="--")
        sprays = [e.payload["trigger_time"] for e in events if e.kind is EventKind.SPRAY_TRIGGERED]
        inhibits = [e.timestamp for e in events if e.kind is EventKind.SPRAY_INHIBITED]
        for x in sprays:
            ax.axvline(x, color="tab:blue", lw=1.0)
        for x in inhibits:
            ax.axvline(x, color="tab:orange", lw=1.0, ls=":")
        ax.set_ylim(0, 1.05)
        ax.set_xlabel("time (s)")
        ax.set_ylabel("peak bear confidence per segment")
        ax.set_title(f"{len(sprays)} sprays, {len(inhibits)} inhibited")
        return _save(fig, path)


def soc_curve(series: SocSeries, capacity: float, path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(series.times / 86400.0, series.energy, lw=1.0)
        ax.axhline(capacity, color="0.5", lw=0.8, ls="--")
        if series.depleted_at is not None:
            ax.axvline(series.depleted_at / 86400.0, color="tab:red", lw=0.8)
        ax.set_xlabel("time (days)")
        ax.set_ylabel("energy remaining (Wh)")
        ax.set_ylim(0, capacity * 1.05)
        return _save(fig, path)


def duty_sweep(rows: Sequence[DutySweepRow], target_days: float, path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        finite = [(r.duty_cycle, r.runtime_days) for r in rows if math.isfinite(r.runtime_days)]
        ax.plot([d for d, _ in finite], [v for _, v in finite], marker="o", ms=2, lw=1.0)
        ax.axhline(target_days, color="tab:red", lw=0.8, ls="--")
        ax.set_yscale("log")
        ax.set_xlabel("active duty cycle")
        ax.set_ylabel("runtime (days)")
        return _save(fig, path)

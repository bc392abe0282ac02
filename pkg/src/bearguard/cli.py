"""
Command-line entry point.

Exit codes: 0 success, 2 input error (unreadable or unparsable file, refused
overwrite), 3 domain error (parsed input that breaks an invariant).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import load_config, read_json
from .core import DomainError, EventKind, InputError, read_annotations, read_event_log, write_event_log
from .metrics import evaluate_classes, evaluate_dataset, segment_truth
from .power import (
    average_draw_mw,
    average_harvest_mw,
    capacity_wh,
    constant_profile,
    day_night_profile,
    duty_cycle_sweep,
    max_duty_cycle_for,
    runtime_days,
    simulate_soc,
)
from .simulator import event_counts, ground_truth_frames, run_pipeline, scenario_from_dict

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DOMAIN = 3

SIMULATE_OUTPUTS = ("events.jsonl", "segments.csv", "metrics.json", "manifest.json")


@dataclasses.dataclass(frozen=True)
class RunManifest:
    config_path: str | None
    seed: int | None
    output_dir: str
    command: str
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()

    def to_json(self) -> str:
        d = dataclasses.asdict(self)
        d["inputs"], d["outputs"] = list(self.inputs), list(self.outputs)
        d["version"] = __version__
        return json.dumps(d, indent=2) + "\n"


def _prepare_out_dir(out_dir: Path, names: Sequence[str], force: bool) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    existing = [n for n in names if (out_dir / n).exists()]
    if existing and not force:
        raise InputError(f"refusing to overwrite {existing} in {out_dir} (use --force)")


def _fmt_days(days: float) -> str:
    return "unbounded (horizon-clamped)" if math.isinf(days) else f"{days:.2f} days"


# ---- simulate ------------------------------------------------------------------


def cmd_simulate(
    scenario_path: str,
    config_path: str | None,
    seed: int | None,
    out_dir: str,
    *,
    force: bool = False,
    plots: bool = False,
) -> int:
    cfg = load_config(config_path)
    raw = read_json(scenario_path)
    try:
        scenario = scenario_from_dict(raw)
    except (KeyError, TypeError) as exc:
        raise InputError(f"bad scenario structure: {exc}", source=scenario_path) from None
    except ValueError as exc:
        raise DomainError(f"{scenario_path}: {exc}") from None
    if cfg.camera is not None:
        scenario = dataclasses.replace(scenario, camera=cfg.camera)
    if seed is not None:
        scenario = dataclasses.replace(scenario, detector=dataclasses.replace(scenario.detector, seed=seed))
    ctrl = dataclasses.replace(cfg.controller, device_id=scenario.device_id)

    out = Path(out_dir)
    names = list(SIMULATE_OUTPUTS)
    if plots:
        names += ["figures/timeline.png", "figures/misid.png"]
    _prepare_out_dir(out, names, force)

    result = run_pipeline(scenario, cfg.filter, ctrl)
    with (out / "events.jsonl").open("wb") as fh:
        write_event_log(result.events, fh)

    gt = ground_truth_frames(scenario)
    human = {e.payload["segment_start"]: e.payload["human_present"] for e in result.events if e.kind is EventKind.SEGMENT_DECISION}
    with (out / "segments.csv").open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["segment", "start_frame", "end_frame", "end_time", "decision", "max_bear_confidence", "human_present", "true_class"])
        for k, s in enumerate(result.segments):
            truth = segment_truth(gt[s.start_index : s.start_index + len(s.frames)])
            w.writerow([k, s.start_index, s.frames[-1].index, repr(s.end_time), s.decision.value,
                        repr(s.max_bear_confidence), int(human[s.start_index]), truth.value])

    metrics = {"metrics": result.report.to_dict(), "counts": event_counts(result.events)}
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2) + "\n", encoding="utf-8")

    manifest = RunManifest(config_path, scenario.detector.seed, str(out), "Simulate", (scenario_path,), tuple(names))
    (out / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")

    if plots:
        from . import figures

        figures.segment_timeline(result.segments, result.events, cfg.filter.bear_threshold, out / "figures/timeline.png")
        figures.misid_bars(result.report, out / "figures/misid.png")

    counts = metrics["counts"]
    print(f"{counts['segments']} segments, {counts['sprays']} sprays, {counts['inhibits']} inhibited -> {out}")
    return EXIT_OK


# ---- evaluate ------------------------------------------------------------------


def _read_csv(path: str):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return read_annotations(fh, path)
    except OSError as exc:
        raise InputError(f"cannot read file: {exc.strerror or exc}", source=path) from None


def cmd_evaluate(
    predictions_csv: str,
    ground_truth_csv: str,
    iou_threshold: float | None = None,
    config_path: str | None = None,
    plots_dir: str | None = None,
) -> int:
    cfg = load_config(config_path)
    threshold = cfg.iou_threshold if iou_threshold is None else iou_threshold
    if not 0.0 < threshold <= 1.0:
        raise DomainError(f"iou threshold must be in (0, 1], got {threshold}")
    preds = _read_csv(predictions_csv)
    gts = _read_csv(ground_truth_csv)
    try:
        report = evaluate_dataset(preds, gts, threshold, cfg.filter)
    except DomainError:
        raise
    except ValueError as exc:
        raise DomainError(str(exc)) from None
    out = report.to_dict()
    out["iou_threshold"] = threshold
    print(json.dumps(out, indent=2))
    if plots_dir is not None:
        from . import figures

        figures.pr_curves(evaluate_classes(preds, gts, threshold), Path(plots_dir) / "pr_curves.png")
        figures.misid_bars(report, Path(plots_dir) / "misid.png")
    return EXIT_OK


# ---- power ---------------------------------------------------------------------


def cmd_power(
    config_path: str | None,
    horizon_days: float,
    *,
    sweep: bool = False,
    out_dir: str = "power_out",
    force: bool = False,
    plots: bool = False,
) -> int:
    try:
        cfg = load_config(config_path)
    except DomainError as exc:
        # an unusable power config is an input problem for this command
        raise InputError(str(exc)) from None
    if not horizon_days > 0:
        raise InputError(f"horizon must be > 0 days, got {horizon_days}")
    p, opts = cfg.power, cfg.power_options

    out = Path(out_dir)
    names = ["soc.csv"] + (["duty_sweep.csv"] if sweep else [])
    if plots:
        names += ["figures/soc.png"] + (["figures/duty_sweep.png"] if sweep else [])
    _prepare_out_dir(out, names, force)

    no_solar = runtime_days(p, False)
    solar = runtime_days(p, True)
    print(f"battery capacity:   {capacity_wh(p):.2f} Wh")
    print(f"average draw:       {average_draw_mw(p):.1f} mW (duty cycle {p.duty_cycle_active:g})")
    print(f"average harvest:    {average_harvest_mw(p, True):.1f} mW")
    print(f"runtime, no solar:  {_fmt_days(no_solar)}")
    print(f"runtime, solar:     {_fmt_days(solar)}")

    if opts.profile == "day_night":
        profile = day_night_profile(opts.day_fraction)
    else:
        profile = constant_profile(p.harvest_derating)
    series = simulate_soc(p, horizon_days, opts.timestep, profile, solar_enabled=opts.solar_enabled)
    with (out / "soc.csv").open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_s", "energy_wh"])
        for t, e in zip(series.times, series.energy):
            w.writerow([repr(float(t)), repr(float(e))])
    if series.depleted_at is None:
        print(f"simulated {horizon_days:g} days ({'solar' if opts.solar_enabled else 'no solar'}, "
              f"{opts.profile} profile): battery never empty")
    else:
        print(f"simulated ({'solar' if opts.solar_enabled else 'no solar'}, {opts.profile} profile): "
              f"empty after {series.depleted_at / 86400.0:.2f} days")

    if sweep:
        duty = [k / 100 for k in range(101)]
        rows = duty_cycle_sweep(p, duty, opts.target_days, solar_enabled=True)
        print()
        print(f"duty-cycle sweep (solar, target {opts.target_days:g} days)")
        print(f"{'duty':>6} {'draw_mW':>8} {'runtime':>28} {'meets':>6}")
        for r in rows:
            print(f"{r.duty_cycle:6.2f} {r.average_draw_mw:8.1f} {_fmt_days(r.runtime_days):>28} {'yes' if r.meets_target else 'no':>6}")
        with (out / "duty_sweep.csv").open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["duty_cycle", "average_draw_mw", "runtime_days", "meets_target"])
            for r in rows:
                w.writerow([r.duty_cycle, r.average_draw_mw, r.runtime_days, int(r.meets_target)])
        need = max_duty_cycle_for(p, opts.target_days, solar_enabled=True)
        if need is None:
            print(f"no duty cycle reaches {opts.target_days:g} days with this battery and panel")
        else:
            print(f"{opts.target_days:g} days requires an active duty cycle <= {need:.4f} ({100 * need:.2f}% active)")
        if plots:
            from . import figures

            figures.duty_sweep(rows, opts.target_days, out / "figures/duty_sweep.png")
    if plots:
        from . import figures

        figures.soc_curve(series, capacity_wh(p), out / "figures/soc.png")
    return EXIT_OK


# ---- replay --------------------------------------------------------------------


def _summary(rec) -> str:
    p = rec.payload
    if rec.kind is EventKind.SEGMENT_DECISION:
        return f"{p.get('decision', '?')} peak={p.get('max_bear_confidence', 0):.3f} human={p.get('human_present', False)}"
    if rec.kind is EventKind.SPRAY_TRIGGERED:
        return (f"spray at {p.get('trigger_time', float('nan')):.3f}s for {p.get('duration', float('nan')):g}s, "
                f"{p.get('sprays_remaining_after', '?')} left")
    if rec.kind is EventKind.SPRAY_INHIBITED:
        return f"inhibited ({p.get('reason', 'unspecified')})"
    return ", ".join(f"{k}={v}" for k, v in p.items())


def cmd_replay(events_jsonl: str, *, quiet: bool = False) -> int:
    try:
        with open(events_jsonl, "rb") as fh:
            records = read_event_log(fh, events_jsonl)
    except OSError as exc:
        raise InputError(f"cannot read file: {exc.strerror or exc}", source=events_jsonl) from None
    if not quiet:
        for r in records:
            print(f"{r.timestamp:10.3f}s  {r.device_id:<10} {r.kind.value:<16} {_summary(r)}")
    counts = event_counts(records)
    print(f"sprays: {counts['sprays']}")
    print(f"inhibits: {counts['inhibits']}")
    print(f"segments: {counts['segments']}")
    print(f"battery_low: {counts['battery_low']}")
    return EXIT_OK


# ---- argument parsing ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bearguard", description=__doc__.strip().splitlines()[0])
    ap.add_argument("--version", action="version", version=f"bearguard {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario through the full pipeline")
    s.add_argument("scenario", help="scenario JSON file")
    s.add_argument("--config", help="main JSON config")
    s.add_argument("--seed", type=int, help="detector seed (overrides the scenario file)")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--force", action="store_true", help="overwrite existing outputs")
    s.add_argument("--plots", action="store_true", help="also write figures/ PNGs")

    e = sub.add_parser("evaluate", help="score predictions against ground truth")
    e.add_argument("predictions", help="predictions CSV (frame,class,conf,x,y,w,h)")
    e.add_argument("ground_truth", help="ground-truth CSV, same schema")
    e.add_argument("--iou-threshold", type=float, help="IoU needed for a match (default 0.5)")
    e.add_argument("--config", help="main JSON config (filter and evaluation sections)")
    e.add_argument("--plots", metavar="DIR", help="write PR-curve and misidentification figures here")

    p = sub.add_parser("power", help="battery runtime and state-of-charge simulation")
    p.add_argument("--config", help="main JSON config (power section)")
    p.add_argument("--horizon-days", type=float, default=30.0)
    p.add_argument("--sweep-duty-cycle", action="store_true", help="tabulate runtime over duty cycles")
    p.add_argument("--out", default="power_out", help="output directory for soc.csv")
    p.add_argument("--force", action="store_true")
    p.add_argument("--plots", action="store_true")

    r = sub.add_parser("replay", help="print a human-readable event timeline")
    r.add_argument("events", help="events.jsonl")
    r.add_argument("--quiet", action="store_true", help="summary counts only")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(args.scenario, args.config, args.seed, args.out, force=args.force, plots=args.plots)
        if args.command == "evaluate":
            return cmd_evaluate(args.predictions, args.ground_truth, args.iou_threshold, args.config, args.plots)
        if args.command == "power":
            return cmd_power(args.config, args.horizon_days, sweep=args.sweep_duty_cycle,
                             out_dir=args.out, force=args.force, plots=args.plots)
        return cmd_replay(args.events, quiet=args.quiet)
    except InputError as exc:
        print(f"bearguard: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DomainError as exc:
        print(f"bearguard: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())

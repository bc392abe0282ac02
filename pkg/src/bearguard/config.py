"""
Main JSON run configuration.

Sections: ``filter``, ``controller``, ``power``, ``camera``, ``evaluation``; all
optional, missing keys take the library defaults. Command-line flags override file
values, and a ``camera`` section here overrides the camera in a scenario file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

from .controller import ControllerConfig
from .core import DomainError, InputError
from .metrics import DEFAULT_IOU_THRESHOLD
from .power import PowerConfig
from .segment_filter import FilterConfig
from .simulator import CameraSpec

POWER_PROFILES = ("flat", "day_night")


@dataclass(frozen=True)
class PowerOptions:
    """How the ``power`` command simulates harvest, on top of ``PowerConfig``."""

    solar_enabled: bool = True
    profile: str = "flat"
    day_fraction: float = 0.30
    timestep: float = 60.0
    target_days: float = 30.0

    def __post_init__(self) -> None:
        if self.profile not in POWER_PROFILES:
            raise ValueError(f"profile must be one of {POWER_PROFILES}")
        if not 0.0 <= self.day_fraction <= 1.0:
            raise ValueError("day_fraction must be in [0, 1]")
        if not self.timestep > 0 or not self.target_days > 0:
            raise ValueError("timestep and target_days must be > 0")


@dataclass(frozen=True)
class RunConfig:
    filter: FilterConfig = field(default_factory=FilterConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    power: PowerConfig = field(default_factory=PowerConfig)
    power_options: PowerOptions = field(default_factory=PowerOptions)
    camera: CameraSpec | None = None
    iou_threshold: float = DEFAULT_IOU_THRESHOLD


def _build(cls, section: Mapping[str, Any], name: str, source: str):
    if not isinstance(section, Mapping):
        raise InputError(f"section {name!r} must be an object", source=source)
    allowed = {f.name for f in fields(cls)}
    unknown = set(section) - allowed
    if unknown:
        raise InputError(f"unknown keys in {name!r}: {sorted(unknown)}", source=source)
    try:
        return cls(**section)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"{source}: invalid {name!r} section: {exc}") from None


def config_from_dict(obj: Mapping[str, Any], source: str = "<config>") -> RunConfig:
    if not isinstance(obj, Mapping):
        raise InputError("config must be a JSON object", source=source)
    known = {"filter", "controller", "power", "camera", "evaluation"}
    unknown = set(obj) - known
    if unknown:
        raise InputError(f"unknown sections {sorted(unknown)}", source=source)

    power_section = dict(obj.get("power", {}))
    option_names = {f.name for f in fields(PowerOptions)}
    options = {k: power_section.pop(k) for k in list(power_section) if k in option_names}

    evaluation = obj.get("evaluation", {})
    if set(evaluation) - {"iou_threshold"}:
        raise InputError("the 'evaluation' section only accepts iou_threshold", source=source)
    iou_threshold = float(evaluation.get("iou_threshold", DEFAULT_IOU_THRESHOLD))
    if not 0.0 < iou_threshold <= 1.0:
        raise DomainError(f"{source}: iou_threshold must be in (0, 1]")

    return RunConfig(
        filter=_build(FilterConfig, obj.get("filter", {}), "filter", source),
        controller=_build(ControllerConfig, obj.get("controller", {}), "controller", source),
        power=_build(PowerConfig, power_section, "power", source),
        power_options=_build(PowerOptions, options, "power", source),
        camera=_build(CameraSpec, obj["camera"], "camera", source) if "camera" in obj else None,
        iou_threshold=iou_threshold,
    )


def read_json(path: str | Path) -> Any:
    """Load a JSON file, turning I/O and syntax errors into ``InputError``."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read file: {exc.strerror or exc}", source=str(path)) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(exc.msg, source=str(path), line=exc.lineno) from None


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    return config_from_dict(read_json(path), source=str(path))

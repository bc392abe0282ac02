"""Deterministic bear detection-and-deterrence pipeline: segment filter, spray
controller, power budget, detection metrics and a scenario simulator."""

__version__ = "0.1.0"

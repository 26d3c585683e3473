"""Drone light show failure evacuation and recovery simulator."""

from skypark._core import (
    SpecError,
    default_scenario,
    evaluate_batch,
    export_occupancy,
    run_incident,
    validate_scenario,
)

__all__ = [
    "SpecError",
    "default_scenario",
    "evaluate_batch",
    "export_occupancy",
    "run_incident",
    "validate_scenario",
]

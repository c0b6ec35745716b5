"""Deterministic end-to-end simulation with adversarial actors."""

from mnet.harness.actors import ActorKind
from mnet.harness.scenario import (
    ScenarioOutcome,
    ScenarioSpec,
    ScenarioTimeout,
    expected_matrix,
    matrix_matches,
    run_scenario,
)
from mnet.harness.sim import Scheduler, SimTransport

__all__ = [
    "ActorKind",
    "ScenarioOutcome",
    "ScenarioSpec",
    "ScenarioTimeout",
    "Scheduler",
    "SimTransport",
    "expected_matrix",
    "matrix_matches",
    "run_scenario",
]

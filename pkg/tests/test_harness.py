"""Scenario engine: determinism, detection, liveness."""

import json

import pytest

from mnet.harness import (
    ActorKind,
    ScenarioSpec,
    ScenarioTimeout,
    expected_matrix,
    matrix_matches,
    run_scenario,
)
from mnet.harness.scenario import ActorSpec


def _all_actor_spec(seed, **kwargs):
    actors = [ActorSpec(kind, kind.value.lower()) for kind in ActorKind]
    return ScenarioSpec(seed=seed, actors=actors, session_s=15.0, **kwargs)


def test_identical_seeds_produce_identical_outcomes(tmp_path):
    spec = _all_actor_spec(seed=21)
    a = run_scenario(spec, tmp_path / "a")
    b = run_scenario(spec, tmp_path / "b")
    assert a.to_json() == b.to_json()


def test_different_seeds_differ(tmp_path):
    one = run_scenario(ScenarioSpec(seed=1, actors=[ActorSpec(ActorKind.HONEST, "h")],
                                    session_s=10.0), tmp_path / "a")
    two = run_scenario(ScenarioSpec(seed=2, actors=[ActorSpec(ActorKind.HONEST, "h")],
                                    session_s=10.0), tmp_path / "b")
    assert one.rows[0]["trial"] != two.rows[0]["trial"]


def test_full_adversary_matrix_matches_expectations(tmp_path):
    for seed in (0, 1, 2):
        spec = _all_actor_spec(seed=seed, drop_prob=0.02)
        outcome = run_scenario(spec, tmp_path / f"s{seed}")
        assert matrix_matches(expected_matrix(spec), outcome) == []


def test_honest_survives_lossy_delivery(tmp_path):
    spec = ScenarioSpec(seed=5, actors=[ActorSpec(ActorKind.HONEST, "h")],
                        session_s=12.0, drop_prob=0.05)
    outcome = run_scenario(spec, tmp_path)
    assert matrix_matches(expected_matrix(spec), outcome) == []


def test_honest_survives_partition_window(tmp_path):
    # A 2-second total blackout mid-session; retries must carry the session.
    spec = ScenarioSpec(seed=6, actors=[ActorSpec(ActorKind.HONEST, "h")],
                        session_s=15.0, partitions_s=[(5.0, 7.0)])
    outcome = run_scenario(spec, tmp_path)
    assert outcome.rows[0]["submitted"]
    assert outcome.rows[0]["automated_pass"]


def test_liveness_under_loss_within_3x_budget(tmp_path):
    for seed in range(5):
        spec = ScenarioSpec(seed=seed, actors=[ActorSpec(ActorKind.HONEST, "h")],
                            session_s=10.0, drop_prob=0.10)
        outcome = run_scenario(spec, tmp_path / f"s{seed}")
        row = outcome.rows[0]
        assert row["submitted"]
        assert row["finished_after_s"] <= 3 * spec.session_s, row


def test_quota_spammer_controls(tmp_path):
    spec = ScenarioSpec(seed=9, actors=[ActorSpec(ActorKind.QUOTA_SPAMMER, "spam")],
                        session_s=8.0, quota_max=3)
    outcome = run_scenario(spec, tmp_path)
    row = outcome.rows[0]
    assert row["registered"] == 3
    assert row["refused"] is True


def test_upload_fault_injection_reaches_submitted(tmp_path):
    spec = ScenarioSpec(seed=4, actors=[ActorSpec(ActorKind.HONEST, "h")],
                        session_s=10.0, upload_faults={"h": [0.5]})
    outcome = run_scenario(spec, tmp_path)
    row = outcome.rows[0]
    assert row["submitted"] and row["automated_pass"]


def test_scenario_timeout_raised_when_budget_too_small(tmp_path):
    spec = ScenarioSpec(seed=3, actors=[ActorSpec(ActorKind.HONEST, "h")],
                        session_s=20.0, budget_factor=0.01)
    with pytest.raises(ScenarioTimeout):
        run_scenario(spec, tmp_path)


def test_spec_round_trips_through_json(tmp_path):
    spec = _all_actor_spec(seed=77, drop_prob=0.05)
    doc = json.loads(json.dumps(spec.to_json()))
    again = ScenarioSpec.from_json(doc)
    assert again.seed == spec.seed
    assert again.actors == spec.actors
    assert again.drop_prob == spec.drop_prob
    assert again.latency_s == spec.latency_s


def test_instructions_are_delivered_and_acked(tmp_path):
    spec = ScenarioSpec(seed=12, actors=[ActorSpec(ActorKind.HONEST, "h")], session_s=10.0)
    outcome = run_scenario(spec, tmp_path, keep_store=True)
    trial = outcome.rows[0]["trial"]
    instructions = outcome.store.instructions_for(trial)
    assert len(instructions) == 1
    seq, payload, acked = instructions[0]
    assert acked
    assert payload["kind"] in ("peg_checklist", "cable_route", "scene_layout",
                               "tabletop", "block_prompt")

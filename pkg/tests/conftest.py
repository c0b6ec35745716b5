"""Shared fixtures: in-memory stores and a seeded server core."""

import random

import pytest

from mnet.server import ChallengeSchedule, LocalObjectStore, QuotaPolicy, ServerCore, SqliteStore

SECRET = b"unit-test-secret-0123456789abcdef"
T0 = 1_700_000_000_000_000  # µs since epoch, arbitrary fixed origin


@pytest.fixture
def store():
    s = SqliteStore(":memory:")
    yield s
    s.close()


@pytest.fixture
def objects(tmp_path):
    return LocalObjectStore(tmp_path / "objects")


@pytest.fixture
def core(store, objects):
    c = ServerCore(
        store,
        objects,
        secret=SECRET,
        url_base="http://127.0.0.1:0",
        quota=QuotaPolicy(max_trials=3, window_s=7 * 24 * 3600),
        schedule=ChallengeSchedule(mean_interval_s=30.0, first_after_s=10.0,
                                   response_deadline_s=15.0),
        rng=random.Random(12345),
    )
    store.add_team("team-a", T0)
    store.add_team("team-b", T0)
    return c

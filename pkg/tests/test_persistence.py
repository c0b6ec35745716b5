"""Persistence: append-only logs, replay reconstruction, crash consistency."""

import os
import random
import signal
import subprocess
import sys
import textwrap
import time

import pytest

from mnet.protocol import Event, Finalize, TrialState
from mnet.server import LocalObjectStore, ServerCore, SqliteStore
from mnet.server.persistence import EventRow

from conftest import SECRET, T0

US = 1_000_000


def test_event_log_is_append_only_by_key(store):
    store.append_event(EventRow("t", 1, 0, "Status", {}, T0))
    with pytest.raises(Exception):
        store.append_event(EventRow("t", 1, 5, "Status", {}, T0 + 1))
    assert [e.seq for e in store.events_for("t")] == [1]


def test_replaying_transitions_reconstructs_trial_state(core):
    """Event-sourcing check over randomized sessions: folding the persisted
    transition log always lands on the trial's stored state snapshot."""
    rng = random.Random(31337)
    for session in range(1000):
        now = [T0 + session * 1000 * US]

        def tick():
            now[0] += rng.randrange(1, 5 * US)
            return now[0]

        row = core.register_trial("team-b", f"task-{session}", tick())
        trial = row.trial
        core.store.add_team("team-b", T0)  # idempotent
        steps = rng.randrange(0, 6)
        try:
            if steps >= 1:
                core.begin_session(trial, tick())
            if steps >= 2:
                for seq in range(1, rng.randrange(2, 5)):
                    core.record_event(trial, Event(seq=seq, client_ts=seq, kind="Status",
                                                   payload={}), tick())
            if steps >= 3:
                core.finalize(trial, Finalize(final_video_digest="e" * 64, frame_count=3,
                                              video_duration_us=3 * US), tick())
            if steps >= 4:
                core.issue_upload_url(trial, tick())
            if steps == 5 and rng.random() < 0.5:
                digest, _ = core.store_upload(trial, "package.zip", [b"pkg"], tick())
                core.upload_complete(trial, digest, tick())
            elif rng.random() < 0.3:
                core.mark_broken(trial, "random disconnect", tick())
        except Exception:
            pass

        # Replay: fold the transition log from the initial state.
        state = TrialState.REGISTERED
        for from_state, event, to_state, _ts in core.store.transitions_for(trial):
            assert TrialState(from_state) == state
            state = TrialState(to_state)
        assert state == core.store.get_trial(trial).state

        ts_list = [t for *_x, t in core.store.transitions_for(trial)]
        assert ts_list == sorted(ts_list)


_CRASH_SCRIPT = textwrap.dedent("""
    import sys, time
    from mnet.protocol import Event, Finalize
    from mnet.server import LocalObjectStore, ServerCore, SqliteStore

    db, objdir = sys.argv[1], sys.argv[2]
    store = SqliteStore(db)
    core = ServerCore(store, LocalObjectStore(objdir), secret=b"crash-secret")
    store.add_team("team-x", 0)
    now = 1_700_000_000_000_000
    print("ready", flush=True)
    n = 0
    while True:
        n += 1
        now += 1_000_000
        row = core.register_trial("team-x", f"task-{n}", now)
        core.begin_session(row.trial, now + 1)
        for seq in range(1, 20):
            core.record_event(row.trial,
                              Event(seq=seq, client_ts=seq, kind="Status", payload={"n": n}),
                              now + 1 + seq)
        core.finalize(row.trial,
                      Finalize(final_video_digest="f" * 64, frame_count=19,
                               video_duration_us=19), now + 100)
        core.issue_upload_url(row.trial, now + 101)
""")

LEGAL_AFTER_RECOVERY = {TrialState.BROKEN, TrialState.SUBMITTED, TrialState.UNDER_REVIEW,
                        TrialState.ACCEPTED, TrialState.REJECTED}


def test_kill9_mid_write_recovers_to_legal_states(tmp_path):
    """SIGKILL the writer at arbitrary points; reopening must always see a
    clean committed prefix, and recovery leaves only legal states."""
    script = tmp_path / "writer.py"
    script.write_text(_CRASH_SCRIPT)
    db = tmp_path / "trials.db"

    for round_no in range(5):
        proc = subprocess.Popen(
            [sys.executable, str(script), str(db), str(tmp_path / "objects")],
            stdout=subprocess.PIPE, stderr=subprocess.DEVNULL)
        assert proc.stdout.readline().strip() == b"ready"
        time.sleep(0.05 + round_no * 0.035)
        proc.send_signal(signal.SIGKILL)
        proc.wait()

        store = SqliteStore(str(db))
        core = ServerCore(store, LocalObjectStore(tmp_path / "objects"), secret=b"crash-secret")
        trials = store.all_trials()
        # Every persisted trial must be in a known state with a coherent
        # transition log (no phantom states).
        for row in trials:
            state = TrialState.REGISTERED
            for from_state, event, to_state, _ts in store.transitions_for(row.trial):
                assert TrialState(from_state) == state
                state = TrialState(to_state)
            assert state == row.state

        core.recover_on_startup(2_000_000_000_000_000)
        for row in store.all_trials():
            assert store.get_trial(row.trial).state in LEGAL_AFTER_RECOVERY
        store.close()


def test_object_store_roundtrip(tmp_path):
    objects = LocalObjectStore(tmp_path / "obj")
    digest, n = objects.put("trial-1", "package.zip", [b"hello ", b"world"])
    assert n == 11
    with objects.open("trial-1", "package.zip") as f:
        assert f.read() == b"hello world"
    assert objects.exists("trial-1", "package.zip")
    assert not objects.exists("trial-1", "missing.bin")


def test_object_store_rejects_path_escape(tmp_path):
    objects = LocalObjectStore(tmp_path / "obj")
    with pytest.raises(ValueError):
        objects.put("..", "x", [b""])
    with pytest.raises(ValueError):
        objects.put("a/b", "x", [b""])

"""Trial metadata persistence.

The interface is small and relational; the reference implementation is an
embedded single-file SQLite database in WAL mode, so every logical write is
one journaled transaction and a killed process recovers to a clean prefix
of committed writes. Events, transitions, and challenge responses are
append-only; a trial's rows are never deleted.
"""

from __future__ import annotations

import abc
import json
import sqlite3
import threading
from dataclasses import dataclass
from typing import Optional

from mnet.protocol import TrialState

_SCHEMA = """
CREATE TABLE IF NOT EXISTS teams (
    team TEXT PRIMARY KEY,
    created_at INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS trials (
    trial TEXT PRIMARY KEY,
    team TEXT NOT NULL,
    task TEXT NOT NULL,
    state TEXT NOT NULL,
    code TEXT,
    registered_at INTEGER NOT NULL,
    final_video_digest TEXT,
    declared_frame_count INTEGER,
    declared_video_duration_us INTEGER,
    archive_digest TEXT
);
CREATE TABLE IF NOT EXISTS transitions (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    trial TEXT NOT NULL,
    from_state TEXT NOT NULL,
    event TEXT NOT NULL,
    to_state TEXT NOT NULL,
    server_ts INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS events (
    trial TEXT NOT NULL,
    seq INTEGER NOT NULL,
    client_ts INTEGER NOT NULL,
    kind TEXT NOT NULL,
    payload TEXT NOT NULL,
    server_ts INTEGER NOT NULL,
    PRIMARY KEY (trial, seq)
);
CREATE TABLE IF NOT EXISTS challenges (
    trial TEXT NOT NULL,
    challenge_id INTEGER NOT NULL,
    issued_server_ts INTEGER NOT NULL,
    PRIMARY KEY (trial, challenge_id)
);
CREATE TABLE IF NOT EXISTS challenge_responses (
    trial TEXT NOT NULL,
    challenge_id INTEGER NOT NULL,
    frame_index INTEGER NOT NULL,
    capture_ts INTEGER NOT NULL,
    digest TEXT NOT NULL,
    received_server_ts INTEGER NOT NULL,
    late INTEGER NOT NULL,
    PRIMARY KEY (trial, challenge_id)
);
CREATE TABLE IF NOT EXISTS instructions (
    trial TEXT NOT NULL,
    seq INTEGER NOT NULL,
    payload TEXT NOT NULL,
    sent_at INTEGER NOT NULL,
    acked INTEGER NOT NULL DEFAULT 0,
    PRIMARY KEY (trial, seq)
);
CREATE TABLE IF NOT EXISTS submissions (
    trial TEXT NOT NULL,
    object_name TEXT NOT NULL,
    byte_len INTEGER NOT NULL,
    digest TEXT NOT NULL,
    uploaded_at INTEGER NOT NULL,
    PRIMARY KEY (trial, object_name)
);
CREATE TABLE IF NOT EXISTS decisions (
    trial TEXT PRIMARY KEY,
    verdict TEXT NOT NULL,
    judge TEXT NOT NULL,
    reason TEXT NOT NULL,
    report_json TEXT NOT NULL,
    decided_at INTEGER NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_trials_quota ON trials (team, task, registered_at);
"""


@dataclass(frozen=True)
class TrialRow:
    trial: str
    team: str
    task: str
    state: TrialState
    code: Optional[str]
    registered_at: int
    final_video_digest: Optional[str] = None
    declared_frame_count: Optional[int] = None
    declared_video_duration_us: Optional[int] = None
    archive_digest: Optional[str] = None


@dataclass(frozen=True)
class EventRow:
    trial: str
    seq: int
    client_ts: int
    kind: str
    payload: dict
    server_ts: int


@dataclass(frozen=True)
class ChallengeRow:
    trial: str
    challenge_id: int
    issued_server_ts: int


@dataclass(frozen=True)
class ResponseRow:
    trial: str
    challenge_id: int
    frame_index: int
    capture_ts: int
    digest: str
    received_server_ts: int
    late: bool


class Store(abc.ABC):
    """What the coordinator needs from persistence; see SqliteStore."""

    @abc.abstractmethod
    def add_team(self, team: str, now: int) -> None: ...

    @abc.abstractmethod
    def has_team(self, team: str) -> bool: ...

    @abc.abstractmethod
    def insert_trial(self, row: TrialRow) -> None: ...

    @abc.abstractmethod
    def get_trial(self, trial: str) -> Optional[TrialRow]: ...

    @abc.abstractmethod
    def apply_transition(self, trial: str, from_state: TrialState, event: str,
                         to_state: TrialState, server_ts: int) -> None: ...


class SqliteStore(Store):
    """Single-file embedded store; pass ':memory:' for ephemeral test runs."""

    def __init__(self, path: str) -> None:
        self.path = path
        self._lock = threading.RLock()
        self._conn = sqlite3.connect(path, check_same_thread=False)
        self._conn.execute("PRAGMA journal_mode=WAL")
        self._conn.execute("PRAGMA synchronous=NORMAL")
        with self._conn:
            self._conn.executescript(_SCHEMA)

    def close(self) -> None:
        self._conn.close()

    # -- teams ---------------------------------------------------------------

    def add_team(self, team: str, now: int) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT OR IGNORE INTO teams (team, created_at) VALUES (?, ?)", (team, now))

    def has_team(self, team: str) -> bool:
        with self._lock:
            cur = self._conn.execute("SELECT 1 FROM teams WHERE team = ?", (team,))
            return cur.fetchone() is not None

    # -- trials --------------------------------------------------------------

    def insert_trial(self, row: TrialRow) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO trials (trial, team, task, state, code, registered_at) "
                "VALUES (?, ?, ?, ?, ?, ?)",
                (row.trial, row.team, row.task, row.state.value, row.code, row.registered_at))

    def get_trial(self, trial: str) -> Optional[TrialRow]:
        with self._lock:
            cur = self._conn.execute(
                "SELECT trial, team, task, state, code, registered_at, final_video_digest, "
                "declared_frame_count, declared_video_duration_us, archive_digest "
                "FROM trials WHERE trial = ?", (trial,))
            r = cur.fetchone()
        if r is None:
            return None
        return TrialRow(r[0], r[1], r[2], TrialState(r[3]), r[4], r[5], r[6], r[7], r[8], r[9])

    def all_trials(self) -> list[TrialRow]:
        with self._lock:
            cur = self._conn.execute("SELECT trial FROM trials ORDER BY registered_at")
            ids = [r[0] for r in cur.fetchall()]
        return [t for t in (self.get_trial(i) for i in ids) if t]

    def apply_transition(self, trial: str, from_state: TrialState, event: str,
                         to_state: TrialState, server_ts: int) -> None:
        """State snapshot and transition log move in one transaction."""
        with self._lock, self._conn:
            self._conn.execute(
                "UPDATE trials SET state = ? WHERE trial = ?", (to_state.value, trial))
            self._conn.execute(
                "INSERT INTO transitions (trial, from_state, event, to_state, server_ts) "
                "VALUES (?, ?, ?, ?, ?)",
                (trial, from_state.value, event, to_state.value, server_ts))

    def transitions_for(self, trial: str) -> list[tuple[str, str, str, int]]:
        with self._lock:
            cur = self._conn.execute(
                "SELECT from_state, event, to_state, server_ts FROM transitions "
                "WHERE trial = ? ORDER BY id", (trial,))
            return [(r[0], r[1], r[2], r[3]) for r in cur.fetchall()]

    def transition_ts(self, trial: str, to_state: TrialState) -> Optional[int]:
        with self._lock:
            cur = self._conn.execute(
                "SELECT server_ts FROM transitions WHERE trial = ? AND to_state = ? "
                "ORDER BY id LIMIT 1", (trial, to_state.value))
            r = cur.fetchone()
        return r[0] if r else None

    def set_code(self, trial: str, code: str) -> None:
        with self._lock, self._conn:
            self._conn.execute("UPDATE trials SET code = ? WHERE trial = ?", (code, trial))

    def code_exists(self, code: str) -> bool:
        with self._lock:
            cur = self._conn.execute("SELECT 1 FROM trials WHERE code = ?", (code,))
            return cur.fetchone() is not None

    def set_finalize(self, trial: str, digest: str, frame_count: int, duration_us: int) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "UPDATE trials SET final_video_digest = ?, declared_frame_count = ?, "
                "declared_video_duration_us = ? WHERE trial = ?",
                (digest, frame_count, duration_us, trial))

    def set_archive_digest(self, trial: str, digest: str) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "UPDATE trials SET archive_digest = ? WHERE trial = ?", (digest, trial))

    def registered_in_window(self, team: str, task: str, lo: int, hi: int) -> list[int]:
        """registered_at for every trial of (team, task) in [lo, hi], any state."""
        with self._lock:
            cur = self._conn.execute(
                "SELECT registered_at FROM trials WHERE team = ? AND task = ? "
                "AND registered_at >= ? AND registered_at <= ? ORDER BY registered_at",
                (team, task, lo, hi))
            return [r[0] for r in cur.fetchall()]

    # -- events ----------------------------------------------------------------

    def append_event(self, row: EventRow) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO events (trial, seq, client_ts, kind, payload, server_ts) "
                "VALUES (?, ?, ?, ?, ?, ?)",
                (row.trial, row.seq, row.client_ts, row.kind,
                 json.dumps(row.payload, sort_keys=True, separators=(",", ":")),
                 row.server_ts))

    def last_event_seq(self, trial: str) -> int:
        with self._lock:
            cur = self._conn.execute(
                "SELECT COALESCE(MAX(seq), 0) FROM events WHERE trial = ?", (trial,))
            return cur.fetchone()[0]

    def events_for(self, trial: str) -> list[EventRow]:
        with self._lock:
            cur = self._conn.execute(
                "SELECT seq, client_ts, kind, payload, server_ts FROM events "
                "WHERE trial = ? ORDER BY seq", (trial,))
            return [EventRow(trial, r[0], r[1], r[2], json.loads(r[3]), r[4])
                    for r in cur.fetchall()]

    # -- challenges --------------------------------------------------------------

    def insert_challenge(self, row: ChallengeRow) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO challenges (trial, challenge_id, issued_server_ts) VALUES (?, ?, ?)",
                (row.trial, row.challenge_id, row.issued_server_ts))

    def get_challenge(self, trial: str, challenge_id: int) -> Optional[ChallengeRow]:
        with self._lock:
            cur = self._conn.execute(
                "SELECT issued_server_ts FROM challenges WHERE trial = ? AND challenge_id = ?",
                (trial, challenge_id))
            r = cur.fetchone()
        return ChallengeRow(trial, challenge_id, r[0]) if r else None

    def challenges_for(self, trial: str) -> list[ChallengeRow]:
        with self._lock:
            cur = self._conn.execute(
                "SELECT challenge_id, issued_server_ts FROM challenges "
                "WHERE trial = ? ORDER BY challenge_id", (trial,))
            return [ChallengeRow(trial, r[0], r[1]) for r in cur.fetchall()]

    def challenge_count(self, trial: str) -> int:
        with self._lock:
            cur = self._conn.execute(
                "SELECT COUNT(*) FROM challenges WHERE trial = ?", (trial,))
            return cur.fetchone()[0]

    def insert_response(self, row: ResponseRow) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO challenge_responses "
                "(trial, challenge_id, frame_index, capture_ts, digest, received_server_ts, late) "
                "VALUES (?, ?, ?, ?, ?, ?, ?)",
                (row.trial, row.challenge_id, row.frame_index, row.capture_ts,
                 row.digest, row.received_server_ts, int(row.late)))

    def get_response(self, trial: str, challenge_id: int) -> Optional[ResponseRow]:
        with self._lock:
            cur = self._conn.execute(
                "SELECT frame_index, capture_ts, digest, received_server_ts, late "
                "FROM challenge_responses WHERE trial = ? AND challenge_id = ?",
                (trial, challenge_id))
            r = cur.fetchone()
        if r is None:
            return None
        return ResponseRow(trial, challenge_id, r[0], r[1], r[2], r[3], bool(r[4]))

    def responses_for(self, trial: str) -> list[ResponseRow]:
        with self._lock:
            cur = self._conn.execute(
                "SELECT challenge_id, frame_index, capture_ts, digest, received_server_ts, late "
                "FROM challenge_responses WHERE trial = ? ORDER BY challenge_id", (trial,))
            return [ResponseRow(trial, r[0], r[1], r[2], r[3], r[4], bool(r[5]))
                    for r in cur.fetchall()]

    # -- instructions -----------------------------------------------------------

    def insert_instruction(self, trial: str, seq: int, payload: dict, sent_at: int) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO instructions (trial, seq, payload, sent_at) VALUES (?, ?, ?, ?)",
                (trial, seq, json.dumps(payload, sort_keys=True, separators=(",", ":")), sent_at))

    def mark_instruction_acked(self, trial: str, seq: int) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "UPDATE instructions SET acked = 1 WHERE trial = ? AND seq = ?", (trial, seq))

    def instructions_for(self, trial: str) -> list[tuple[int, dict, bool]]:
        with self._lock:
            cur = self._conn.execute(
                "SELECT seq, payload, acked FROM instructions WHERE trial = ? ORDER BY seq",
                (trial,))
            return [(r[0], json.loads(r[1]), bool(r[2])) for r in cur.fetchall()]

    def next_instruction_seq(self, trial: str) -> int:
        with self._lock:
            cur = self._conn.execute(
                "SELECT COALESCE(MAX(seq), 0) FROM instructions WHERE trial = ?", (trial,))
            return cur.fetchone()[0] + 1

    # -- submissions and decisions ----------------------------------------------

    def upsert_submission(self, trial: str, object_name: str, byte_len: int,
                          digest: str, uploaded_at: int) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO submissions (trial, object_name, byte_len, digest, uploaded_at) "
                "VALUES (?, ?, ?, ?, ?) "
                "ON CONFLICT(trial, object_name) DO UPDATE SET "
                "byte_len = excluded.byte_len, digest = excluded.digest, "
                "uploaded_at = excluded.uploaded_at",
                (trial, object_name, byte_len, digest, uploaded_at))

    def get_submission(self, trial: str, object_name: str) -> Optional[tuple[int, str, int]]:
        with self._lock:
            cur = self._conn.execute(
                "SELECT byte_len, digest, uploaded_at FROM submissions "
                "WHERE trial = ? AND object_name = ?", (trial, object_name))
            r = cur.fetchone()
        return (r[0], r[1], r[2]) if r else None

    def insert_decision(self, trial: str, verdict: str, judge: str, reason: str,
                        report_json: str, decided_at: int) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO decisions (trial, verdict, judge, reason, report_json, decided_at) "
                "VALUES (?, ?, ?, ?, ?, ?)",
                (trial, verdict, judge, reason, report_json, decided_at))

    def get_decision(self, trial: str) -> Optional[tuple[str, str, str, str, int]]:
        with self._lock:
            cur = self._conn.execute(
                "SELECT verdict, judge, reason, report_json, decided_at FROM decisions "
                "WHERE trial = ?", (trial,))
            r = cur.fetchone()
        return tuple(r) if r else None

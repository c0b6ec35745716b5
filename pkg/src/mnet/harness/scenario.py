"""Scenario runner: server + N actors over the simulated transport, then the
verifier, then an expected-vs-actual check matrix.

Everything derives from the scenario seed: trial ids, submission codes,
challenge times, frame pixels, transport losses, tamper positions. Two runs
of one spec produce byte-identical outcome serializations, temp directories
aside (no paths appear in the outcome).
"""

from __future__ import annotations

import json
import random
import urllib.parse
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from mnet.client.recorder import Recorder
from mnet.client.session import (
    ClientIO,
    SessionConfig,
    SessionCore,
    SessionOutcome,
    UploadRejected,
    UploadTransportError,
)
from mnet.client.sources import MnvReplaySource, SyntheticSource
from mnet.harness.actors import SESSION_CLASSES, ActorKind, ReplayerSession
from mnet.harness.sim import Scheduler, SimConnection, SimTransport
from mnet.protocol import CodeIssued, Error, Hello, TrialState
from mnet.server import (
    BadSignature,
    ChallengeSchedule,
    ExpiredUrl,
    LocalObjectStore,
    QuotaPolicy,
    ServerCore,
    SqliteStore,
)
from mnet.server.session import ServerSession
from mnet.taskpack._seeding import derive_rng
from mnet.taskpack.payloads import instruction_payload
from mnet.verifier import verify_submission

ANY = "any"

TASK_ROTATION = ("PegInHole", "CableManagement", "GraspingInClutter",
                 "TabletopManipulation", "BlockArrangement")

_SERVER_TICK_US = 200_000
_ACTOR_STAGGER_US = 300_000


class ScenarioTimeout(Exception):
    pass


@dataclass(frozen=True)
class ActorSpec:
    kind: ActorKind
    name: str


@dataclass
class ScenarioSpec:
    seed: int = 0
    actors: list[ActorSpec] = field(default_factory=lambda: [ActorSpec(ActorKind.HONEST, "honest-0")])
    session_s: float = 25.0
    fps: int = 5
    frame_width: int = 24
    frame_height: int = 18
    latency_s: tuple[float, float] = (0.005, 0.200)
    drop_prob: float = 0.0
    partitions_s: list[tuple[float, float]] = field(default_factory=list)
    quota_max: int = 3
    quota_window_s: int = 7 * 24 * 3600
    challenge_mean_s: float = 10.0
    challenge_first_after_s: float = 3.0
    challenge_deadline_s: float = 8.0
    client_retry_s: float = 0.3
    challenge_resend_s: float = 1.0
    budget_factor: float = 10.0
    upload_faults: dict = field(default_factory=dict)  # actor name -> [fractions]

    @classmethod
    def from_json(cls, doc: dict) -> "ScenarioSpec":
        doc = dict(doc)
        actors = [ActorSpec(ActorKind(a["kind"]), a["name"]) for a in doc.pop("actors")]
        if "latency_s" in doc:
            doc["latency_s"] = tuple(doc["latency_s"])
        if "partitions_s" in doc:
            doc["partitions_s"] = [tuple(p) for p in doc["partitions_s"]]
        known = {k: v for k, v in doc.items() if k in cls.__dataclass_fields__ and k != "actors"}
        return cls(actors=actors, **known)

    def to_json(self) -> dict:
        doc = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "actors"}
        doc["latency_s"] = list(self.latency_s)
        doc["actors"] = [{"kind": a.kind.value, "name": a.name} for a in self.actors]
        return doc


@dataclass
class ScenarioOutcome:
    seed: int
    rows: list[dict]
    sim_elapsed_s: float
    store: Optional[SqliteStore] = None  # populated only with keep_store=True
    objects: Optional[LocalObjectStore] = None

    def to_json(self) -> str:
        return json.dumps({"seed": self.seed, "rows": self.rows,
                           "sim_elapsed_s": round(self.sim_elapsed_s, 3)},
                          sort_keys=True, indent=1)


def _derive_int(label: str, *parts) -> int:
    return derive_rng(label, *parts).getrandbits(63)


class SimClientIO(ClientIO):
    """ClientIO over the scheduler plus an in-process upload shim."""

    def __init__(self, scheduler: Scheduler, conn: SimConnection, core: ServerCore,
                 upload_faults: Optional[list[float]] = None) -> None:
        self._scheduler = scheduler
        self._conn = conn
        self._core = core
        self._upload_faults = list(upload_faults or [])
        self.outcome: Optional[SessionOutcome] = None
        self.finished_at_us: Optional[int] = None
        self.instructions: list = []
        self._capture_timer = None
        self.on_abandon = lambda: None  # wired by the server endpoint

    def now_us(self) -> int:
        return self._scheduler.now_us

    def send(self, msg) -> None:
        self._conn.client_send(msg)

    def schedule(self, delay_us: int, fn):
        return self._scheduler.schedule_in(delay_us, fn)

    def cancel(self, handle) -> None:
        self._scheduler.cancel(handle)

    def start_capture(self, session: SessionCore) -> None:
        period = 1_000_000 // session.config.fps

        def tick() -> None:
            if session.record_frame():
                self._capture_timer = self._scheduler.schedule_in(period, tick)
            else:
                self._capture_timer = None
                session.capture_finished()

        self._capture_timer = self._scheduler.schedule_in(0, tick)

    def upload(self, archive: Path, url: str, expiry_unix: int) -> tuple[str, int]:
        parsed = urllib.parse.urlparse(url)
        params = urllib.parse.parse_qs(parsed.query)
        _, _, trial, object_name = parsed.path.split("/")
        fault = self._upload_faults.pop(0) if self._upload_faults else None

        def chunks():
            data = Path(archive).read_bytes()
            trip = None if fault is None else int(len(data) * fault)
            sent = 0
            step = 1 << 15
            for off in range(0, len(data), step):
                piece = data[off:off + step]
                if trip is not None and sent + len(piece) >= trip:
                    raise ConnectionResetError(f"injected reset at {fault:.0%}")
                sent += len(piece)
                yield piece

        try:
            return self._core.validate_upload(
                params["token"][0], trial, object_name,
                int(params["expiry"][0]), self.now_us(), chunks())
        except ConnectionResetError as exc:
            raise UploadTransportError(str(exc)) from exc
        except ExpiredUrl as exc:
            raise UploadTransportError(str(exc)) from exc
        except BadSignature as exc:
            raise UploadRejected(str(exc)) from exc

    def on_finished(self, outcome: SessionOutcome) -> None:
        self.outcome = outcome
        self.finished_at_us = self.now_us()
        if self._capture_timer is not None:
            self._scheduler.cancel(self._capture_timer)
            self._capture_timer = None
        if outcome.status != "submitted" and not self._conn.c2s.closed:
            self._conn.close_from_client(self.on_abandon)

    def publish_instruction(self, msg) -> None:
        self.instructions.append(msg)


class _ServerEndpoint:
    """Owns one ServerSession and its periodic tick inside the simulation."""

    def __init__(self, scheduler: Scheduler, core: ServerCore, conn: SimConnection,
                 spec: ScenarioSpec, client_io: SimClientIO, client_session: SessionCore) -> None:
        self._scheduler = scheduler
        self._conn = conn
        self._client_io = client_io
        self._client_session = client_session
        self._closed = False
        self.session = ServerSession(
            core, send=conn.server_send,
            instruction_source=lambda task, trial: instruction_payload(
                task, seed=_derive_int("instruction", spec.seed, trial) % (2**31)),
            challenge_resend_us=int(spec.challenge_resend_s * 1e6),
            now_us=scheduler.now_us)
        conn.c2s.deliver = self._on_message
        conn.s2c.deliver = self._to_client
        client_io.on_abandon = lambda: self.session.on_disconnect(scheduler.now_us)
        self._tick()

    def _to_client(self, msg) -> None:
        self._client_session.on_message(msg)

    def _on_message(self, msg) -> None:
        self.session.on_message(msg, self._scheduler.now_us)
        self._maybe_close()

    def _tick(self) -> None:
        if self._closed:
            return
        self.session.on_tick(self._scheduler.now_us)
        if not self._maybe_close():
            self._scheduler.schedule_in(_SERVER_TICK_US, self._tick)

    def _maybe_close(self) -> bool:
        if self.session.done and not self._closed:
            self._closed = True
            self._conn.close_from_server(self._client_session.on_connection_closed)
            return True
        return False


class _SpammerDriver:
    """Registers trials until refused; every accepted trial is abandoned."""

    def __init__(self, scheduler: Scheduler, transport: SimTransport, core: ServerCore,
                 spec: ScenarioSpec, team: str, task: str) -> None:
        self._scheduler = scheduler
        self._transport = transport
        self._core = core
        self._spec = spec
        self._team = team
        self._task = task
        self.registered = 0
        self.refused = False
        self.done = False
        self._attempts_left = spec.quota_max + 3
        self._retry_timer = None
        self._conn: Optional[SimConnection] = None

    def start(self) -> None:
        self._next_attempt()

    def _next_attempt(self) -> None:
        if self._attempts_left <= 0:
            self.done = True
            return
        self._attempts_left -= 1
        conn = self._transport.connect()
        self._conn = conn
        session = ServerSession(self._core, send=conn.server_send,
                                now_us=self._scheduler.now_us)
        conn.c2s.deliver = lambda msg: session.on_message(msg, self._scheduler.now_us)
        conn.s2c.deliver = self._on_reply
        self._answered = False
        self._send_hello()

    def _send_hello(self) -> None:
        if self._answered:
            return
        self._conn.client_send(Hello(team=self._team, task=self._task, client_version="0.1.0"))
        self._retry_timer = self._scheduler.schedule_in(500_000, self._send_hello)

    def _on_reply(self, msg) -> None:
        if self._answered:
            return
        if isinstance(msg, CodeIssued):
            self._answered = True
            self._scheduler.cancel(self._retry_timer)
            self.registered += 1
            self._conn.close_from_client(lambda: None)
            self._scheduler.schedule_in(200_000, self._next_attempt)
        elif isinstance(msg, Error) and msg.code == "QuotaExceeded":
            self._answered = True
            self._scheduler.cancel(self._retry_timer)
            self.refused = True
            self.done = True
            self._conn.close_from_client(lambda: None)


def _make_stale_video(path: Path, spec: ScenarioSpec, seed: int) -> None:
    """A previous session's recording, 1.5x the live session length."""
    source = SyntheticSource(seed=seed, width=spec.frame_width, height=spec.frame_height)
    rec = Recorder(path, fps=spec.fps, width=spec.frame_width, height=spec.frame_height)
    period = 1_000_000 // spec.fps
    for k in range(int(spec.session_s * 1.5 * spec.fps)):
        rec.append(source.next_frame(capture_ts=k * period, frame_index=k))
    rec.close()


def run_scenario(spec: ScenarioSpec, workdir: Path, keep_store: bool = False) -> ScenarioOutcome:
    workdir = Path(workdir)
    scheduler = Scheduler()
    start_us = scheduler.now_us
    store = SqliteStore(":memory:")
    objects = LocalObjectStore(workdir / "objects")
    core = ServerCore(
        store, objects,
        secret=derive_rng("secret", spec.seed).getrandbits(256).to_bytes(32, "big"),
        url_base="http://sim",
        quota=QuotaPolicy(max_trials=spec.quota_max, window_s=spec.quota_window_s),
        schedule=ChallengeSchedule(mean_interval_s=spec.challenge_mean_s,
                                   first_after_s=spec.challenge_first_after_s,
                                   response_deadline_s=spec.challenge_deadline_s),
        rng=random.Random(_derive_int("server-rng", spec.seed)),
    )
    transport = SimTransport(scheduler, seed=_derive_int("transport", spec.seed),
                             latency_range_s=spec.latency_s, drop_prob=spec.drop_prob,
                             partitions_s=spec.partitions_s)

    drivers: dict[str, object] = {}
    for index, actor in enumerate(spec.actors):
        team = f"team-{actor.name}"
        store.add_team(team, start_us)
        task = TASK_ROTATION[index % len(TASK_ROTATION)]
        start_at = start_us + index * _ACTOR_STAGGER_US

        if actor.kind is ActorKind.QUOTA_SPAMMER:
            driver = _SpammerDriver(scheduler, transport, core, spec, team, task)
            scheduler.schedule_at(start_at, driver.start)
            drivers[actor.name] = driver
            continue

        out_dir = workdir / actor.name
        source_seed = _derive_int("source", spec.seed, actor.name) % (2**31)
        conn = transport.connect()
        io = SimClientIO(scheduler, conn, core,
                         upload_faults=spec.upload_faults.get(actor.name))
        config = SessionConfig(
            team=team, task=task, out_dir=out_dir, fps=spec.fps,
            duration_s=spec.session_s,
            retry_interval_us=int(spec.client_retry_s * 1e6))

        cls = SESSION_CLASSES[actor.kind]
        if actor.kind is ActorKind.REPLAYER:
            stale = workdir / f"{actor.name}-stale.mnv"
            _make_stale_video(stale, spec, seed=source_seed + 7)
            session = cls(config, MnvReplaySource(stale), io)
            session.stale_video = stale
        else:
            source = SyntheticSource(seed=source_seed, width=spec.frame_width,
                                     height=spec.frame_height)
            session = cls(config, source, io)
        if actor.kind in (ActorKind.BYTE_FLIPPER, ActorKind.FRAME_SUBSTITUTER,
                          ActorKind.LOG_EDITOR):
            session.tamper_rng = random.Random(_derive_int("tamper", spec.seed, actor.name))

        _ServerEndpoint(scheduler, core, conn, spec, io, session)
        _schedule_actor(scheduler, session, io, spec, start_at)
        drivers[actor.name] = io

    budget_us = int(spec.session_s * spec.budget_factor * 1e6)
    scheduler.run(until_us=start_us + budget_us)

    unfinished = [name for name, drv in drivers.items() if not _is_done(drv)]
    if unfinished:
        raise ScenarioTimeout(f"actors never finished: {unfinished}")

    rows = []
    for actor in spec.actors:
        drv = drivers[actor.name]
        rows.append(_outcome_row(actor, drv, core, start_us))
    rows.sort(key=lambda r: r["actor"])
    elapsed = (scheduler.now_us - start_us) / 1e6
    outcome = ScenarioOutcome(seed=spec.seed, rows=rows, sim_elapsed_s=elapsed)
    if keep_store:
        outcome.store = store
        outcome.objects = objects
    else:
        store.close()
    return outcome


def _schedule_actor(scheduler, session, io, spec: ScenarioSpec, start_at: int) -> None:
    scheduler.schedule_at(start_at, session.start)
    # Scripted task activity: three finished steps and one skipped step.
    for frac, kind, item in ((0.30, "TaskFinished", "step_1"),
                             (0.55, "TaskFinished", "step_2"),
                             (0.80, "TaskFinished", "step_3"),
                             (0.90, "TaskSkipped", "step_4")):
        at = start_at + int(spec.session_s * frac * 1e6)

        def fire(kind=kind, item=item):
            if session.phase in ("capturing",):
                session.submit_event(kind, {"item": item})

        scheduler.schedule_at(at, fire)


def _is_done(driver) -> bool:
    if isinstance(driver, _SpammerDriver):
        return driver.done
    return driver.outcome is not None


def _outcome_row(actor: ActorSpec, driver, core: ServerCore, start_us: int) -> dict:
    if isinstance(driver, _SpammerDriver):
        return {"actor": actor.name, "kind": actor.kind.value,
                "registered": driver.registered, "refused": driver.refused}

    outcome = driver.outcome
    row = {
        "actor": actor.name,
        "kind": actor.kind.value,
        "submitted": outcome.status == "submitted",
        "status": outcome.status,
        "trial": outcome.trial,
        "frame_count": outcome.frame_count,
        "finished_after_s": round((driver.finished_at_us - start_us) / 1e6, 3),
    }
    if outcome.status == "submitted":
        report = verify_submission(core.store, core.objects, outcome.trial)
        row["checks"] = {
            "archive": report.archive_digest_match,
            "final": report.final_video_digest_match,
            "timeline": report.timeline.ok,
            "events": report.event_consistency,
            "n_challenges": len(report.per_challenge),
            "n_digest_false": sum(1 for c in report.per_challenge if not c.digest_match),
            "n_timing_false": sum(1 for c in report.per_challenge if not c.timing_ok),
            "n_rederive_false": sum(1 for c in report.per_challenge
                                    if c.rederived_from_video is False),
        }
        row["automated_pass"] = report.automated_pass()
    return row


# -- expected matrix ---------------------------------------------------------------


def expected_matrix(spec: ScenarioSpec) -> dict[str, dict]:
    """Ground-truth check outcomes per actor; ANY marks cells an adversary's
    single random mutation may or may not disturb (e.g. a byte flip landing
    in a challenged frame's chunk)."""
    matrix = {}
    for actor in spec.actors:
        k = actor.kind
        if k is ActorKind.QUOTA_SPAMMER:
            matrix[actor.name] = {"registered": spec.quota_max, "refused": True}
            continue
        row = {"submitted": True, "archive": True, "final": True, "timeline": True,
               "events": True, "n_digest_false": 0, "n_timing_false": 0,
               "n_rederive_false": 0}
        if k is ActorKind.BYTE_FLIPPER:
            row.update(final=False, timeline=ANY, n_rederive_false=ANY)
        elif k is ActorKind.FRAME_SUBSTITUTER:
            row.update(n_digest_false=1)
        elif k is ActorKind.LOG_EDITOR:
            row.update(events=False)
        elif k is ActorKind.REPLAYER:
            row.update(timeline=False)
        elif k is ActorKind.TRUNCATOR:
            row.update(final=False, timeline=False, n_rederive_false=ANY)
        matrix[actor.name] = row
    return matrix


def matrix_matches(expected: dict[str, dict], outcome: ScenarioOutcome) -> list[str]:
    """Cell-for-cell comparison; returns human-readable mismatches (empty = pass)."""
    mismatches = []
    rows = {r["actor"]: r for r in outcome.rows}
    for name, want in expected.items():
        got = rows.get(name)
        if got is None:
            mismatches.append(f"{name}: no outcome row")
            continue
        flat = dict(got)
        flat.update(got.get("checks") or {})
        for cell, want_val in want.items():
            if want_val == ANY:
                continue
            if flat.get(cell) != want_val:
                mismatches.append(f"{name}.{cell}: expected {want_val!r}, got {flat.get(cell)!r}")
    return mismatches

"""Client session state machine, independent of transport and clock.

The same SessionCore runs over a real TCP event loop and inside the
deterministic harness: drivers implement ClientIO (send, timers, upload,
capture start) and deliver inbound messages to on_message.

Reliability model: the wire may drop messages (the harness does so on
purpose), so every client-initiated request retries until answered --
events are stop-and-wait so the server never sees seq gaps -- and
server-initiated messages are safe to receive twice (cached challenge
answers are re-sent verbatim, instruction acks are idempotent).

Capture is not handled here beyond bookkeeping: the capture flow calls
record_frame() and capture_finished(), touching only the recorder and the
ring, so a slow challenge handler can never stall the camera.
"""

from __future__ import annotations

import abc
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from mnet.client.packaging import build_manifest, package_submission, write_events_jsonl
from mnet.client.recorder import Recorder
from mnet.client.sources import FrameSource, SourceExhausted
from mnet.protocol import (
    Challenge,
    ChallengeResponse,
    CodeIssued,
    Error,
    Event,
    EventAck,
    Finalize,
    FinalizeAck,
    Heartbeat,
    Hello,
    Instruction,
    InstructionAck,
    UploadComplete,
    UploadUrl,
    UploadUrlRequest,
    WireMessage,
    canonical_frame_digest,
    encode_frame_png,
)

CLIENT_VERSION = "0.1.0"

RETRY_INTERVAL_US = 2_000_000
HEARTBEAT_INTERVAL_US = 5_000_000
MAX_HELLO_ATTEMPTS = 30
MAX_UPLOAD_ATTEMPTS = 8
UPLOAD_BACKOFF_BASE_US = 500_000
UPLOAD_BACKOFF_CAP_US = 8_000_000


class UploadTransportError(Exception):
    """Transient transfer failure: connection reset, timeout, expired URL."""


class UploadRejected(Exception):
    """Permanent refusal (bad signature); retrying the same way is pointless."""


@dataclass(frozen=True)
class SessionOutcome:
    status: str  # submitted | resumable | protocol_error
    detail: str = ""
    trial: Optional[str] = None
    code: Optional[str] = None
    manifest_path: Optional[Path] = None
    archive_path: Optional[Path] = None
    frame_count: int = 0
    upload_attempts_failed: int = 0  # each one forced a fresh pre-signed URL

    @property
    def exit_code(self) -> int:
        return {"submitted": 0, "resumable": 2}.get(self.status, 3)


class ClientIO(abc.ABC):
    """Driver contract: real event loop or simulated scheduler."""

    @abc.abstractmethod
    def now_us(self) -> int: ...

    @abc.abstractmethod
    def send(self, msg: WireMessage) -> None: ...

    @abc.abstractmethod
    def schedule(self, delay_us: int, fn) -> object: ...

    @abc.abstractmethod
    def cancel(self, handle) -> None: ...

    @abc.abstractmethod
    def start_capture(self, session: "SessionCore") -> None: ...

    @abc.abstractmethod
    def upload(self, archive: Path, url: str, expiry_unix: int) -> tuple[str, int]:
        """PUT the archive; returns (digest, byte_len) as stored server-side."""

    @abc.abstractmethod
    def on_finished(self, outcome: SessionOutcome) -> None: ...

    def display_code(self, code: str) -> None:
        """Shown prominently so the operator can place it in view of the camera."""

    def publish_instruction(self, msg: Instruction) -> None:
        """Hook for middleware bridges / harness inspection."""


@dataclass
class SessionConfig:
    team: str
    task: str
    out_dir: Path
    fps: int = 10
    duration_s: float = 60.0
    ring_capacity: int = 64
    heartbeat_interval_us: int = HEARTBEAT_INTERVAL_US
    retry_interval_us: int = RETRY_INTERVAL_US
    max_upload_attempts: int = MAX_UPLOAD_ATTEMPTS

    @property
    def frame_budget(self) -> int:
        return round(self.fps * self.duration_s)


class SessionCore:
    def __init__(self, config: SessionConfig, source: FrameSource, io: ClientIO) -> None:
        self.config = config
        self.source = source
        self.io = io
        self.out_dir = Path(config.out_dir)
        self.phase = "idle"
        self.trial: Optional[str] = None
        self.code: Optional[str] = None
        self.recorder: Optional[Recorder] = None
        self.summary = None
        self.outcome: Optional[SessionOutcome] = None

        self._t0 = 0
        self._frame_counter = 0
        self._hello_attempts = 0
        self._event_queue: list[tuple[str, dict, int]] = []
        self._inflight_event: Optional[Event] = None
        self._next_seq = 1
        self._acked_events: list[dict] = []
        self._challenge_answers: dict[int, ChallengeResponse] = {}
        self._challenge_files: dict[int, str] = {}
        self._instructions: dict[int, dict] = {}
        self._capture_done = False
        self._upload_attempts = 0
        self._archive_digest: Optional[str] = None
        self._archive_path: Optional[Path] = None
        self._manifest_path: Optional[Path] = None
        self._timers: dict[str, object] = {}
        self._challenge_delay_s = 0.0  # test hook: simulate slow handling
        self.event_acked_hook = None  # control-socket bridge relay

    # -- helpers -----------------------------------------------------------------

    def rel_us(self, now: Optional[int] = None) -> int:
        return (self.io.now_us() if now is None else now) - self._t0

    def _arm(self, name: str, delay_us: int, fn) -> None:
        self._disarm(name)
        self._timers[name] = self.io.schedule(delay_us, fn)

    def _disarm(self, name: str) -> None:
        handle = self._timers.pop(name, None)
        if handle is not None:
            self.io.cancel(handle)

    def _finish(self, status: str, detail: str = "") -> None:
        if self.phase == "done":
            return
        self.phase = "done"
        for name in list(self._timers):
            self._disarm(name)
        self.outcome = SessionOutcome(
            status=status, detail=detail, trial=self.trial, code=self.code,
            manifest_path=self._manifest_path, archive_path=self._archive_path,
            frame_count=self.recorder.frame_count if self.recorder else 0,
            upload_attempts_failed=self._upload_attempts)
        self.io.on_finished(self.outcome)

    # -- session start ------------------------------------------------------------

    def start(self) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        (self.out_dir / "frames").mkdir(exist_ok=True)
        self.phase = "hello"
        self._send_hello()

    def _send_hello(self) -> None:
        self._hello_attempts += 1
        if self._hello_attempts > MAX_HELLO_ATTEMPTS:
            self._finish("protocol_error", "server never answered Hello")
            return
        self.io.send(Hello(team=self.config.team, task=self.config.task,
                           client_version=CLIENT_VERSION))
        self._arm("hello", self.config.retry_interval_us, self._send_hello)

    def _on_code_issued(self, msg: CodeIssued) -> None:
        if self.trial is not None:
            return  # replayed
        self._disarm("hello")
        self.trial = msg.trial
        self.code = msg.code
        self._t0 = self.io.now_us()
        self.phase = "capturing"
        self.io.display_code(msg.code)
        self.recorder = Recorder(
            self.out_dir / "video.mnv", fps=self.config.fps,
            width=self.source.width, height=self.source.height,
            ring_capacity=self.config.ring_capacity)
        self._heartbeat()
        self.submit_event("Status", {"phase": "session_started"})
        self.io.start_capture(self)

    def _heartbeat(self) -> None:
        self.io.send(Heartbeat())
        self._arm("heartbeat", self.config.heartbeat_interval_us, self._heartbeat)

    # -- capture flow (driver-called) ------------------------------------------------

    def record_frame(self) -> bool:
        """Capture one frame; returns False when the budget is exhausted."""
        if self._capture_done or self.recorder is None:
            return False
        if self._frame_counter >= self.config.frame_budget:
            return False
        idx = self._frame_counter
        frame = self.source.next_frame(self.rel_us(), idx)
        self.recorder.append(frame)
        self._frame_counter += 1
        return self._frame_counter < self.config.frame_budget

    def capture_finished(self) -> None:
        """Capture flow is done; close the recording and move to finalize."""
        if self._capture_done:
            return
        self._capture_done = True
        self.summary = self.recorder.close()
        self._maybe_finalize()

    # -- events (stop-and-wait) ----------------------------------------------------

    def submit_event(self, kind: str, payload: dict) -> None:
        self._event_queue.append((kind, payload, self.rel_us()))
        self._pump_events()

    def _pump_events(self) -> None:
        if self._inflight_event is not None or not self._event_queue:
            return
        kind, payload, client_ts = self._event_queue.pop(0)
        self._inflight_event = Event(seq=self._next_seq, client_ts=client_ts,
                                     kind=kind, payload=payload)
        self._next_seq += 1
        self._send_inflight_event()

    def _send_inflight_event(self) -> None:
        if self._inflight_event is None:
            return
        self.io.send(self._inflight_event)
        self._arm("event", self.config.retry_interval_us, self._send_inflight_event)

    def _on_event_ack(self, msg: EventAck) -> None:
        ev = self._inflight_event
        if ev is None or msg.seq != ev.seq:
            return
        self._disarm("event")
        self._inflight_event = None
        self._acked_events.append({
            "seq": ev.seq, "client_ts": ev.client_ts, "kind": ev.kind, "payload": ev.payload})
        if self.event_acked_hook is not None:
            self.event_acked_hook(ev, msg)
        self._pump_events()
        self._maybe_finalize()

    # -- challenges ------------------------------------------------------------------

    def _on_challenge(self, msg: Challenge) -> None:
        cached = self._challenge_answers.get(msg.challenge_id)
        if cached is not None:
            self.io.send(cached)
            return
        frame = self.recorder.ring.latest() if self.recorder else None
        if frame is None:
            self.io.send(Error(code="EmptyRing",
                               message=f"challenge {msg.challenge_id} arrived before first frame"))
            return
        if self._challenge_delay_s:
            time.sleep(self._challenge_delay_s)
        digest = canonical_frame_digest(frame)
        fname = f"frames/ch_{msg.challenge_id:06d}.png"
        (self.out_dir / fname).write_bytes(encode_frame_png(frame))
        resp = ChallengeResponse(challenge_id=msg.challenge_id,
                                 frame_index=frame.frame_index,
                                 capture_ts=frame.capture_ts, digest=digest)
        self._challenge_answers[msg.challenge_id] = resp
        self._challenge_files[msg.challenge_id] = fname
        self.io.send(resp)

    # -- instructions ------------------------------------------------------------------

    def _on_instruction(self, msg: Instruction) -> None:
        first_delivery = msg.seq not in self._instructions
        self._instructions[msg.seq] = msg.task_payload
        self.io.send(InstructionAck(seq=msg.seq))
        if first_delivery:
            self.io.publish_instruction(msg)

    @property
    def instructions(self) -> dict[int, dict]:
        return dict(self._instructions)

    # -- finalize and packaging -----------------------------------------------------------

    def _maybe_finalize(self) -> None:
        if (self.phase == "capturing" and self._capture_done
                and self._inflight_event is None and not self._event_queue):
            self.phase = "finalizing"
            self._send_finalize()

    def _send_finalize(self) -> None:
        if self.phase != "finalizing":
            return
        self.io.send(Finalize(final_video_digest=self.summary.digest,
                              frame_count=self.summary.frame_count,
                              video_duration_us=self.summary.duration_us))
        self._arm("finalize", self.config.retry_interval_us, self._send_finalize)

    def _on_finalize_ack(self) -> None:
        if self.phase != "finalizing":
            return
        self._disarm("finalize")
        self.phase = "packaging"
        self._package()
        self._request_upload_url()

    def _package(self) -> None:
        events_path = self.out_dir / "events.jsonl"
        write_events_jsonl(events_path, self._acked_events)
        files = {"video.mnv": self.summary.path, "events.jsonl": events_path}
        challenges = []
        for cid, resp in sorted(self._challenge_answers.items()):
            fname = self._challenge_files[cid]
            files[fname] = self.out_dir / fname
            challenges.append({
                "challenge_id": cid, "frame_index": resp.frame_index,
                "capture_ts": resp.capture_ts, "digest": resp.digest,
                "frame_file": fname})
        # Adversary hooks run before the manifest is built so a tampering
        # client still produces a self-consistent package; only the digests
        # registered with the server in real time can betray it.
        summary = self.mutate_summary(self.summary)
        self.mutate_files(files)
        manifest = build_manifest(trial=self.trial, code=self.code, summary=summary,
                                  challenges=challenges, event_count=len(self._acked_events),
                                  files=files)
        self._manifest_path = self.out_dir / "manifest.json"
        self._manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=1))
        self._archive_path = self.out_dir / "package.zip"
        self._archive_digest = package_submission(self._archive_path, manifest, files)

    def mutate_summary(self, summary):
        """Adversarial override point; honest sessions return it unchanged."""
        return summary

    def mutate_files(self, files: dict) -> None:
        """Adversarial override point; honest sessions do nothing."""

    def _request_upload_url(self) -> None:
        if self.phase not in ("packaging", "uploading"):
            return
        self.phase = "uploading"
        self.io.send(UploadUrlRequest())
        self._arm("url", self.config.retry_interval_us, self._request_upload_url)

    def _on_upload_url(self, msg: UploadUrl) -> None:
        if self.phase != "uploading":
            return
        self._disarm("url")
        try:
            self.io.upload(self._archive_path, msg.url, msg.expiry_unix)
        except UploadRejected as exc:
            self._finish("protocol_error", f"upload permanently rejected: {exc}")
            return
        except (UploadTransportError, SourceExhausted) as exc:
            self._upload_attempts += 1
            if self._upload_attempts >= self.config.max_upload_attempts:
                self._finish("resumable", f"upload failed after retries: {exc}")
                return
            backoff = min(UPLOAD_BACKOFF_BASE_US * (2 ** self._upload_attempts),
                          UPLOAD_BACKOFF_CAP_US)
            self.phase = "packaging"  # re-enter url request on timer
            self._arm("upload_backoff", backoff, self._request_upload_url)
            return
        self.phase = "completing"
        self._send_upload_complete()

    def _send_upload_complete(self) -> None:
        if self.phase != "completing":
            return
        self.io.send(UploadComplete(archive_digest=self._archive_digest))
        self._arm("complete", self.config.retry_interval_us, self._send_upload_complete)

    # -- inbound dispatch -------------------------------------------------------------------

    def on_message(self, msg: WireMessage) -> None:
        if self.phase == "done":
            return
        if isinstance(msg, CodeIssued):
            self._on_code_issued(msg)
        elif isinstance(msg, EventAck):
            self._on_event_ack(msg)
        elif isinstance(msg, Challenge):
            self._on_challenge(msg)
        elif isinstance(msg, Instruction):
            self._on_instruction(msg)
        elif isinstance(msg, FinalizeAck):
            self._on_finalize_ack()
        elif isinstance(msg, UploadUrl):
            self._on_upload_url(msg)
        elif isinstance(msg, Error):
            self._on_error(msg)
        elif isinstance(msg, Heartbeat):
            pass
        # Anything else is server-bound traffic echoed by a confused peer; ignore.

    def _on_error(self, msg: Error) -> None:
        if msg.code in ("QuotaExceeded", "UnknownTeam"):
            self._finish("protocol_error", f"{msg.code}: {msg.message}")
        elif msg.code in ("DigestMismatch", "MissingUpload"):
            # Stored object does not match: upload again via a fresh URL.
            if self.phase == "completing":
                self._disarm("complete")
                self._upload_attempts += 1
                if self._upload_attempts >= self.config.max_upload_attempts:
                    self._finish("resumable", f"server kept refusing archive: {msg.message}")
                    return
                self.phase = "packaging"
                self._request_upload_url()
        elif msg.code in ("DuplicateResponse", "EmptyRing", "OutOfOrderSeq"):
            pass  # benign under at-least-once delivery
        elif msg.code == "IllegalTransition":
            self._finish("protocol_error", f"server refused transition: {msg.message}")
        # Unknown error codes: keep going; the server decides when to drop us.

    def on_connection_closed(self) -> None:
        """Server closed the stream. After UploadComplete that is the success
        signal; earlier it means the trial broke or the upload must resume."""
        if self.phase == "done":
            return
        if self.phase == "completing":
            self._finish("submitted")
        elif self._archive_path is not None:
            self._finish("resumable", "connection lost after packaging")
        else:
            self._finish("protocol_error", "connection lost mid-session")

    def abort(self, reason: str) -> None:
        """Driver-detected unrecoverable failure (operator abort, dead source)."""
        self._finish("protocol_error", reason)

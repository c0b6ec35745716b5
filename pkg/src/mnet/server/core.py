"""Coordinator core: every trial-facing operation behind one lock.

All temporal operations take explicit microsecond timestamps so the same
code runs against the wall clock (TCP server), a simulated clock (harness),
and fixed instants (tests). Randomness is injected for the same reason:
the TCP server uses the OS CSPRNG, the harness a seeded generator.

Delivery-level idempotence (replaying acks for retried messages) lives in
the session layer; this core enforces the strict lifecycle contract.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass
from typing import Iterable, Optional

from mnet.protocol import (
    Challenge,
    ChallengeResponse,
    CodeIssued,
    EventAck,
    Finalize,
    FinalizeAck,
    IllegalTransition,
    Instruction,
    LifecycleEvent,
    TrialState,
    generate_submission_code,
    transition,
)
from mnet.protocol.messages import Event
from mnet.server.challenges import ChallengeSchedule
from mnet.server.persistence import (
    ChallengeRow,
    EventRow,
    ResponseRow,
    SqliteStore,
    TrialRow,
)
from mnet.server.signing import SignedUploadUrl, issue_signed_url, verify_upload_token
from mnet.server.storage import ObjectStore

PACKAGE_OBJECT = "package.zip"
HEARTBEAT_TIMEOUT_S = 60.0


class ServerError(Exception):
    """Base for protocol-visible errors; ``code`` goes on the wire."""

    code = "ServerError"

    def __init__(self, message: str = "", **details) -> None:
        super().__init__(message or self.code)
        self.details = details


class UnknownTeam(ServerError):
    code = "UnknownTeam"


class QuotaExceeded(ServerError):
    code = "QuotaExceeded"


class OutOfOrderSeq(ServerError):
    code = "OutOfOrderSeq"


class UnknownChallenge(ServerError):
    code = "UnknownChallenge"


class DuplicateResponse(ServerError):
    code = "DuplicateResponse"


class ExpiredUrl(ServerError):
    code = "ExpiredUrl"


class BadSignature(ServerError):
    code = "BadSignature"


class DigestMismatch(ServerError):
    code = "DigestMismatch"


class MissingUpload(ServerError):
    code = "MissingUpload"


@dataclass(frozen=True)
class QuotaPolicy:
    max_trials: int = 3
    window_s: int = 7 * 24 * 3600

    def __post_init__(self) -> None:
        if self.max_trials < 1:
            raise ValueError("max_trials must be >= 1")
        if self.window_s <= 0:
            raise ValueError("window must be positive")


class ServerCore:
    def __init__(
        self,
        store: SqliteStore,
        objects: ObjectStore,
        secret: bytes,
        url_base: str = "http://127.0.0.1:0",
        quota: QuotaPolicy = QuotaPolicy(),
        schedule: ChallengeSchedule = ChallengeSchedule(),
        rng: Optional[random.Random] = None,
    ) -> None:
        self.store = store
        self.objects = objects
        self.secret = secret
        self.url_base = url_base
        self.quota = quota
        self.schedule = schedule
        self.rng = rng or random.SystemRandom()
        self.lock = threading.RLock()

    # -- lifecycle helpers -----------------------------------------------------

    def _trial(self, trial_id: str) -> TrialRow:
        row = self.store.get_trial(trial_id)
        if row is None:
            raise ServerError(f"unknown trial {trial_id}")
        return row

    def _advance(self, row: TrialRow, event: LifecycleEvent, now: int) -> TrialState:
        """Validate and persist a state change (snapshot + transition log)."""
        nxt = transition(row.state, event)
        if nxt != row.state:
            self.store.apply_transition(row.trial, row.state, event.value, nxt, now)
        return nxt

    def _new_trial_id(self) -> str:
        return self.rng.getrandbits(128).to_bytes(16, "big").hex()

    # -- registration and session start ------------------------------------------

    def register_trial(self, team: str, task: str, now: int) -> TrialRow:
        """Persist a new trial in Registered state, under the quota window.

        Every previously registered trial in [now - window, now] counts,
        terminal or broken ones included: abandoning runs must not buy
        extra attempts.
        """
        with self.lock:
            if not self.store.has_team(team):
                raise UnknownTeam(f"team {team!r} is not registered")
            window_us = self.quota.window_s * 1_000_000
            stamps = self.store.registered_in_window(team, task, now - window_us, now)
            if len(stamps) >= self.quota.max_trials:
                retry_after_us = stamps[0] + window_us - now
                raise QuotaExceeded(
                    f"{self.quota.max_trials} trials per window",
                    retry_after_s=max(0.0, retry_after_us / 1e6),
                )
            row = TrialRow(
                trial=self._new_trial_id(),
                team=team,
                task=task,
                state=TrialState.REGISTERED,
                code=None,
                registered_at=now,
            )
            self.store.insert_trial(row)
            return row

    def begin_session(self, trial_id: str, now: int) -> CodeIssued:
        """One-time code issue; Registered -> CodeIssued."""
        with self.lock:
            row = self._trial(trial_id)
            self._advance(row, LifecycleEvent.CODE_DELIVERED, now)
            while True:
                code = generate_submission_code(self.rng)
                if not self.store.code_exists(code):
                    break
            self.store.set_code(trial_id, code)
            return CodeIssued(trial=trial_id, code=code)

    # -- execution-phase traffic ---------------------------------------------------

    def record_event(self, trial_id: str, event: Event, now: int) -> EventAck:
        with self.lock:
            row = self._trial(trial_id)
            if row.state not in (TrialState.CODE_ISSUED, TrialState.EXECUTING):
                # Raises IllegalTransition with the precise pair.
                transition(row.state, LifecycleEvent.EVENT_RECORDED)
            last = self.store.last_event_seq(trial_id)
            if event.seq <= last:
                raise OutOfOrderSeq(f"seq {event.seq} <= last persisted {last}")
            self.store.append_event(EventRow(
                trial=trial_id, seq=event.seq, client_ts=event.client_ts,
                kind=event.kind, payload=event.payload, server_ts=now))
            self._advance(row, LifecycleEvent.EVENT_RECORDED, now)
            return EventAck(seq=event.seq, server_ts=now)

    def issue_challenge(self, trial_id: str, now: int) -> Challenge:
        with self.lock:
            row = self._trial(trial_id)
            if row.state is not TrialState.EXECUTING:
                raise ServerError(f"challenges only issue while Executing, not {row.state.value}")
            challenge_id = self.store.challenge_count(trial_id) + 1
            self.store.insert_challenge(ChallengeRow(trial_id, challenge_id, now))
            return Challenge(challenge_id=challenge_id, issued_server_ts=now)

    def accept_challenge_response(self, trial_id: str, resp: ChallengeResponse, now: int) -> ResponseRow:
        with self.lock:
            issued = self.store.get_challenge(trial_id, resp.challenge_id)
            if issued is None:
                raise UnknownChallenge(f"challenge {resp.challenge_id} was never issued")
            if self.store.get_response(trial_id, resp.challenge_id) is not None:
                raise DuplicateResponse(f"challenge {resp.challenge_id} already answered")
            latency_us = now - issued.issued_server_ts
            late = latency_us > int(self.schedule.response_deadline_s * 1e6)
            row = ResponseRow(
                trial=trial_id, challenge_id=resp.challenge_id,
                frame_index=resp.frame_index, capture_ts=resp.capture_ts,
                digest=resp.digest, received_server_ts=now, late=late)
            self.store.insert_response(row)
            return row

    def finalize(self, trial_id: str, msg: Finalize, now: int) -> FinalizeAck:
        """Executing -> Finalized; challenge issuance stops at this instant."""
        with self.lock:
            row = self._trial(trial_id)
            self._advance(row, LifecycleEvent.FINALIZE, now)
            self.store.set_finalize(trial_id, msg.final_video_digest,
                                    msg.frame_count, msg.video_duration_us)
            return FinalizeAck()

    def deliver_instruction(self, trial_id: str, payload: dict, now: int) -> Instruction:
        with self.lock:
            row = self._trial(trial_id)
            if row.state not in (TrialState.CODE_ISSUED, TrialState.EXECUTING):
                transition(row.state, LifecycleEvent.EVENT_RECORDED)  # raises
            seq = self.store.next_instruction_seq(trial_id)
            self.store.insert_instruction(trial_id, seq, payload, now)
            return Instruction(seq=seq, task_payload=payload)

    def ack_instruction(self, trial_id: str, seq: int) -> None:
        """Idempotent: duplicate acks are no-ops."""
        with self.lock:
            self.store.mark_instruction_acked(trial_id, seq)

    def unacked_instructions(self, trial_id: str) -> list[Instruction]:
        with self.lock:
            return [Instruction(seq=seq, task_payload=payload)
                    for seq, payload, acked in self.store.instructions_for(trial_id)
                    if not acked]

    # -- upload path -----------------------------------------------------------------

    def issue_upload_url(self, trial_id: str, now: int) -> SignedUploadUrl:
        """Finalized/AwaitingUpload -> AwaitingUpload, expiry now + 2 h.

        Re-issue after a failed upload is always allowed: the integrity
        artifacts are already persisted, only bytes are missing.
        """
        with self.lock:
            row = self._trial(trial_id)
            self._advance(row, LifecycleEvent.URL_ISSUED, now)
            return issue_signed_url(self.secret, self.url_base, trial_id,
                                    PACKAGE_OBJECT, now // 1_000_000)

    def check_upload_auth(self, token: str, trial_id: str, object_name: str,
                          expiry_unix: int, now_unix: float) -> None:
        if not verify_upload_token(self.secret, trial_id, object_name, expiry_unix, token):
            raise BadSignature("upload token does not verify")
        if now_unix >= expiry_unix:
            raise ExpiredUrl(f"url expired at {expiry_unix}")

    def store_upload(self, trial_id: str, object_name: str,
                     chunks: Iterable[bytes], now: int) -> tuple[str, int]:
        """Stream the body into the object store; digest computed on the fly."""
        digest, length = self.objects.put(trial_id, object_name, chunks)
        with self.lock:
            self.store.upsert_submission(trial_id, object_name, length, digest, now)
        return digest, length

    def validate_upload(self, token: str, trial_id: str, object_name: str,
                        expiry_unix: int, now: int, chunks: Iterable[bytes]) -> tuple[str, int]:
        """Full PUT handling: auth check, then atomic streamed store."""
        self.check_upload_auth(token, trial_id, object_name, expiry_unix, now / 1e6)
        return self.store_upload(trial_id, object_name, chunks, now)

    def upload_complete(self, trial_id: str, archive_digest: str, now: int) -> None:
        """Match the declared archive digest against the streamed one;
        AwaitingUpload -> Submitted on success, unchanged on mismatch."""
        with self.lock:
            row = self._trial(trial_id)
            if row.state is not TrialState.AWAITING_UPLOAD:
                transition(row.state, LifecycleEvent.UPLOAD_ACCEPTED)  # raises
            stored = self.store.get_submission(trial_id, PACKAGE_OBJECT)
            if stored is None:
                raise MissingUpload("no uploaded object for this trial")
            _, stored_digest, _ = stored
            if stored_digest != archive_digest:
                raise DigestMismatch(
                    f"declared {archive_digest[:12]}.. but stored {stored_digest[:12]}..")
            self.store.set_archive_digest(trial_id, archive_digest)
            self._advance(row, LifecycleEvent.UPLOAD_ACCEPTED, now)

    # -- failure handling ----------------------------------------------------------

    def mark_broken(self, trial_id: str, reason: str, now: int) -> bool:
        """Break a live trial on unrecoverable disconnect/violation.

        Returns False when the trial is already terminal or safely past
        submission; breaking is then not applicable.
        """
        with self.lock:
            row = self._trial(trial_id)
            try:
                self._advance(row, LifecycleEvent.DISCONNECT, now)
                return True
            except IllegalTransition:
                return False

    def recover_on_startup(self, now: int) -> list[str]:
        """After a crash every pre-submission trial lost its session: break them."""
        broken = []
        with self.lock:
            for row in self.store.all_trials():
                if row.state in (TrialState.REGISTERED, TrialState.CODE_ISSUED,
                                 TrialState.EXECUTING, TrialState.FINALIZED,
                                 TrialState.AWAITING_UPLOAD):
                    self._advance(row, LifecycleEvent.DISCONNECT, now)
                    broken.append(row.trial)
        return broken

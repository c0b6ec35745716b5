"""Per-connection protocol driver on the server side.

One ServerSession manages one client connection for one trial: dispatching
wire messages into the core, timing challenge issuance, re-sending
unanswered challenges and unacked instructions, and replaying acks for
retried messages so at-least-once delivery stays idempotent. The strict
one-shot lifecycle contract lives in ServerCore; this layer only smooths
over unreliable delivery.

Drivers (real TCP thread or simulated scheduler) deliver inbound messages
via on_message and call on_tick periodically; outbound traffic goes through
the injected send callable. ``done`` tells the driver to close the
connection, which after a successful submission is the success signal the
client waits for.
"""

from __future__ import annotations

import random
from typing import Callable, Optional

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
    IllegalTransition,
    Instruction,
    InstructionAck,
    TrialState,
    UploadComplete,
    UploadUrl,
    UploadUrlRequest,
    WireMessage,
)
from mnet.server.challenges import challenge_times
from mnet.server.core import (
    DuplicateResponse,
    ServerCore,
    ServerError,
    HEARTBEAT_TIMEOUT_S,
)

CHALLENGE_RESEND_US = 2_000_000

# Task payload factory: (task, trial_id) -> payload dict or None to skip.
InstructionSource = Callable[[str, str], Optional[dict]]


class ServerSession:
    def __init__(
        self,
        core: ServerCore,
        send: Callable[[WireMessage], None],
        instruction_source: Optional[InstructionSource] = None,
        heartbeat_timeout_s: float = HEARTBEAT_TIMEOUT_S,
        challenge_resend_us: int = CHALLENGE_RESEND_US,
        now_us: Optional[int] = None,
    ) -> None:
        self.core = core
        self._send = send
        self._instruction_source = instruction_source
        self._heartbeat_timeout_us = int(heartbeat_timeout_s * 1e6)
        self._challenge_resend_us = challenge_resend_us
        self.trial: Optional[str] = None
        self.done = False
        self.submitted = False
        self._last_inbound = now_us or 0
        self._code_issued: Optional[CodeIssued] = None
        self._event_acks: dict[int, EventAck] = {}
        self._finalized = False
        self._challenge_rng = random.Random(core.rng.getrandbits(64))
        self._challenge_iter = None
        self._executing_since: Optional[int] = None
        self._next_challenge_at: Optional[int] = None
        self._unanswered: dict[int, dict] = {}  # cid -> {issued, last_sent}

    # -- inbound ------------------------------------------------------------------

    def on_message(self, msg: WireMessage, now: int) -> None:
        if self.done:
            return
        self._last_inbound = now
        try:
            self._dispatch(msg, now)
        except IllegalTransition as exc:
            self._send(Error(code="IllegalTransition", message=str(exc)))
        except ServerError as exc:
            self._send(Error(code=exc.code, message=str(exc)))
            if exc.code in ("UnknownTeam", "QuotaExceeded"):
                self.done = True

    def _dispatch(self, msg: WireMessage, now: int) -> None:
        if isinstance(msg, Hello):
            self._on_hello(msg, now)
        elif isinstance(msg, Event):
            self._on_event(msg, now)
        elif isinstance(msg, ChallengeResponse):
            self._on_challenge_response(msg, now)
        elif isinstance(msg, Heartbeat):
            self._on_heartbeat(now)
        elif isinstance(msg, Finalize):
            self._on_finalize(msg, now)
        elif isinstance(msg, InstructionAck):
            if self.trial:
                self.core.ack_instruction(self.trial, msg.seq)
        elif isinstance(msg, UploadUrlRequest):
            self._on_upload_url_request(now)
        elif isinstance(msg, UploadComplete):
            self._on_upload_complete(msg, now)
        elif isinstance(msg, Error):
            pass  # client-side complaints (e.g. EmptyRing) are logged upstream
        else:
            self._send(Error(code="UnexpectedMessage",
                             message=f"{type(msg).__name__} is server-to-client only"))

    def _on_hello(self, msg: Hello, now: int) -> None:
        if self._code_issued is not None:
            self._send(self._code_issued)  # retry: replay the same code
            return
        row = self.core.register_trial(msg.team, msg.task, now)
        self.trial = row.trial
        self._code_issued = self.core.begin_session(row.trial, now)
        self._send(self._code_issued)

    def _on_event(self, msg: Event, now: int) -> None:
        if self.trial is None:
            self._send(Error(code="NoSession", message="Hello first"))
            return
        cached = self._event_acks.get(msg.seq)
        if cached is not None:
            self._send(cached)  # retried event: same ack, no new append
            return
        was_executing = self._executing_since is not None
        ack = self.core.record_event(self.trial, msg, now)
        self._event_acks[msg.seq] = ack
        self._send(ack)
        if not was_executing:
            self._start_execution(now)

    def _start_execution(self, now: int) -> None:
        self._executing_since = now
        self._challenge_iter = challenge_times(self.core.schedule, self._challenge_rng)
        offset_s = next(self._challenge_iter)
        self._next_challenge_at = now + int(offset_s * 1e6)
        if self._instruction_source is not None:
            row = self.core.store.get_trial(self.trial)
            payload = self._instruction_source(row.task, self.trial)
            if payload is not None:
                self._send(self.core.deliver_instruction(self.trial, payload, now))

    def _on_challenge_response(self, msg: ChallengeResponse, now: int) -> None:
        if self.trial is None:
            return
        self._unanswered.pop(msg.challenge_id, None)
        try:
            self.core.accept_challenge_response(self.trial, msg, now)
        except DuplicateResponse:
            pass  # resend crossing with the original answer; harmless

    def _on_heartbeat(self, now: int) -> None:
        # Heartbeats carry the retransmit duty for unacked instructions.
        if self.trial is None:
            return
        for ins in self.core.unacked_instructions(self.trial):
            self._send(ins)

    def _on_finalize(self, msg: Finalize, now: int) -> None:
        if self.trial is None:
            return
        if self._finalized:
            self._send(FinalizeAck())  # retry after a lost ack
            return
        # Hold the ack while attestation demands are still answerable: the
        # client packages only after FinalizeAck, so answering first keeps
        # every challenge frame inside the uploaded archive. The client's
        # Finalize retry loop picks the ack up once the slate is clean.
        deadline_us = int(self.core.schedule.response_deadline_s * 1e6)
        pending = [e for e in self._unanswered.values() if now - e["issued"] < deadline_us]
        if pending:
            for entry in pending:
                entry["last_sent"] = now
                self._send(entry["msg"])
            return
        ack = self.core.finalize(self.trial, msg, now)
        self._finalized = True
        self._next_challenge_at = None  # issuance stops at this instant
        self._send(ack)

    def _on_upload_url_request(self, now: int) -> None:
        if self.trial is None:
            return
        url = self.core.issue_upload_url(self.trial, now)
        self._send(UploadUrl(url=url.url, expiry_unix=url.expiry_unix))

    def _on_upload_complete(self, msg: UploadComplete, now: int) -> None:
        if self.trial is None:
            return
        if self.submitted:
            self.done = True  # retry after we accepted; close again
            return
        self.core.upload_complete(self.trial, msg.archive_digest, now)
        self.submitted = True
        self.done = True  # graceful close signals success

    # -- periodic work ------------------------------------------------------------------

    def on_tick(self, now: int) -> None:
        if self.done:
            return
        self._issue_due_challenges(now)
        self._resend_unanswered(now)
        self._check_heartbeat_timeout(now)

    def _issue_due_challenges(self, now: int) -> None:
        # The iterator yields offsets from execution start; issue everything due.
        while (self._next_challenge_at is not None and now >= self._next_challenge_at
               and not self._finalized):
            try:
                ch = self.core.issue_challenge(self.trial, now)
            except ServerError:
                self._next_challenge_at = None
                return
            self._unanswered[ch.challenge_id] = {"issued": now, "last_sent": now, "msg": ch}
            self._send(ch)
            offset_s = next(self._challenge_iter)
            self._next_challenge_at = self._executing_since + int(offset_s * 1e6)

    def _resend_unanswered(self, now: int) -> None:
        deadline_us = int(self.core.schedule.response_deadline_s * 1e6)
        for cid, entry in list(self._unanswered.items()):
            if now - entry["issued"] >= deadline_us:
                del self._unanswered[cid]  # past deadline: stop resending
                continue
            if now - entry["last_sent"] >= self._challenge_resend_us:
                entry["last_sent"] = now
                self._send(entry["msg"])

    def _check_heartbeat_timeout(self, now: int) -> None:
        if self.trial is None or self.submitted:
            return
        if now - self._last_inbound > self._heartbeat_timeout_us:
            self.core.mark_broken(self.trial, "heartbeat timeout", now)
            self._send(Error(code="SessionTimeout", message="no traffic for too long"))
            self.done = True

    def on_disconnect(self, now: int) -> None:
        """Transport-level loss of the connection."""
        if self.done or self.trial is None:
            return
        self.done = True
        if not self.submitted:
            self.core.mark_broken(self.trial, "disconnect", now)

"""Recompute every automatable integrity check over a stored submission.

Three families of checks bind a submission to its live session:

* hash bindings — the stored archive against the digest declared at upload,
  the video file against the digest registered at finalize, and each
  uploaded challenge frame against the digest committed in real time;
* timeline alignment — the video's own span against the server-observed
  session duration, plus range checks on every reported timestamp;
* log consistency — the uploaded event log against the server's copy.

Code visibility and semantic content review stay human: they are recorded
as explicit manual check fields, and a verdict cannot be written until a
judge has set them.

Reports are deterministic: verifying the same package twice produces
byte-identical JSON.
"""

from __future__ import annotations

import enum
import io
import json
import zipfile
from dataclasses import dataclass
from typing import Optional

from mnet.container import CODEC_PNG, ContainerError, scan_mnv
from mnet.protocol import (
    CanonicalFrame,
    LifecycleEvent,
    TrialState,
    decode_frame_png,
    canonical_frame_digest,
    sha256_hex,
    transition,
)
from mnet.server.core import PACKAGE_OBJECT
from mnet.server.persistence import SqliteStore
from mnet.server.storage import ObjectStore


class MissingArtifact(Exception):
    pass


class PackageUnreadable(Exception):
    pass


class PrematureDecision(Exception):
    pass


class InconsistentVerdict(Exception):
    pass


class ManualCheck(enum.Enum):
    UNREVIEWED = "Unreviewed"
    PASS = "Pass"
    FAIL = "Fail"


@dataclass(frozen=True)
class PerChallengeCheck:
    challenge_id: int
    digest_match: bool
    timing_ok: bool
    rederived_from_video: Optional[bool]  # None when the codec is opaque


@dataclass(frozen=True)
class TimelineCheck:
    session_duration_us: int
    video_duration_us: int
    delta_us: int
    ok: bool


@dataclass
class AuditReport:
    trial: str
    archive_digest_match: bool
    final_video_digest_match: bool
    per_challenge: list[PerChallengeCheck]
    timeline: TimelineCheck
    event_consistency: bool
    code_visibility: ManualCheck = ManualCheck.UNREVIEWED
    content_alignment: ManualCheck = ManualCheck.UNREVIEWED
    verdict: Optional[dict] = None

    def automated_pass(self) -> bool:
        return (self.archive_digest_match
                and self.final_video_digest_match
                and all(c.digest_match and c.timing_ok and c.rederived_from_video is not False
                        for c in self.per_challenge)
                and self.timeline.ok
                and self.event_consistency)

    def to_dict(self) -> dict:
        return {
            "trial": self.trial,
            "checks": {
                "archive_digest_match": self.archive_digest_match,
                "final_video_digest_match": self.final_video_digest_match,
                "per_challenge": [
                    {
                        "challenge_id": c.challenge_id,
                        "digest_match": c.digest_match,
                        "timing_ok": c.timing_ok,
                        "rederived_from_video": c.rederived_from_video,
                    }
                    for c in self.per_challenge
                ],
                "timeline_alignment": {
                    "session_duration_us": self.timeline.session_duration_us,
                    "video_duration_us": self.timeline.video_duration_us,
                    "delta_us": self.timeline.delta_us,
                    "ok": self.timeline.ok,
                },
                "event_consistency": self.event_consistency,
            },
            "code_visibility": self.code_visibility.value,
            "content_alignment": self.content_alignment.value,
            "verdict": self.verdict,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def to_text(self) -> str:
        def mark(ok):
            return "PASS" if ok else "FAIL"

        lines = [
            f"audit report for trial {self.trial}",
            f"  archive digest          {mark(self.archive_digest_match)}",
            f"  final video digest      {mark(self.final_video_digest_match)}",
        ]
        for c in self.per_challenge:
            red = {True: "rederived", False: "REDERIVE-FAIL", None: "opaque-codec"}[
                c.rederived_from_video]
            lines.append(f"  challenge {c.challenge_id:>4}          "
                         f"{mark(c.digest_match)} timing={mark(c.timing_ok)} {red}")
        t = self.timeline
        lines.append(f"  timeline                {mark(t.ok)} "
                     f"(session {t.session_duration_us / 1e6:.2f}s video {t.video_duration_us / 1e6:.2f}s)")
        lines.append(f"  event log consistency   {mark(self.event_consistency)}")
        lines.append(f"  code visibility         {self.code_visibility.value} (manual)")
        lines.append(f"  content alignment       {self.content_alignment.value} (manual)")
        lines.append(f"  automated checks        {mark(self.automated_pass())}")
        if self.verdict:
            lines.append(f"  verdict                 {self.verdict['verdict']} "
                         f"by {self.verdict['judge']}: {self.verdict['reason']}")
        return "\n".join(lines)


def timeline_tolerance_us(fps: Optional[int]) -> int:
    """max(2 s, 2/fps) plus a 1 s skew allowance."""
    per_frame = (2_000_000 // fps) if fps else 0
    return max(2_000_000, per_frame) + 1_000_000


_VERIFIABLE = {TrialState.SUBMITTED, TrialState.UNDER_REVIEW,
               TrialState.ACCEPTED, TrialState.REJECTED}


def verify_submission(store: SqliteStore, objects: ObjectStore, trial_id: str) -> AuditReport:
    row = store.get_trial(trial_id)
    if row is None:
        raise MissingArtifact(f"unknown trial {trial_id}")
    if row.state not in _VERIFIABLE:
        raise PackageUnreadable(f"trial is {row.state.value}, nothing to verify yet")
    if not objects.exists(trial_id, PACKAGE_OBJECT):
        raise MissingArtifact("stored archive is gone")

    with objects.open(trial_id, PACKAGE_OBJECT) as f:
        archive_bytes = f.read()
    archive_digest_match = sha256_hex(archive_bytes) == row.archive_digest

    try:
        zf = zipfile.ZipFile(io.BytesIO(archive_bytes))
        names = set(zf.namelist())
    except zipfile.BadZipFile as exc:
        raise PackageUnreadable(f"archive does not open: {exc}") from exc
    for required in ("video.mnv", "events.jsonl", "manifest.json"):
        if required not in names:
            raise MissingArtifact(f"{required} missing from archive")

    video_bytes = zf.read("video.mnv")
    final_video_digest_match = (row.final_video_digest is not None
                                and sha256_hex(video_bytes) == row.final_video_digest)

    try:
        scan = scan_mnv(video_bytes)
    except ContainerError:
        scan = None

    per_challenge = _check_challenges(store, trial_id, zf, names, scan)
    timeline = _check_timeline(store, trial_id, row, scan)
    event_consistency = _check_events(store, trial_id, zf)

    if row.state is TrialState.SUBMITTED:
        nxt = transition(row.state, LifecycleEvent.REVIEW_STARTED)
        store.apply_transition(trial_id, row.state, LifecycleEvent.REVIEW_STARTED.value,
                               nxt, _review_ts(store, trial_id))

    return AuditReport(
        trial=trial_id,
        archive_digest_match=archive_digest_match,
        final_video_digest_match=final_video_digest_match,
        per_challenge=per_challenge,
        timeline=timeline,
        event_consistency=event_consistency,
    )


def _review_ts(store: SqliteStore, trial_id: str) -> int:
    # Monotone wrt the trial's own history even under a simulated clock.
    transitions = store.transitions_for(trial_id)
    return (transitions[-1][3] + 1) if transitions else 0


def _check_challenges(store, trial_id, zf, names, scan) -> list[PerChallengeCheck]:
    chunks_by_index = {}
    if scan is not None:
        for chunk in scan.chunks:
            chunks_by_index[chunk.frame_index] = chunk

    out = []
    for challenge in store.challenges_for(trial_id):
        resp = store.get_response(trial_id, challenge.challenge_id)
        if resp is None:
            out.append(PerChallengeCheck(challenge.challenge_id, False, False, None))
            continue

        digest_match = False
        fname = f"frames/ch_{challenge.challenge_id:06d}.png"
        if fname in names:
            try:
                w, h, pixels = decode_frame_png(zf.read(fname))
                frame = CanonicalFrame(width=w, height=h, capture_ts=resp.capture_ts,
                                       frame_index=resp.frame_index, pixels=pixels)
                digest_match = canonical_frame_digest(frame) == resp.digest
            except Exception:
                digest_match = False

        rederived: Optional[bool]
        chunk = chunks_by_index.get(resp.frame_index)
        if chunk is None:
            rederived = False  # frame absent from (the readable part of) the video
        elif chunk.codec != CODEC_PNG:
            rederived = None  # opaque codec: whole-file hash is the only binding
        else:
            try:
                w, h, pixels = decode_frame_png(chunk.payload)
                frame = CanonicalFrame(width=w, height=h, capture_ts=chunk.capture_ts,
                                       frame_index=chunk.frame_index, pixels=pixels)
                rederived = canonical_frame_digest(frame) == resp.digest
            except Exception:
                rederived = False

        out.append(PerChallengeCheck(
            challenge.challenge_id, digest_match, not resp.late, rederived))
    return out


def _check_timeline(store, trial_id, row, scan) -> TimelineCheck:
    code_ts = store.transition_ts(trial_id, TrialState.CODE_ISSUED)
    finalize_ts = store.transition_ts(trial_id, TrialState.FINALIZED)
    if code_ts is None or finalize_ts is None:
        return TimelineCheck(0, 0, 0, False)
    session_duration = finalize_ts - code_ts

    if scan is None or scan.frame_count == 0:
        return TimelineCheck(session_duration, 0, session_duration, False)
    video_duration = scan.duration_us
    delta = abs(video_duration - session_duration)
    tol = timeline_tolerance_us(scan.fps)

    ok = delta <= tol
    for ev in store.events_for(trial_id):
        if not 0 <= ev.client_ts <= video_duration:
            ok = False
    for resp in store.responses_for(trial_id):
        if not 0 <= resp.capture_ts <= video_duration:
            ok = False
    return TimelineCheck(session_duration, video_duration, delta, ok)


def _check_events(store, trial_id, zf) -> bool:
    try:
        lines = zf.read("events.jsonl").decode("utf-8").splitlines()
        uploaded = [json.loads(line) for line in lines if line.strip()]
    except Exception:
        return False
    persisted = store.events_for(trial_id)
    if len(uploaded) != len(persisted):
        return False
    for up, row in zip(uploaded, persisted):
        if (up.get("seq") != row.seq or up.get("client_ts") != row.client_ts
                or up.get("kind") != row.kind or up.get("payload") != row.payload):
            return False
    return True


def record_decision(store: SqliteStore, report: AuditReport, verdict: str,
                    judge: str, reason: str, now: int) -> None:
    """Persist the judge's verdict; Accepted is gated on all automated checks."""
    if ManualCheck.UNREVIEWED in (report.code_visibility, report.content_alignment):
        raise PrematureDecision("manual checks not reviewed yet")
    if verdict not in ("Accepted", "Rejected"):
        raise ValueError(f"verdict must be Accepted or Rejected, got {verdict!r}")
    if verdict == "Accepted":
        if not report.automated_pass():
            raise InconsistentVerdict("cannot accept with failing automated checks")
        if ManualCheck.FAIL in (report.code_visibility, report.content_alignment):
            raise InconsistentVerdict("cannot accept with failing manual checks")

    row = store.get_trial(report.trial)
    event = LifecycleEvent.ACCEPT if verdict == "Accepted" else LifecycleEvent.REJECT
    nxt = transition(row.state, event)  # raises IllegalTransition when premature
    report.verdict = {"verdict": verdict, "judge": judge, "reason": reason}
    store.apply_transition(report.trial, row.state, event.value, nxt, now)
    store.insert_decision(report.trial, verdict, judge, reason, report.to_json(), now)

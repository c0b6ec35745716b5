"""Adversarial client behaviors.

Each adversary differs from the honest client in exactly one move, made
after the protocol's real-time commitments are registered, and each
produces a self-consistent archive: the only tell is a broken commitment.
"""

from __future__ import annotations

import enum
import json
import random
from pathlib import Path

from mnet.client.recorder import RecorderSummary
from mnet.client.session import SessionCore
from mnet.container import scan_mnv_file
from mnet.protocol import encode_frame_png, sha256_file


class ActorKind(enum.Enum):
    HONEST = "Honest"
    BYTE_FLIPPER = "ByteFlipper"
    FRAME_SUBSTITUTER = "FrameSubstituter"
    LOG_EDITOR = "LogEditor"
    REPLAYER = "Replayer"
    TRUNCATOR = "Truncator"
    QUOTA_SPAMMER = "QuotaSpammer"


class HonestSession(SessionCore):
    pass


class ByteFlipperSession(SessionCore):
    """Flips one random byte of video.mnv after finalize."""

    tamper_rng: random.Random

    def mutate_files(self, files: dict) -> None:
        path = Path(files["video.mnv"])
        data = bytearray(path.read_bytes())
        pos = self.tamper_rng.randrange(len(data))
        data[pos] ^= 1 + self.tamper_rng.randrange(255)
        path.write_bytes(bytes(data))


class FrameSubstituterSession(SessionCore):
    """Swaps one uploaded challenge frame for a different captured frame."""

    tamper_rng: random.Random

    def mutate_files(self, files: dict) -> None:
        frame_names = sorted(n for n in files if n.startswith("frames/"))
        if not frame_names:
            return
        target = frame_names[self.tamper_rng.randrange(len(frame_names))]
        target_cid = int(Path(target).stem.split("_")[1])
        answered = self._challenge_answers[target_cid]
        substitute = None
        for frame in self.recorder.ring.snapshot():
            if frame.frame_index != answered.frame_index:
                substitute = frame
        if substitute is None:
            return
        Path(files[target]).write_bytes(encode_frame_png(substitute))


class LogEditorSession(SessionCore):
    """Rewrites one event in events.jsonl (a skipped task becomes finished)."""

    tamper_rng: random.Random

    def mutate_files(self, files: dict) -> None:
        path = Path(files["events.jsonl"])
        lines = path.read_text().splitlines()
        if not lines:
            return
        idx = self.tamper_rng.randrange(len(lines))
        doc = json.loads(lines[idx])
        if doc.get("kind") in ("TaskSkipped", "Status"):
            doc["kind"] = "TaskFinished"
        else:
            doc["payload"] = dict(doc.get("payload") or {}, retouched=True)
        lines[idx] = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        path.write_text("\n".join(lines) + "\n")


class TruncatorSession(SessionCore):
    """Uploads a video cut to 60% of its bytes."""

    def mutate_files(self, files: dict) -> None:
        path = Path(files["video.mnv"])
        data = path.read_bytes()
        path.write_bytes(data[: int(len(data) * 0.6)])


class ReplayerSession(SessionCore):
    """Submits a previous (longer) recording under a fresh code.

    The camera feed replays the old video during the live session, so every
    real-time commitment (challenge digests, event log) stays consistent
    with the stale file. Only the session-vs-video duration betrays it --
    that, and a human judge noticing the wrong code on screen.
    """

    stale_video: Path

    def capture_finished(self) -> None:
        if self._capture_done:
            return
        self._capture_done = True
        own = self.recorder.close()  # its own recording is thrown away
        scan = scan_mnv_file(self.stale_video)
        self.summary = RecorderSummary(
            path=self.stale_video,
            digest=sha256_file(self.stale_video),
            frame_count=scan.frame_count,
            duration_us=scan.duration_us,
            fps=scan.fps or own.fps,
            width=scan.width,
            height=scan.height,
        )
        self._maybe_finalize()


SESSION_CLASSES = {
    ActorKind.HONEST: HonestSession,
    ActorKind.BYTE_FLIPPER: ByteFlipperSession,
    ActorKind.FRAME_SUBSTITUTER: FrameSubstituterSession,
    ActorKind.LOG_EDITOR: LogEditorSession,
    ActorKind.REPLAYER: ReplayerSession,
    ActorKind.TRUNCATOR: TruncatorSession,
}

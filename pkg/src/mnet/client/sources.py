"""Frame sources feeding the recorder.

A source fills in pixel content; the capture driver owns pacing and passes
the timestamp/index it wants the frame stamped with. The replay source is
the exception: it keeps the original stamps of the recording it replays,
which is exactly what makes it useful to the adversarial harness.
"""

from __future__ import annotations

import abc
import hashlib
import random
from pathlib import Path

from mnet.container import CODEC_PNG, scan_mnv_file
from mnet.protocol import CanonicalFrame, decode_frame_png


class SourceExhausted(Exception):
    """The source ran out of frames before the session finished."""


class FrameSource(abc.ABC):
    width: int
    height: int

    @abc.abstractmethod
    def next_frame(self, capture_ts: int, frame_index: int) -> CanonicalFrame:
        """Produce the frame to record for this capture tick."""


class SyntheticSource(FrameSource):
    """Seeded procedural frames: deterministic per (seed, frame_index)."""

    def __init__(self, seed: int, width: int = 64, height: int = 48) -> None:
        self.seed = seed
        self.width = width
        self.height = height

    def next_frame(self, capture_ts: int, frame_index: int) -> CanonicalFrame:
        material = f"synthetic|{self.seed}|{frame_index}".encode()
        rng = random.Random(int.from_bytes(hashlib.sha256(material).digest()[:8], "big"))
        pixels = rng.randbytes(3 * self.width * self.height)
        return CanonicalFrame(width=self.width, height=self.height,
                              capture_ts=capture_ts, frame_index=frame_index, pixels=pixels)


class DirectorySource(FrameSource):
    """Plays an image sequence (sorted by name) as the camera feed."""

    def __init__(self, path: str | Path) -> None:
        from PIL import Image

        self.files = sorted(p for p in Path(path).iterdir()
                            if p.suffix.lower() in (".png", ".jpg", ".jpeg", ".bmp"))
        if not self.files:
            raise SourceExhausted(f"no image files in {path}")
        first = Image.open(self.files[0]).convert("RGB")
        self.width, self.height = first.size
        self._Image = Image

    def next_frame(self, capture_ts: int, frame_index: int) -> CanonicalFrame:
        if frame_index >= len(self.files):
            raise SourceExhausted(f"only {len(self.files)} frames available")
        img = self._Image.open(self.files[frame_index]).convert("RGB")
        if img.size != (self.width, self.height):
            img = img.resize((self.width, self.height))
        return CanonicalFrame(width=self.width, height=self.height,
                              capture_ts=capture_ts, frame_index=frame_index,
                              pixels=img.tobytes())


class CameraSource(FrameSource):
    """Optional live-camera hook via OpenCV; URI is whatever cv2 accepts."""

    def __init__(self, uri: str) -> None:
        import cv2  # deferred: only needed when a camera is actually used

        self._cv2 = cv2
        index = int(uri) if uri.isdigit() else uri
        self._cap = cv2.VideoCapture(index)
        if not self._cap.isOpened():
            raise SourceExhausted(f"cannot open camera {uri!r}")
        ok, frame = self._cap.read()
        if not ok:
            raise SourceExhausted("camera produced no frames")
        self.height, self.width = frame.shape[:2]

    def next_frame(self, capture_ts: int, frame_index: int) -> CanonicalFrame:
        ok, frame = self._cap.read()
        if not ok:
            raise SourceExhausted("camera stream ended")
        rgb = self._cv2.cvtColor(frame, self._cv2.COLOR_BGR2RGB)
        return CanonicalFrame(width=self.width, height=self.height,
                              capture_ts=capture_ts, frame_index=frame_index,
                              pixels=rgb.tobytes())


class MnvReplaySource(FrameSource):
    """Replays a previously recorded container, keeping its original
    timestamps and frame indices."""

    def __init__(self, path: str | Path) -> None:
        self.scan = scan_mnv_file(path)
        self.width = self.scan.width
        self.height = self.scan.height
        self._cursor = 0

    def next_frame(self, capture_ts: int, frame_index: int) -> CanonicalFrame:
        if self._cursor >= len(self.scan.chunks):
            raise SourceExhausted("replayed recording ended")
        chunk = self.scan.chunks[self._cursor]
        self._cursor += 1
        if chunk.codec != CODEC_PNG:
            raise SourceExhausted("replay needs a lossless recording")
        w, h, pixels = decode_frame_png(chunk.payload)
        return CanonicalFrame(width=w, height=h, capture_ts=chunk.capture_ts,
                              frame_index=chunk.frame_index, pixels=pixels)


def parse_source_spec(spec: str) -> FrameSource:
    """CLI source syntax: synthetic:<seed> | dir:<path> | camera:<uri>."""
    kind, _, arg = spec.partition(":")
    if kind == "synthetic":
        return SyntheticSource(seed=int(arg or "0"))
    if kind == "dir":
        return DirectorySource(arg)
    if kind == "camera":
        return CameraSource(arg)
    raise ValueError(f"unknown source spec {spec!r}")

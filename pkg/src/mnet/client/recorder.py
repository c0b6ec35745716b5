"""Recorder: container writer, streaming digest, and the frame ring.

Two flows touch this object under the client's concurrency contract: the
capture flow appends, the protocol flow reads the ring and the metadata.
Both the ring and the append path keep their critical sections O(1)-ish
(the PNG encode happens before the lock is taken).
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from mnet.container import CODEC_PNG, MnvWriter
from mnet.protocol import CanonicalFrame, DimensionMismatch, encode_frame_png

DEFAULT_RING_CAPACITY = 64


class FrameRing:
    """Bounded buffer of the most recent frames, thread-safe."""

    def __init__(self, capacity: int = DEFAULT_RING_CAPACITY) -> None:
        if capacity < 1:
            raise ValueError("ring capacity must be >= 1")
        self._frames: deque[CanonicalFrame] = deque(maxlen=capacity)
        self._lock = threading.Lock()

    def append(self, frame: CanonicalFrame) -> None:
        with self._lock:
            self._frames.append(frame)

    def latest(self) -> Optional[CanonicalFrame]:
        with self._lock:
            return self._frames[-1] if self._frames else None

    def snapshot(self) -> list[CanonicalFrame]:
        with self._lock:
            return list(self._frames)

    def __len__(self) -> int:
        with self._lock:
            return len(self._frames)


@dataclass(frozen=True)
class RecorderSummary:
    path: Path
    digest: str  # SHA-256 of the finished container file
    frame_count: int
    duration_us: int
    fps: int
    width: int
    height: int


class Recorder:
    def __init__(self, path: str | Path, fps: int, width: int, height: int,
                 ring_capacity: int = DEFAULT_RING_CAPACITY) -> None:
        if fps <= 0:
            raise ValueError("fps must be positive")
        self.path = Path(path)
        self.fps = fps
        self.width = width
        self.height = height
        self.ring = FrameRing(ring_capacity)
        self._lock = threading.Lock()
        self._file = open(self.path, "wb")
        self._writer = MnvWriter(self._file, fps, width, height)
        self._frame_count = 0
        self._first_ts: Optional[int] = None
        self._last_ts = 0
        self._closed = False

    @property
    def frame_count(self) -> int:
        with self._lock:
            return self._frame_count

    def append(self, frame: CanonicalFrame) -> None:
        if (frame.width, frame.height) != (self.width, self.height):
            raise DimensionMismatch(
                f"frame is {frame.width}x{frame.height}, recording is {self.width}x{self.height}")
        encoded = encode_frame_png(frame)
        with self._lock:
            if self._closed:
                raise RuntimeError("recorder is closed")
            self._writer.append(CODEC_PNG, frame.capture_ts, frame.frame_index, encoded)
            self._frame_count += 1
            if self._first_ts is None:
                self._first_ts = frame.capture_ts
            self._last_ts = frame.capture_ts
        self.ring.append(frame)

    def close(self) -> RecorderSummary:
        with self._lock:
            if self._closed:
                raise RuntimeError("recorder already closed")
            self._closed = True
            self._file.flush()
            self._file.close()
            period = 1_000_000 // self.fps
            duration = (self._last_ts - self._first_ts + period) if self._frame_count else 0
            return RecorderSummary(
                path=self.path,
                digest=self._writer.digest_hex,
                frame_count=self._frame_count,
                duration_us=duration,
                fps=self.fps,
                width=self.width,
                height=self.height,
            )

"""MNV1 video container: a header plus length-prefixed per-frame chunks.

Layout (integers big-endian):

    header  "MNV1" | version u8 | fps u32 | width u32 | height u32
    chunk   total_len u32 | codec u8 | capture_ts u64 | frame_index u64 | encoded bytes

Chunk framing is codec-agnostic, so scanners can walk any container and
recover per-frame timing even when the encoded payload is opaque to them.
Codec 1 is lossless PNG; the verifier can re-derive pixels from those
chunks. Other codec ids are treated as opaque: the whole-file hash still
binds the content, but frame re-derivation is skipped.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import BinaryIO

MNV_MAGIC = b"MNV1"
MNV_VERSION = 1
CODEC_PNG = 1
CODEC_OPAQUE_X264 = 2  # placeholder id for externally encoded streams

_HEADER = struct.Struct(">4sBIII")
_CHUNK_LEN = struct.Struct(">I")
_CHUNK_HEAD = struct.Struct(">BQQ")


class ContainerError(Exception):
    pass


@dataclass(frozen=True)
class MnvChunk:
    codec: int
    capture_ts: int
    frame_index: int
    payload: bytes


@dataclass
class MnvScan:
    """Result of walking a container file; tolerant of a corrupt tail."""

    fps: int
    width: int
    height: int
    chunks: list[MnvChunk] = field(default_factory=list)
    truncated: bool = False

    @property
    def frame_count(self) -> int:
        return len(self.chunks)

    @property
    def duration_us(self) -> int:
        """Span of the recording: last capture_ts - first + one nominal frame period."""
        if not self.chunks:
            return 0
        period = 1_000_000 // self.fps if self.fps else 0
        return self.chunks[-1].capture_ts - self.chunks[0].capture_ts + period


class MnvWriter:
    """Streaming writer that tracks a running SHA-256 of every byte written."""

    def __init__(self, f: BinaryIO, fps: int, width: int, height: int) -> None:
        self._f = f
        self._hash = hashlib.sha256()
        self._write(_HEADER.pack(MNV_MAGIC, MNV_VERSION, fps, width, height))

    def _write(self, data: bytes) -> None:
        self._f.write(data)
        self._hash.update(data)

    def append(self, codec: int, capture_ts: int, frame_index: int, payload: bytes) -> None:
        head = _CHUNK_HEAD.pack(codec, capture_ts, frame_index)
        self._write(_CHUNK_LEN.pack(len(head) + len(payload)))
        self._write(head)
        self._write(payload)

    @property
    def digest_hex(self) -> str:
        return self._hash.hexdigest()


def scan_mnv(data: bytes) -> MnvScan:
    """Parse a container image; a corrupt or truncated tail ends the scan
    with ``truncated=True`` rather than raising, so verifiers can still
    reason about the readable prefix."""
    if len(data) < _HEADER.size:
        raise ContainerError("file shorter than header")
    magic, version, fps, width, height = _HEADER.unpack_from(data, 0)
    if magic != MNV_MAGIC:
        raise ContainerError(f"bad magic {magic!r}")
    if version != MNV_VERSION:
        raise ContainerError(f"unsupported version {version}")
    scan = MnvScan(fps=fps, width=width, height=height)
    off = _HEADER.size
    while off < len(data):
        if off + _CHUNK_LEN.size > len(data):
            scan.truncated = True
            break
        (total,) = _CHUNK_LEN.unpack_from(data, off)
        start = off + _CHUNK_LEN.size
        end = start + total
        if total < _CHUNK_HEAD.size or end > len(data):
            scan.truncated = True
            break
        codec, capture_ts, frame_index = _CHUNK_HEAD.unpack_from(data, start)
        payload = data[start + _CHUNK_HEAD.size:end]
        scan.chunks.append(MnvChunk(codec, capture_ts, frame_index, payload))
        off = end
    return scan


def scan_mnv_file(path) -> MnvScan:
    with open(path, "rb") as f:
        return scan_mnv(f.read())

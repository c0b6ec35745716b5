"""Canonical frame encoding and frame digests.

Frame digests must be independent of whatever image encoder a client uses,
so hashing happens over a fixed byte serialization: a small header followed
by raw row-major RGB pixels. capture_ts and frame_index are part of the
hashed bytes, binding a digest to the frame's temporal position in the
session rather than to its pixels alone.

Serialized layout (all integers big-endian):

    "MNFR" | version u8 | width u32 | height u32 | pixel_format u8
           | capture_ts u64 | frame_index u64 | pixels (3 bytes/pixel)

Header is 30 bytes; total length is 30 + 3*width*height.
"""

from __future__ import annotations

import hashlib
import io
import struct
from dataclasses import dataclass

from PIL import Image

FRAME_MAGIC = b"MNFR"
FRAME_VERSION = 1
PIXEL_RGB8 = 1
HEADER_LEN = 30

_HEADER = struct.Struct(">4sBIIBQQ")


class DimensionMismatch(ValueError):
    """Pixel buffer length does not match width*height, or frame size changed."""


@dataclass(frozen=True)
class CanonicalFrame:
    width: int
    height: int
    capture_ts: int  # microseconds since session start
    frame_index: int
    pixels: bytes  # row-major, top-to-bottom, left-to-right, RGB 3 bytes/pixel
    pixel_format: int = PIXEL_RGB8

    def __post_init__(self) -> None:
        expected = 3 * self.width * self.height
        if len(self.pixels) != expected:
            raise DimensionMismatch(
                f"pixel buffer is {len(self.pixels)} bytes, expected {expected} "
                f"for {self.width}x{self.height}"
            )


def serialize_frame(frame: CanonicalFrame) -> bytes:
    header = _HEADER.pack(
        FRAME_MAGIC,
        FRAME_VERSION,
        frame.width,
        frame.height,
        frame.pixel_format,
        frame.capture_ts,
        frame.frame_index,
    )
    return header + frame.pixels


def canonical_frame_digest(frame: CanonicalFrame) -> str:
    """SHA-256 over the canonical serialization, as lowercase hex."""
    h = hashlib.sha256()
    h.update(
        _HEADER.pack(
            FRAME_MAGIC,
            FRAME_VERSION,
            frame.width,
            frame.height,
            frame.pixel_format,
            frame.capture_ts,
            frame.frame_index,
        )
    )
    h.update(frame.pixels)
    return h.hexdigest()


def encode_frame_png(frame: CanonicalFrame) -> bytes:
    """Lossless PNG of the frame's pixels (header fields are not embedded)."""
    img = Image.frombytes("RGB", (frame.width, frame.height), frame.pixels)
    buf = io.BytesIO()
    img.save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def decode_frame_png(data: bytes) -> tuple[int, int, bytes]:
    """Decode a PNG back to (width, height, canonical RGB pixel bytes)."""
    img = Image.open(io.BytesIO(data))
    img = img.convert("RGB")
    return img.width, img.height, img.tobytes()

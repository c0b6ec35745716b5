"""Canonical frame serialization and digests."""

import hashlib
import random

import pytest

from mnet.protocol import (
    CanonicalFrame,
    DimensionMismatch,
    canonical_frame_digest,
    decode_frame_png,
    encode_frame_png,
    serialize_frame,
)

# sha256 of the hand-assembled 30-byte header for a 0x0 frame (ts=0, idx=0),
# computed with an external hash over the literal byte string.
EMPTY_FRAME_DIGEST = "f3ad111fffa7259888d3b15fcd1d39872230efc67a7eb597d443b81b657d1a21"
# 2x1 frame, ts=7, idx=3, pixels 01 02 03 04 05 06.
SMALL_FRAME_DIGEST = "e341a27c53d2ed195f15b6f796e29897ac588856ea147ae108c6d6e4af61ed63"


def _random_frame(rng, w=4, h=4, ts=0, idx=0):
    return CanonicalFrame(width=w, height=h, capture_ts=ts, frame_index=idx,
                          pixels=rng.randbytes(3 * w * h))


def test_empty_frame_digest_matches_hand_assembled_bytes():
    frame = CanonicalFrame(width=0, height=0, capture_ts=0, frame_index=0, pixels=b"")
    assert len(serialize_frame(frame)) == 30
    assert canonical_frame_digest(frame) == EMPTY_FRAME_DIGEST


def test_small_frame_digest_matches_hand_assembled_bytes():
    frame = CanonicalFrame(width=2, height=1, capture_ts=7, frame_index=3,
                           pixels=bytes([1, 2, 3, 4, 5, 6]))
    assert canonical_frame_digest(frame) == SMALL_FRAME_DIGEST
    # Cross-check against hashing the serialized form directly.
    assert hashlib.sha256(serialize_frame(frame)).hexdigest() == SMALL_FRAME_DIGEST


def test_frame_index_is_part_of_the_hash():
    rng = random.Random(5)
    pixels = rng.randbytes(3 * 4 * 4)
    a = CanonicalFrame(width=4, height=4, capture_ts=100, frame_index=1, pixels=pixels)
    b = CanonicalFrame(width=4, height=4, capture_ts=100, frame_index=2, pixels=pixels)
    assert canonical_frame_digest(a) != canonical_frame_digest(b)


def test_capture_ts_is_part_of_the_hash():
    rng = random.Random(6)
    pixels = rng.randbytes(3 * 4 * 4)
    a = CanonicalFrame(width=4, height=4, capture_ts=100, frame_index=1, pixels=pixels)
    b = CanonicalFrame(width=4, height=4, capture_ts=101, frame_index=1, pixels=pixels)
    assert canonical_frame_digest(a) != canonical_frame_digest(b)


def test_single_pixel_byte_flip_changes_digest():
    rng = random.Random(7)
    frame = _random_frame(rng)
    base = canonical_frame_digest(frame)
    pixels = bytearray(frame.pixels)
    pixels[5] ^= 0x01
    flipped = CanonicalFrame(width=4, height=4, capture_ts=0, frame_index=0, pixels=bytes(pixels))
    assert canonical_frame_digest(flipped) != base


def test_digest_avalanche_over_random_frames():
    """Flipping a uniformly random byte always changes the digest."""
    rng = random.Random(99)
    for _ in range(100):
        frame = _random_frame(rng, ts=rng.randrange(10**9), idx=rng.randrange(10**6))
        base = canonical_frame_digest(frame)
        pos = rng.randrange(len(frame.pixels))
        mutated = bytearray(frame.pixels)
        mutated[pos] ^= 1 + rng.randrange(255)
        other = CanonicalFrame(width=4, height=4, capture_ts=frame.capture_ts,
                               frame_index=frame.frame_index, pixels=bytes(mutated))
        assert canonical_frame_digest(other) != base


def test_dimension_mismatch_rejected():
    with pytest.raises(DimensionMismatch):
        CanonicalFrame(width=4, height=4, capture_ts=0, frame_index=0, pixels=b"\x00" * 10)


def test_png_round_trip_preserves_canonical_bytes():
    rng = random.Random(11)
    frame = _random_frame(rng, w=6, h=5, ts=123, idx=9)
    w, h, pixels = decode_frame_png(encode_frame_png(frame))
    assert (w, h) == (6, 5)
    assert pixels == frame.pixels
    rebuilt = CanonicalFrame(width=w, height=h, capture_ts=123, frame_index=9, pixels=pixels)
    assert canonical_frame_digest(rebuilt) == canonical_frame_digest(frame)

"""SHA-256 helpers. Digests travel as 64-char lowercase hex everywhere."""

from __future__ import annotations

import hashlib
import os
import re
from typing import BinaryIO, Iterable

_HEX_RE = re.compile(r"^[0-9a-f]{64}$")
_CHUNK = 1 << 16


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_stream(chunks: Iterable[bytes]) -> str:
    h = hashlib.sha256()
    for chunk in chunks:
        h.update(chunk)
    return h.hexdigest()


def sha256_file(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        while True:
            chunk = f.read(_CHUNK)
            if not chunk:
                break
            h.update(chunk)
    return h.hexdigest()


def sha256_fileobj(f: BinaryIO) -> str:
    h = hashlib.sha256()
    while True:
        chunk = f.read(_CHUNK)
        if not chunk:
            break
        h.update(chunk)
    return h.hexdigest()


def is_digest_hex(value: str) -> bool:
    return bool(_HEX_RE.match(value))

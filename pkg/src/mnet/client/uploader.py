"""Streaming HTTP PUT for submission archives.

One call is one attempt against one pre-signed URL. Retry policy lives in
the session (it must re-request a URL between attempts anyway); this module
only distinguishes transient transport failures from permanent rejection.

``fault_fractions`` injects connection resets at given fractions of the
transfer, which is how the resilience tests exercise resume-with-new-URL.
"""

from __future__ import annotations

from pathlib import Path

import httpx

from mnet.client.session import UploadRejected, UploadTransportError

_CHUNK = 1 << 16


def _body_iter(path: Path, fault_at: float | None):
    total = path.stat().st_size
    trip = None if fault_at is None else int(total * fault_at)
    sent = 0
    with open(path, "rb") as f:
        while True:
            chunk = f.read(_CHUNK)
            if not chunk:
                return
            if trip is not None and sent + len(chunk) >= trip:
                head = chunk[: max(0, trip - sent)]
                if head:
                    yield head
                raise ConnectionResetError(f"injected reset at {fault_at:.0%}")
            sent += len(chunk)
            yield chunk


def put_archive(archive: Path, url: str, *, timeout_s: float = 30.0,
                fault_fractions: list[float] | None = None) -> tuple[str, int]:
    """PUT the archive to a pre-signed URL; returns (digest, byte_len) echoed
    by the server. fault_fractions is consumed one entry per call."""
    fault_at = fault_fractions.pop(0) if fault_fractions else None
    try:
        resp = httpx.put(url, content=_body_iter(archive, fault_at), timeout=timeout_s)
    except (httpx.TransportError, ConnectionError, OSError) as exc:
        raise UploadTransportError(str(exc)) from exc
    if resp.status_code == 200:
        doc = resp.json()
        return doc["sha256"], doc["byte_len"]
    if resp.status_code == 403:
        raise UploadRejected(f"signature refused: {resp.text}")
    if resp.status_code == 410:
        raise UploadTransportError("url expired")
    raise UploadTransportError(f"unexpected status {resp.status_code}: {resp.text}")

"""Wire messages and TCP framing.

Every message is a frozen dataclass with a JSON form carrying a ``"type"``
discriminator. On the wire a frame is a 4-byte big-endian body length
followed by that many bytes of UTF-8 JSON. Bodies are capped at 1 MiB:
only lightweight metadata travels in-band, bulk artifacts go through the
upload channel. Unknown JSON fields are ignored on decode so older peers
tolerate additive changes; unknown ``"type"`` values are an error.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, fields
from typing import Any, Union

MAX_FRAME = 1 << 20  # JSON body byte cap
_LEN = struct.Struct(">I")


class ProtocolError(Exception):
    """Malformed frame: bad JSON, unknown type, or oversize length prefix."""


class OversizeMessage(ProtocolError):
    """Encoded JSON body would exceed MAX_FRAME."""


@dataclass(frozen=True)
class Hello:
    team: str
    task: str
    client_version: str


@dataclass(frozen=True)
class CodeIssued:
    trial: str  # 32-char lowercase hex trial id
    code: str


@dataclass(frozen=True)
class Event:
    seq: int
    client_ts: int  # microseconds since session start
    kind: str  # TaskFinished | TaskSkipped | Status
    payload: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EventAck:
    seq: int
    server_ts: int  # microseconds since epoch


@dataclass(frozen=True)
class Instruction:
    seq: int
    task_payload: dict


@dataclass(frozen=True)
class InstructionAck:
    seq: int


@dataclass(frozen=True)
class Challenge:
    challenge_id: int
    issued_server_ts: int


@dataclass(frozen=True)
class ChallengeResponse:
    challenge_id: int
    frame_index: int
    capture_ts: int
    digest: str


@dataclass(frozen=True)
class Heartbeat:
    pass


@dataclass(frozen=True)
class Finalize:
    final_video_digest: str
    frame_count: int
    video_duration_us: int


@dataclass(frozen=True)
class FinalizeAck:
    pass


@dataclass(frozen=True)
class UploadUrlRequest:
    pass


@dataclass(frozen=True)
class UploadUrl:
    url: str
    expiry_unix: int


@dataclass(frozen=True)
class UploadComplete:
    archive_digest: str


@dataclass(frozen=True)
class Error:
    code: str
    message: str


WireMessage = Union[
    Hello,
    CodeIssued,
    Event,
    EventAck,
    Instruction,
    InstructionAck,
    Challenge,
    ChallengeResponse,
    Heartbeat,
    Finalize,
    FinalizeAck,
    UploadUrlRequest,
    UploadUrl,
    UploadComplete,
    Error,
]

_TYPES: dict[str, type] = {
    cls.__name__: cls
    for cls in (
        Hello,
        CodeIssued,
        Event,
        EventAck,
        Instruction,
        InstructionAck,
        Challenge,
        ChallengeResponse,
        Heartbeat,
        Finalize,
        FinalizeAck,
        UploadUrlRequest,
        UploadUrl,
        UploadComplete,
        Error,
    )
}


def message_to_json(msg: WireMessage) -> bytes:
    """Canonical JSON body for a message (compact, sorted keys, UTF-8)."""
    doc: dict[str, Any] = {"type": type(msg).__name__}
    for f in fields(msg):
        doc[f.name] = getattr(msg, f.name)
    return json.dumps(doc, separators=(",", ":"), sort_keys=True, ensure_ascii=False).encode("utf-8")


def message_from_json(body: bytes) -> WireMessage:
    try:
        doc = json.loads(body.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ProtocolError(f"malformed JSON body: {exc}") from exc
    if not isinstance(doc, dict):
        raise ProtocolError("message body is not a JSON object")
    kind = doc.get("type")
    cls = _TYPES.get(kind)
    if cls is None:
        raise ProtocolError(f"unknown message type: {kind!r}")
    names = {f.name for f in fields(cls)}
    kwargs = {k: v for k, v in doc.items() if k in names}
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ProtocolError(f"missing fields for {kind}: {exc}") from exc


def encode_message(msg: WireMessage) -> bytes:
    """Frame a message: 4-byte big-endian body length, then the JSON body."""
    body = message_to_json(msg)
    if len(body) > MAX_FRAME:
        raise OversizeMessage(f"{type(msg).__name__} body is {len(body)} bytes, cap is {MAX_FRAME}")
    return _LEN.pack(len(body)) + body


def decode_message(buf: bytes | bytearray | memoryview) -> tuple[WireMessage, int] | None:
    """Decode one frame from the head of ``buf``.

    Returns ``(message, bytes_consumed)`` when a complete frame is present,
    or ``None`` when more data is needed. Raises ProtocolError for oversize
    lengths, bad JSON, or unknown message types.
    """
    if len(buf) < _LEN.size:
        return None
    (n,) = _LEN.unpack_from(buf, 0)
    if n > MAX_FRAME:
        raise ProtocolError(f"frame length {n} exceeds cap {MAX_FRAME}")
    end = _LEN.size + n
    if len(buf) < end:
        return None
    return message_from_json(bytes(buf[_LEN.size:end])), end


class FrameDecoder:
    """Incremental decoder for a framed byte stream.

    Feed arbitrary chunks; complete messages come out in order regardless of
    how the stream was segmented.
    """

    def __init__(self) -> None:
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[WireMessage]:
        self._buf.extend(data)
        out: list[WireMessage] = []
        while True:
            decoded = decode_message(self._buf)
            if decoded is None:
                return out
            msg, consumed = decoded
            del self._buf[:consumed]
            out.append(msg)

    @property
    def pending_bytes(self) -> int:
        return len(self._buf)

"""Shared wire protocol: messages, framing, lifecycle, frames, digests, codes."""

from mnet.protocol.codes import CODE_ALPHABET, CODE_LENGTH, generate_submission_code
from mnet.protocol.digests import is_digest_hex, sha256_file, sha256_hex
from mnet.protocol.frames import (
    PIXEL_RGB8,
    CanonicalFrame,
    DimensionMismatch,
    canonical_frame_digest,
    decode_frame_png,
    encode_frame_png,
    serialize_frame,
)
from mnet.protocol.lifecycle import (
    TERMINAL_STATES,
    IllegalTransition,
    LifecycleEvent,
    TrialState,
    transition,
)
from mnet.protocol.messages import (
    MAX_FRAME,
    Challenge,
    ChallengeResponse,
    CodeIssued,
    Error,
    Event,
    EventAck,
    Finalize,
    FinalizeAck,
    FrameDecoder,
    Heartbeat,
    Hello,
    Instruction,
    InstructionAck,
    OversizeMessage,
    ProtocolError,
    UploadComplete,
    UploadUrl,
    UploadUrlRequest,
    WireMessage,
    decode_message,
    encode_message,
)

TASKS = (
    "PegInHole",
    "CableManagement",
    "GraspingInClutter",
    "TabletopManipulation",
    "BlockArrangement",
)

__all__ = [
    "CODE_ALPHABET",
    "CODE_LENGTH",
    "TASKS",
    "MAX_FRAME",
    "PIXEL_RGB8",
    "TERMINAL_STATES",
    "CanonicalFrame",
    "Challenge",
    "ChallengeResponse",
    "CodeIssued",
    "DimensionMismatch",
    "Error",
    "Event",
    "EventAck",
    "Finalize",
    "FinalizeAck",
    "FrameDecoder",
    "Heartbeat",
    "Hello",
    "IllegalTransition",
    "Instruction",
    "InstructionAck",
    "LifecycleEvent",
    "OversizeMessage",
    "ProtocolError",
    "TrialState",
    "UploadComplete",
    "UploadUrl",
    "UploadUrlRequest",
    "WireMessage",
    "canonical_frame_digest",
    "decode_frame_png",
    "decode_message",
    "encode_frame_png",
    "encode_message",
    "generate_submission_code",
    "is_digest_hex",
    "serialize_frame",
    "sha256_file",
    "sha256_hex",
    "transition",
]

"""Wire codec and framing."""

import json
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mnet.protocol import (
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
    decode_message,
    encode_message,
)

ALL_EXAMPLES = [
    Hello(team="team-a", task="PegInHole", client_version="0.1.0"),
    CodeIssued(trial="ab" * 16, code="K7FQ2WXM"),
    Event(seq=3, client_ts=1_500_000, kind="TaskFinished", payload={"item": "round@3mm"}),
    EventAck(seq=3, server_ts=1_700_000_000_000_000),
    Instruction(seq=1, task_payload={"kind": "scene", "objects": [1, 2]}),
    InstructionAck(seq=1),
    Challenge(challenge_id=4, issued_server_ts=1_700_000_000_000_123),
    ChallengeResponse(challenge_id=4, frame_index=137, capture_ts=13_700_000, digest="0" * 64),
    Heartbeat(),
    Finalize(final_video_digest="f" * 64, frame_count=600, video_duration_us=60_000_000),
    FinalizeAck(),
    UploadUrlRequest(),
    UploadUrl(url="http://127.0.0.1:9000/upload/x/package.zip?expiry=1&token=ab", expiry_unix=7200),
    UploadComplete(archive_digest="e" * 64),
    Error(code="QuotaExceeded", message="retry next window"),
]


def test_heartbeat_frame_layout():
    frame = encode_message(Heartbeat())
    (n,) = struct.unpack(">I", frame[:4])
    body = frame[4:]
    assert n == len(body)
    assert body == b'{"type":"Heartbeat"}'


@pytest.mark.parametrize("msg", ALL_EXAMPLES, ids=lambda m: type(m).__name__)
def test_round_trip_identity(msg):
    decoded, consumed = decode_message(encode_message(msg))
    assert decoded == msg
    assert consumed == len(encode_message(msg))


def test_oversize_event_rejected():
    big = Event(seq=1, client_ts=0, kind="Status", payload={"blob": "x" * (2 * MAX_FRAME)})
    with pytest.raises(OversizeMessage):
        encode_message(big)


def test_two_concatenated_frames_decode_one_at_a_time():
    stream = encode_message(Heartbeat()) + encode_message(Heartbeat())
    msg, consumed = decode_message(stream)
    assert msg == Heartbeat()
    assert consumed == len(encode_message(Heartbeat()))


def test_short_buffer_needs_more_data():
    assert decode_message(b"\x00\x00\x00") is None
    # Complete length prefix but incomplete body also waits.
    frame = encode_message(Heartbeat())
    assert decode_message(frame[:-1]) is None


def test_unknown_type_is_protocol_error():
    body = b'{"type":"Nope"}'
    frame = struct.pack(">I", len(body)) + body
    with pytest.raises(ProtocolError):
        decode_message(frame)


def test_unknown_fields_ignored():
    body = json.dumps({"type": "InstructionAck", "seq": 9, "extra": "later-version-field"}).encode()
    frame = struct.pack(">I", len(body)) + body
    msg, _ = decode_message(frame)
    assert msg == InstructionAck(seq=9)


def test_missing_field_is_protocol_error():
    body = b'{"type":"EventAck","seq":1}'
    frame = struct.pack(">I", len(body)) + body
    with pytest.raises(ProtocolError):
        decode_message(frame)


def test_oversize_length_prefix_is_protocol_error():
    frame = struct.pack(">I", MAX_FRAME + 1) + b"x"
    with pytest.raises(ProtocolError):
        decode_message(frame)


def test_malformed_json_is_protocol_error():
    body = b'{"type":'
    frame = struct.pack(">I", len(body)) + body
    with pytest.raises(ProtocolError):
        decode_message(frame)


# -- random message generation shared with the acceptance suite --------------

_json_scalars = st.one_of(
    st.none(),
    st.booleans(),
    st.integers(min_value=-(2**53), max_value=2**53),
    st.text(max_size=20),
)
_payloads = st.dictionaries(
    st.text(min_size=1, max_size=12),
    st.recursive(_json_scalars, lambda inner: st.lists(inner, max_size=4), max_leaves=8),
    max_size=5,
)
_hex64 = st.text(alphabet="0123456789abcdef", min_size=64, max_size=64)
_u64 = st.integers(min_value=0, max_value=2**63 - 1)

wire_messages = st.one_of(
    st.builds(Hello, team=st.text(max_size=30), task=st.text(max_size=30), client_version=st.text(max_size=10)),
    st.builds(CodeIssued, trial=_hex64, code=st.text(max_size=8)),
    st.builds(Event, seq=_u64, client_ts=_u64, kind=st.sampled_from(["TaskFinished", "TaskSkipped", "Status"]), payload=_payloads),
    st.builds(EventAck, seq=_u64, server_ts=_u64),
    st.builds(Instruction, seq=_u64, task_payload=_payloads),
    st.builds(InstructionAck, seq=_u64),
    st.builds(Challenge, challenge_id=_u64, issued_server_ts=_u64),
    st.builds(ChallengeResponse, challenge_id=_u64, frame_index=_u64, capture_ts=_u64, digest=_hex64),
    st.builds(Heartbeat),
    st.builds(Finalize, final_video_digest=_hex64, frame_count=_u64, video_duration_us=_u64),
    st.builds(FinalizeAck),
    st.builds(UploadUrlRequest),
    st.builds(UploadUrl, url=st.text(max_size=60), expiry_unix=_u64),
    st.builds(UploadComplete, archive_digest=_hex64),
    st.builds(Error, code=st.text(max_size=20), message=st.text(max_size=60)),
)


@given(wire_messages)
def test_codec_round_trip_property(msg):
    decoded, _ = decode_message(encode_message(msg))
    assert decoded == msg


@settings(max_examples=200)
@given(st.lists(wire_messages, min_size=1, max_size=6), st.randoms())
def test_resegmentation_yields_same_sequence(msgs, rnd):
    stream = b"".join(encode_message(m) for m in msgs)
    decoder = FrameDecoder()
    out = []
    pos = 0
    while pos < len(stream):
        step = rnd.randint(1, 7)
        out.extend(decoder.feed(stream[pos:pos + step]))
        pos += step
    assert out == msgs
    assert decoder.pending_bytes == 0

"""Bridge between robot middleware and a running client session.

Finished/skipped trigger services translate to wire events over the
client's local control socket and block until the server's ack comes back.
A retry after AckTimeout reuses the same trigger id, which the client maps
to the same event seq: the server's log sees each trigger exactly once no
matter how often the middleware side retried.

Instructions flow the other way: whatever task payload the server
delivered is re-published on the instruction topic in its exact canonical
wire serialization, no re-encoding drift.
"""

from __future__ import annotations

import queue
import socket
import threading
import uuid
from dataclasses import dataclass

from mnet.protocol import (
    Error,
    Event,
    EventAck,
    FrameDecoder,
    Heartbeat,
    Instruction,
    encode_message,
)
from mnet.protocol.messages import message_to_json

from mnet_bridge.middleware import Middleware


class SessionUnavailable(Exception):
    """No client session is reachable on the control socket."""


class AckTimeout(Exception):
    """The server ack did not arrive within the retry budget."""


@dataclass(frozen=True)
class BridgeConfig:
    control_addr: tuple[str, int]
    finished_service: str = "task_finished"
    skipped_service: str = "task_skipped"
    instruction_topic: str = "task_instruction"
    status_topic: str = "bridge_status"
    ack_timeout_s: float = 2.0
    max_attempts: int = 3

    def __post_init__(self) -> None:
        names = (self.finished_service, self.skipped_service,
                 self.instruction_topic, self.status_topic)
        if any(not n for n in names):
            raise ValueError("endpoint names must be non-empty")
        if len(set(names)) != len(names):
            raise ValueError("endpoint names must be distinct")


class Bridge:
    def __init__(self, config: BridgeConfig, middleware: Middleware) -> None:
        self.config = config
        self.middleware = middleware
        self._sock: socket.socket | None = None
        self._acks: queue.Queue = queue.Queue()
        self._reader: threading.Thread | None = None
        self._trigger_lock = threading.Lock()  # trigger handlers are serialized
        self._closed = threading.Event()

    # -- lifecycle ---------------------------------------------------------------

    def start(self) -> None:
        try:
            self._sock = socket.create_connection(self.config.control_addr, timeout=5)
        except OSError as exc:
            raise SessionUnavailable(f"control socket {self.config.control_addr}: {exc}") from exc
        self._sock.settimeout(None)
        self._reader = threading.Thread(target=self._read_loop, daemon=True,
                                        name="mnet-bridge-reader")
        self._reader.start()
        self.middleware.register_service(self.config.finished_service,
                                         lambda: self._trigger("TaskFinished"))
        self.middleware.register_service(self.config.skipped_service,
                                         lambda: self._trigger("TaskSkipped"))

    def close(self) -> None:
        self._closed.set()
        if self._sock is not None:
            try:
                self._sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self._sock.close()
        if self._reader is not None:
            self._reader.join(timeout=2)

    def __enter__(self) -> "Bridge":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- inbound -----------------------------------------------------------------------

    def _read_loop(self) -> None:
        decoder = FrameDecoder()
        while not self._closed.is_set():
            try:
                data = self._sock.recv(65536)
            except OSError:
                break
            if not data:
                break
            for msg in decoder.feed(data):
                if isinstance(msg, EventAck):
                    self._acks.put(msg)
                elif isinstance(msg, Error):
                    self._acks.put(msg)
                elif isinstance(msg, Instruction):
                    # Verbatim pass-through: publish the payload's canonical
                    # wire-byte serialization, not a re-encoded copy.
                    payload_bytes = message_to_json(msg)
                    self.middleware.publish(self.config.instruction_topic, payload_bytes)
                elif isinstance(msg, Heartbeat):
                    self.middleware.publish(self.config.status_topic, b"alive")

    # -- triggers ---------------------------------------------------------------------------

    def _trigger(self, kind: str) -> tuple[bool, str]:
        with self._trigger_lock:
            try:
                ack = self._send_trigger(kind)
            except SessionUnavailable as exc:
                return False, f"session unavailable: {exc}"
            except AckTimeout as exc:
                return False, f"ack timeout: {exc}"
            return True, f"acknowledged seq={ack.seq} server_ts={ack.server_ts}"

    def _send_trigger(self, kind: str) -> EventAck:
        if self._sock is None:
            raise SessionUnavailable("bridge not started")
        while not self._acks.empty():  # drop acks left over from timed-out triggers
            self._acks.get_nowait()
        trigger_id = uuid.uuid4().hex
        # seq/client_ts are assigned by the client session; trigger_id makes
        # retries idempotent end to end.
        event = Event(seq=0, client_ts=0, kind=kind, payload={"trigger_id": trigger_id})
        frame = encode_message(event)
        for _ in range(self.config.max_attempts):
            try:
                self._sock.sendall(frame)
            except OSError as exc:
                raise SessionUnavailable(str(exc)) from exc
            try:
                reply = self._acks.get(timeout=self.config.ack_timeout_s)
            except queue.Empty:
                continue  # retry with the same trigger_id
            if isinstance(reply, Error):
                raise SessionUnavailable(f"{reply.code}: {reply.message}")
            return reply
        raise AckTimeout(f"no ack after {self.config.max_attempts} attempts")


def serve_bridge(config: BridgeConfig, middleware: Middleware) -> Bridge:
    """Connect and register endpoints; returns the live adapter."""
    bridge = Bridge(config, middleware)
    bridge.start()
    return bridge

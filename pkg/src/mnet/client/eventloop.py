"""Real-network client driver: selector loop, capture thread, control socket.

Two flows, per the client concurrency contract. The capture thread paces
the camera and only appends to the recorder/ring; everything protocol-side
(socket reads, timers, challenge handling, packaging, upload) runs on the
event-loop thread. Cross-thread work arrives through a call queue woken by
a socketpair, so the loop never polls blindly.

The optional control socket speaks the same framing as the server wire and
exists for robot-middleware bridges: inbound Event frames become session
events (deduplicated by the payload's trigger_id so a bridge may retry),
and every server Instruction is re-emitted to control peers byte-compatibly.
"""

from __future__ import annotations

import heapq
import logging
import queue
import selectors
import socket
import threading
import time
from pathlib import Path
from typing import Optional

from mnet.client.session import ClientIO, SessionConfig, SessionCore, SessionOutcome
from mnet.client.sources import FrameSource, SourceExhausted
from mnet.client.uploader import put_archive
from mnet.protocol import (
    Error,
    Event,
    EventAck,
    FrameDecoder,
    Heartbeat,
    ProtocolError,
    encode_message,
)

log = logging.getLogger("mnet.client")


class _Timer:
    __slots__ = ("at_us", "seq", "fn", "cancelled")

    def __init__(self, at_us, seq, fn):
        self.at_us = at_us
        self.seq = seq
        self.fn = fn
        self.cancelled = False

    def __lt__(self, other):
        return (self.at_us, self.seq) < (other.at_us, other.seq)


class _CaptureThread(threading.Thread):
    def __init__(self, io: "ClientEventLoop", session: SessionCore) -> None:
        super().__init__(daemon=True, name="mnet-capture")
        self._io = io
        self._session = session

    def run(self) -> None:
        period_us = 1_000_000 // self._session.config.fps
        next_at = self._io.now_us()
        try:
            while not self._io.finished:
                if not self._session.record_frame():
                    break
                next_at += period_us
                delay = (next_at - self._io.now_us()) / 1e6
                if delay > 0:
                    time.sleep(delay)
        except SourceExhausted as exc:
            self._io.call_soon(lambda: self._session.abort(f"frame source exhausted: {exc}"))
            return
        self._io.call_soon(self._session.capture_finished)


class ClientEventLoop(ClientIO):
    def __init__(self, server_addr: tuple[str, int], config: SessionConfig,
                 source: FrameSource, session_cls=SessionCore,
                 control_addr: Optional[tuple[str, int]] = None,
                 upload_fault_fractions: Optional[list[float]] = None,
                 quiet: bool = False) -> None:
        self._sock = socket.create_connection(server_addr, timeout=10)
        self._sock.settimeout(None)
        self._decoder = FrameDecoder()
        self._selector = selectors.DefaultSelector()
        self._selector.register(self._sock, selectors.EVENT_READ, self._on_socket_readable)
        self._wake_r, self._wake_w = socket.socketpair()
        self._wake_r.setblocking(False)
        self._selector.register(self._wake_r, selectors.EVENT_READ, self._on_wake)
        self._calls: queue.SimpleQueue = queue.SimpleQueue()
        self._timers: list[_Timer] = []
        self._timer_seq = 0
        self._capture: Optional[_CaptureThread] = None
        self._upload_faults = list(upload_fault_fractions or [])
        self._quiet = quiet
        self.finished = False
        self.outcome: Optional[SessionOutcome] = None
        self.control_ack_delay_s = 0.0  # test hook: slow the first ack relay once

        self._control_listener = None
        self._control_conns: dict[socket.socket, FrameDecoder] = {}
        self._triggers: dict[str, dict] = {}  # trigger_id -> {"ack": EventAck|None, "conn": sock}
        self.control_port: Optional[int] = None
        if control_addr is not None:
            self._control_listener = socket.create_server(control_addr)
            self._control_listener.setblocking(False)
            self.control_port = self._control_listener.getsockname()[1]
            self._selector.register(self._control_listener, selectors.EVENT_READ,
                                    self._on_control_accept)

        self.session = session_cls(config, source, self)
        self.session.event_acked_hook = self._on_event_acked

    # -- ClientIO ------------------------------------------------------------------

    def now_us(self) -> int:
        return time.monotonic_ns() // 1000

    def send(self, msg) -> None:
        try:
            self._sock.sendall(encode_message(msg))
        except OSError:
            pass  # the read side will observe the dead connection

    def schedule(self, delay_us: int, fn) -> _Timer:
        self._timer_seq += 1
        timer = _Timer(self.now_us() + max(0, int(delay_us)), self._timer_seq, fn)
        heapq.heappush(self._timers, timer)
        return timer

    def cancel(self, timer: _Timer) -> None:
        timer.cancelled = True

    def start_capture(self, session: SessionCore) -> None:
        self._capture = _CaptureThread(self, session)
        self._capture.start()

    def upload(self, archive: Path, url: str, expiry_unix: int) -> tuple[str, int]:
        return put_archive(archive, url, fault_fractions=self._upload_faults)

    def on_finished(self, outcome: SessionOutcome) -> None:
        self.outcome = outcome
        self.finished = True

    def display_code(self, code: str) -> None:
        if self._quiet:
            return
        bar = "=" * 46
        print(f"\n{bar}\n  SUBMISSION CODE:  {code}\n  display this code in the camera view\n{bar}\n",
              flush=True)

    def publish_instruction(self, msg) -> None:
        frame = encode_message(msg)
        for conn in list(self._control_conns):
            try:
                conn.sendall(frame)
            except OSError:
                self._drop_control(conn)

    # -- cross-thread plumbing ----------------------------------------------------------

    def call_soon(self, fn) -> None:
        self._calls.put(fn)
        try:
            self._wake_w.send(b"x")
        except OSError:
            pass

    def _on_wake(self) -> None:
        try:
            while self._wake_r.recv(4096):
                pass
        except BlockingIOError:
            pass

    # -- socket handling -----------------------------------------------------------------

    def _on_socket_readable(self) -> None:
        try:
            data = self._sock.recv(65536)
        except OSError:
            data = b""
        if not data:
            self._selector.unregister(self._sock)
            self.session.on_connection_closed()
            return
        try:
            for msg in self._decoder.feed(data):
                self.session.on_message(msg)
        except ProtocolError as exc:
            log.error("undecodable server frame: %s", exc)
            self.session.abort(f"protocol error from server: {exc}")

    # -- control socket ---------------------------------------------------------------------

    def _on_control_accept(self) -> None:
        try:
            conn, _ = self._control_listener.accept()
        except OSError:
            return
        conn.setblocking(True)
        self._control_conns[conn] = FrameDecoder()
        self._selector.register(conn, selectors.EVENT_READ,
                                lambda c=conn: self._on_control_readable(c))

    def _drop_control(self, conn: socket.socket) -> None:
        if conn in self._control_conns:
            del self._control_conns[conn]
            try:
                self._selector.unregister(conn)
            except (KeyError, ValueError):
                pass
            conn.close()

    def _on_control_readable(self, conn: socket.socket) -> None:
        try:
            data = conn.recv(65536)
        except OSError:
            data = b""
        if not data:
            self._drop_control(conn)
            return
        try:
            messages = self._control_conns[conn].feed(data)
        except ProtocolError as exc:
            conn.sendall(encode_message(Error(code="ProtocolError", message=str(exc))))
            self._drop_control(conn)
            return
        for msg in messages:
            self._handle_control(conn, msg)

    def _handle_control(self, conn: socket.socket, msg) -> None:
        if isinstance(msg, Heartbeat):
            conn.sendall(encode_message(Heartbeat()))
            return
        if not isinstance(msg, Event):
            return  # InstructionAck and friends need no action
        trigger_id = (msg.payload or {}).get("trigger_id")
        if trigger_id is None:
            conn.sendall(encode_message(Error(
                code="MissingTriggerId", message="control events need payload.trigger_id")))
            return
        entry = self._triggers.get(trigger_id)
        if entry is not None:
            entry["conn"] = conn
            if entry["ack"] is not None:
                conn.sendall(encode_message(entry["ack"])) # idempotent retry
            return
        if self.session.phase not in ("capturing", "finalizing"):
            conn.sendall(encode_message(Error(
                code="SessionUnavailable", message=f"session is {self.session.phase}")))
            return
        self._triggers[trigger_id] = {"ack": None, "conn": conn}
        self.session.submit_event(msg.kind, msg.payload)

    def _on_event_acked(self, ev: Event, ack: EventAck) -> None:
        trigger_id = (ev.payload or {}).get("trigger_id")
        if trigger_id is None:
            return
        entry = self._triggers.get(trigger_id)
        if entry is None:
            return
        entry["ack"] = ack
        if self.control_ack_delay_s:
            time.sleep(self.control_ack_delay_s)
            self.control_ack_delay_s = 0.0
        conn = entry.get("conn")
        if conn in self._control_conns:
            try:
                conn.sendall(encode_message(ack))
            except OSError:
                self._drop_control(conn)

    # -- main loop -------------------------------------------------------------------------------

    def run(self) -> SessionOutcome:
        self.session.start()
        try:
            while not self.finished:
                timeout = self._next_timeout_s()
                for key, _ in self._selector.select(timeout):
                    key.data()
                    if self.finished:
                        break
                self._run_due_timers()
                self._drain_calls()
        finally:
            self._shutdown()
        return self.outcome

    def _next_timeout_s(self) -> float:
        while self._timers and self._timers[0].cancelled:
            heapq.heappop(self._timers)
        if not self._timers:
            return 0.1
        delta = (self._timers[0].at_us - self.now_us()) / 1e6
        return min(max(delta, 0.0), 0.1)

    def _run_due_timers(self) -> None:
        now = self.now_us()
        while self._timers and self._timers[0].at_us <= now:
            timer = heapq.heappop(self._timers)
            if not timer.cancelled:
                timer.fn()
            if self.finished:
                return

    def _drain_calls(self) -> None:
        while True:
            try:
                fn = self._calls.get_nowait()
            except queue.Empty:
                return
            fn()
            if self.finished:
                return

    def _shutdown(self) -> None:
        self.finished = True
        if self._capture is not None and self._capture.is_alive():
            self._capture.join(timeout=2)
        for conn in list(self._control_conns):
            self._drop_control(conn)
        if self._control_listener is not None:
            self._control_listener.close()
        for sock in (self._sock, self._wake_r, self._wake_w):
            try:
                sock.close()
            except OSError:
                pass
        self._selector.close()

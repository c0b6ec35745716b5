"""Real TCP front end: framed protocol listener plus the HTTP upload port.

Each accepted connection gets a dedicated handler thread driving one
ServerSession (the per-trial activities contract); the shared core
serializes state behind its own lock. The HTTP upload endpoint runs
uvicorn in a sibling thread against the same core.
"""

from __future__ import annotations

import logging
import socket
import threading
import time
from typing import Optional

import uvicorn

from mnet.protocol import FrameDecoder, ProtocolError, encode_message
from mnet.server.core import ServerCore
from mnet.server.session import InstructionSource, ServerSession
from mnet.service.app import create_app

log = logging.getLogger("mnet.server")

_TICK_S = 0.2


def _now_us() -> int:
    return int(time.time() * 1e6)


class _Connection(threading.Thread):
    def __init__(self, server: "MnetTcpServer", sock: socket.socket, peer) -> None:
        super().__init__(daemon=True, name=f"mnet-conn-{peer}")
        self._server = server
        self._sock = sock
        self._peer = peer
        self._send_lock = threading.Lock()
        self.session = ServerSession(
            server.core,
            send=self._send,
            instruction_source=server.instruction_source,
            heartbeat_timeout_s=server.heartbeat_timeout_s,
            now_us=_now_us(),
        )

    def _send(self, msg) -> None:
        data = encode_message(msg)
        with self._send_lock:
            try:
                self._sock.sendall(data)
            except OSError:
                pass  # peer is gone; the read loop will notice

    def run(self) -> None:
        decoder = FrameDecoder()
        self._sock.settimeout(_TICK_S)
        try:
            while not self.session.done:
                try:
                    data = self._sock.recv(65536)
                except socket.timeout:
                    self.session.on_tick(_now_us())
                    continue
                except OSError:
                    break
                if not data:
                    break
                try:
                    for msg in decoder.feed(data):
                        self.session.on_message(msg, _now_us())
                except ProtocolError as exc:
                    log.warning("protocol violation from %s: %s", self._peer, exc)
                    if self.session.trial and not self.session.submitted:
                        self._server.core.mark_broken(self.session.trial,
                                                      f"protocol violation: {exc}", _now_us())
                    break
                self.session.on_tick(_now_us())
        finally:
            self.session.on_disconnect(_now_us())
            try:
                self._sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self._sock.close()
            self._server.forget(self)


class MnetTcpServer:
    def __init__(
        self,
        core: ServerCore,
        listen_addr: tuple[str, int],
        http_addr: tuple[str, int],
        instruction_source: Optional[InstructionSource] = None,
        heartbeat_timeout_s: float = 60.0,
    ) -> None:
        self.core = core
        self.instruction_source = instruction_source
        self.heartbeat_timeout_s = heartbeat_timeout_s
        self._listener = socket.create_server(listen_addr, reuse_port=False)
        self._listener.settimeout(0.5)
        self.listen_port = self._listener.getsockname()[1]
        self._connections: set[_Connection] = set()
        self._conn_lock = threading.Lock()
        self._stopping = threading.Event()
        self._accept_thread: Optional[threading.Thread] = None

        http_config = uvicorn.Config(create_app(core), host=http_addr[0], port=http_addr[1],
                                     log_level="warning", lifespan="off")
        self._http = uvicorn.Server(http_config)
        self._http_thread: Optional[threading.Thread] = None

    @property
    def http_port(self) -> int:
        while not self._http.started and not self._stopping.is_set():
            time.sleep(0.01)
        for server in self._http.servers:
            for sock in server.sockets:
                return sock.getsockname()[1]
        raise RuntimeError("http server not running")

    def start(self) -> None:
        self._accept_thread = threading.Thread(target=self._accept_loop,
                                               daemon=True, name="mnet-accept")
        self._accept_thread.start()
        self._http_thread = threading.Thread(target=self._http.run,
                                             daemon=True, name="mnet-http")
        self._http_thread.start()

    def wait_ready(self) -> None:
        """Block until the HTTP port is bound, then point signed URLs at it."""
        port = self.http_port
        self.core.url_base = f"http://{self._http.config.host}:{port}"

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                sock, peer = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            conn = _Connection(self, sock, peer)
            with self._conn_lock:
                self._connections.add(conn)
            conn.start()

    def forget(self, conn: _Connection) -> None:
        with self._conn_lock:
            self._connections.discard(conn)

    def stop(self) -> None:
        self._stopping.set()
        self._listener.close()
        self._http.should_exit = True
        if self._http_thread:
            self._http_thread.join(timeout=5)
        if self._accept_thread:
            self._accept_thread.join(timeout=5)
        with self._conn_lock:
            conns = list(self._connections)
        for conn in conns:
            try:
                conn._sock.close()
            except OSError:
                pass

    def serve_forever(self) -> None:
        self.start()
        self.wait_ready()
        try:
            while True:
                time.sleep(1)
        except KeyboardInterrupt:
            self.stop()

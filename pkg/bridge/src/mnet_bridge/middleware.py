"""Middleware binding interface.

The bridge never imports a robot stack directly: it talks to this small
interface, which a deployment backs with its middleware's service servers
and topic publishers. The loopback implementation keeps CI and development
machines free of any robot dependencies while exercising the same paths.

Trigger-style services return (success, message) pairs, matching the
common middleware convention for parameterless triggers.
"""

from __future__ import annotations

import abc
import threading
from typing import Callable

TriggerHandler = Callable[[], tuple[bool, str]]


class Middleware(abc.ABC):
    @abc.abstractmethod
    def register_service(self, name: str, handler: TriggerHandler) -> None:
        """Expose a trigger service; the handler runs per call."""

    @abc.abstractmethod
    def publish(self, topic: str, payload: bytes) -> None:
        """Emit raw bytes on a topic."""


class LoopbackMiddleware(Middleware):
    """In-process stub: services are plain callables, topics are lists."""

    def __init__(self) -> None:
        self._services: dict[str, TriggerHandler] = {}
        self.topics: dict[str, list[bytes]] = {}
        self._lock = threading.Lock()

    def register_service(self, name: str, handler: TriggerHandler) -> None:
        with self._lock:
            if name in self._services:
                raise ValueError(f"service {name!r} already registered")
            self._services[name] = handler

    def publish(self, topic: str, payload: bytes) -> None:
        with self._lock:
            self.topics.setdefault(topic, []).append(payload)

    def call_service(self, name: str) -> tuple[bool, str]:
        with self._lock:
            handler = self._services.get(name)
        if handler is None:
            raise KeyError(f"no service {name!r}")
        return handler()

    def messages(self, topic: str) -> list[bytes]:
        with self._lock:
            return list(self.topics.get(topic, []))

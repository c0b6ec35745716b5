"""Robot-middleware adapter for a running mnet client session."""

from mnet_bridge.bridge import AckTimeout, Bridge, BridgeConfig, SessionUnavailable
from mnet_bridge.middleware import LoopbackMiddleware, Middleware

__all__ = [
    "AckTimeout",
    "Bridge",
    "BridgeConfig",
    "LoopbackMiddleware",
    "Middleware",
    "SessionUnavailable",
]

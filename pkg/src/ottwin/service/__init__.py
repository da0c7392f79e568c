"""Network face of the twin: live sessions, HTTP/WebSocket app, raw TCP."""

from .app import create_app
from .live import LiveSession, SessionRegistry

__all__ = ["create_app", "LiveSession", "SessionRegistry"]

"""Wire protocol: newline-delimited JSON over one full-duplex connection.

Client → server:
    {"type": "hand_input", "device": "left"|"right", "vel": [vx, vy, vz], "t": seconds}
    {"type": "control", "action": "start"|"abort"}

Server → client:
    {"type": "hello", ...}    once, on attach: scenario document + session info
    {"type": "state", ...}    60 Hz: the trial-log record plus live geometry
    {"type": "result", ...}   once, terminal outcome
    {"type": "error", ...}    protocol violations; the connection stays open

Every outbound message is serialized with the canonical JSON writer, so a
recorded stream is stable byte-for-byte across runs — that is what the
golden-file tests pin down. Transports add their own framing: raw TCP
appends a newline, WebSocket sends one message per text frame.
"""

from __future__ import annotations

import json
from typing import Annotated, Literal, Union

from pydantic import BaseModel, Field, TypeAdapter, ValidationError

from .scenario import Scenario
from .serialize import canonical_dumps

WIRE_SCHEMA_VERSION = 1

Vec3Wire = tuple[
    Annotated[float, Field(allow_inf_nan=False)],
    Annotated[float, Field(allow_inf_nan=False)],
    Annotated[float, Field(allow_inf_nan=False)],
]


class ProtocolError(ValueError):
    """Raised when an inbound line is not a valid client message."""


class HandInputMessage(BaseModel, extra="forbid"):
    type: Literal["hand_input"]
    device: Literal["left", "right"]
    vel: Vec3Wire
    t: Annotated[float, Field(ge=0.0, allow_inf_nan=False)]


class ControlMessage(BaseModel, extra="forbid"):
    type: Literal["control"]
    action: Literal["start", "abort"]


ClientMessage = Annotated[
    Union[HandInputMessage, ControlMessage], Field(discriminator="type")
]

_CLIENT_ADAPTER: TypeAdapter = TypeAdapter(ClientMessage)


def parse_client_line(line: str) -> Union[HandInputMessage, ControlMessage]:
    """Parse one inbound line; raises ProtocolError with a usable reason."""
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"not valid JSON: {exc.msg}") from exc
    if not isinstance(payload, dict):
        raise ProtocolError("message must be a JSON object")
    try:
        return _CLIENT_ADAPTER.validate_python(payload)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = ".".join(str(p) for p in first["loc"])
        raise ProtocolError(f"{loc or 'message'}: {first['msg']}") from exc


# ---------------------------------------------------------------------------
# server → client builders (plain dicts; encode() fixes the bytes)


def hello_message(scenario: Scenario, session_id: str) -> dict:
    """First message on attach: everything a renderer needs that never
    changes during the trial, including the full normalized scenario."""
    return {
        "type": "hello",
        "wire_version": WIRE_SCHEMA_VERSION,
        "session": session_id,
        "scenario": scenario.name,
        "config_hash": scenario.config_hash,
        "dt": scenario.dt,
        "ticks_per_second": scenario.ticks_per_second,
        "record_hz": 60,
        "devices": list(scenario.devices),
        "document": scenario.document,
    }


def state_message(record: dict, world) -> dict:
    """A trial-log record plus the moving geometry a renderer needs:
    element centers, cell centers, and per-element optical forces."""
    msg = dict(record)
    msg["type"] = "state"
    msg["geometry"] = {
        "elements": [list(c) for c in world.element_centers()],
        "cells": [list(c.position) for c in world.cells],
        "element_forces": [list(f) for f in world.last_optical],
    }
    return msg


def result_message(outcome: dict) -> dict:
    msg = dict(outcome)
    msg["type"] = "result"
    return msg


def error_message(reason: str) -> dict:
    return {"type": "error", "reason": reason}


def encode(message: dict) -> str:
    """Canonical single-line JSON; the transport adds framing."""
    return canonical_dumps(message)

"""Raw TCP transport: the wire protocol over a plain socket, one line per
message. Each accepted connection is an operator and gets a fresh session
of the server's default scenario — observers attach over the WebSocket
transport instead. The server stays responsive while sessions tick because
every session advances on the shared event loop in sub-millisecond slices.
"""

from __future__ import annotations

import asyncio
from pathlib import Path
from typing import Optional

from ..scenario import Scenario
from .live import LiveSession, SessionRegistry


async def _pump(queue: asyncio.Queue, writer: asyncio.StreamWriter) -> None:
    while True:
        item = await queue.get()
        if item is None:
            break
        try:
            writer.write(item.encode() + b"\n")
            await writer.drain()
        except (ConnectionError, RuntimeError):
            return


async def _read(reader: asyncio.StreamReader, session: LiveSession) -> None:
    while True:
        try:
            line = await reader.readline()
        except (ConnectionError, asyncio.IncompleteReadError):
            break
        if not line:
            break
        text = line.decode(errors="replace").strip()
        if text:
            session.handle_line(text)
    session.operator_gone()


async def serve_tcp(
    host: str,
    port: int,
    scenario: Scenario,
    *,
    registry: Optional[SessionRegistry] = None,
    headless: bool = True,
    log_dir: Optional[Path] = None,
) -> asyncio.base_events.Server:
    """Listen for operator connections; returns the asyncio server."""
    registry = registry if registry is not None else SessionRegistry()

    async def handle(reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        session = registry.create(scenario, headless=headless, log_dir=log_dir)
        queue, hello = session.attach_operator()
        try:
            writer.write(hello.encode() + b"\n")
            await writer.drain()
            pump_task = asyncio.create_task(_pump(queue, writer))
            await _read(reader, session)
            # EOF is a half-close: the write side is still up, and
            # operator_gone guarantees the session ends within a frame, so
            # flush the tail of the stream (result included) before closing
            try:
                await asyncio.wait_for(pump_task, timeout=5.0)
            except asyncio.TimeoutError:
                pump_task.cancel()
        finally:
            session.detach(queue)
            writer.close()
            try:
                await writer.wait_closed()
            except ConnectionError:
                pass

    return await asyncio.start_server(handle, host, port)

"""Live session hosting: one ticking engine, many message consumers.

A LiveSession wraps a SessionEngine behind the wire protocol. All mutation
happens on the event loop (handlers and the wall-clock ticker are both loop
tasks), so the engine needs no locks: network receive paths only write the
per-device input mailbox, and every consumer sees the same ordered stream
of encoded messages through its own queue.

Two clocks:

* headless (lockstep): the virtual clock advances only when an input's
  timestamp requires it — frames whose boundary falls at or before the
  timestamp run *before* the input lands in the mailbox, which is exactly
  the zero-order-hold discipline the scripted sources use. Deterministic,
  and as fast as the inputs arrive.
* live: an asyncio task paces frames at the broadcast rate in wall time.
  Same engine, same messages; only the clock differs.
"""

from __future__ import annotations

import asyncio
from pathlib import Path
from typing import Optional

from ..geom import Vec3
from ..logs import BROADCAST_HZ, TrialLog
from ..protocol import (
    ControlMessage,
    HandInputMessage,
    ProtocolError,
    encode,
    error_message,
    hello_message,
    parse_client_line,
    result_message,
    state_message,
)
from ..scenario import Scenario
from ..session import SessionEngine, SessionPhase, SourcePoll


class MailboxSource:
    """Input source fed by the network: last writer wins per device."""

    def __init__(self) -> None:
        self.current: dict[str, Vec3] = {}
        self.abort = False
        self.closed = False

    def poll(self, tick: int, t: float, record: Optional[dict]) -> SourcePoll:
        return SourcePoll(
            inputs=tuple(self.current.items()),
            abort=self.abort,
            closed=self.closed,
        )


class LiveSession:
    """One trial, one operator, any number of observers."""

    def __init__(
        self,
        scenario: Scenario,
        *,
        session_id: str,
        seed: Optional[int] = None,
        headless: bool = True,
        log_dir: Optional[Path] = None,
    ) -> None:
        self.scenario = scenario
        self.session_id = session_id
        self.headless = headless
        self.log_dir = Path(log_dir) if log_dir is not None else None
        self.source = MailboxSource()
        self.engine = SessionEngine(scenario, self.source, seed=seed)
        self.failed = False
        self.log: Optional[TrialLog] = None
        self.log_path: Optional[Path] = None
        self._queues: list[asyncio.Queue] = []
        self._operator_queue: Optional[asyncio.Queue] = None
        self._ticker: Optional[asyncio.Task] = None
        self._hello = encode(hello_message(scenario, session_id))

    # -- attachment --------------------------------------------------------

    @property
    def phase(self) -> SessionPhase:
        # a failed session is terminal for consumers even though the engine
        # never reached an outcome (no log is written)
        if self.failed:
            return SessionPhase.ENDED
        return self.engine.phase

    @property
    def operator_attached(self) -> bool:
        return self._operator_queue is not None

    def attach_operator(self) -> tuple[asyncio.Queue, str]:
        if self._operator_queue is not None:
            raise RuntimeError("session already has an operator")
        queue: asyncio.Queue = asyncio.Queue()
        self._operator_queue = queue
        self._queues.append(queue)
        return queue, self._hello

    def attach_observer(self) -> tuple[asyncio.Queue, str]:
        queue: asyncio.Queue = asyncio.Queue()
        if self.phase is SessionPhase.ENDED:
            queue.put_nowait(None)  # stream is already over
        else:
            self._queues.append(queue)
        return queue, self._hello

    def detach(self, queue: asyncio.Queue) -> None:
        if queue in self._queues:
            self._queues.remove(queue)
        if queue is self._operator_queue:
            self._operator_queue = None

    # -- inbound -----------------------------------------------------------

    def handle_line(self, line: str) -> None:
        """Process one client line; every reply rides the queues."""
        try:
            msg = parse_client_line(line)
        except ProtocolError as exc:
            self._to_operator(encode(error_message(str(exc))))
            return
        if isinstance(msg, ControlMessage):
            if msg.action == "start":
                self._handle_start()
            else:
                self._handle_abort()
            return
        self._handle_input(msg)

    def operator_gone(self) -> None:
        """Operator connection dropped: end a running trial as a disconnect."""
        self._operator_queue = None
        if self.phase is not SessionPhase.RUNNING:
            if self.phase is SessionPhase.LOBBY:
                self._close_queues()
            return
        self.source.closed = True
        if self.headless:
            self._drain_to_end()
        # live mode: the ticker observes the flag on its next frame

    # -- control / input ---------------------------------------------------

    def _handle_start(self) -> None:
        if self.phase is not SessionPhase.LOBBY:
            self._to_operator(encode(error_message("session already started")))
            return
        record = self.engine.start()
        self._broadcast([encode(state_message(record, self.engine.world))])
        if not self.headless:
            self._ticker = asyncio.get_running_loop().create_task(self._tick_loop())

    def _handle_abort(self) -> None:
        if self.phase is not SessionPhase.RUNNING:
            self._to_operator(encode(error_message("session is not running")))
            return
        self.source.abort = True
        if self.headless:
            self._drain_to_end()

    def _handle_input(self, msg: HandInputMessage) -> None:
        if self.phase is not SessionPhase.RUNNING:
            self._to_operator(encode(error_message("session is not running")))
            return
        if msg.device not in self.scenario.devices:
            self._to_operator(
                encode(error_message(f"no trap is assigned to device {msg.device!r}"))
            )
            return
        if self.headless:
            self._advance_to(msg.t)
        self.source.current[msg.device] = tuple(msg.vel)

    # -- clock -------------------------------------------------------------

    def _advance_to(self, t: float) -> None:
        """Lockstep: run every frame whose boundary time is <= t."""
        engine = self.engine
        dt = self.scenario.dt
        while self.phase is SessionPhase.RUNNING:
            boundary_tick = (engine.frame + 1) * engine.pps // BROADCAST_HZ
            if boundary_tick * dt > t:
                break
            self._advance_frame()

    def _drain_to_end(self) -> None:
        while self.phase is SessionPhase.RUNNING:
            self._advance_frame()

    def _advance_frame(self) -> None:
        try:
            records = self.engine.advance_frame()
            out = [encode(state_message(r, self.engine.world)) for r in records]
            if self.engine.phase is SessionPhase.ENDED:
                out.append(encode(result_message(self.engine.outcome)))
        except Exception as exc:  # instability, NaN encoding: session is dead
            self.failed = True
            self._broadcast([encode(error_message(f"simulation failed: {exc}"))])
            self._close_queues()
            return
        self._broadcast(out)
        if self.engine.phase is SessionPhase.ENDED:
            self._finalize()

    async def _tick_loop(self) -> None:
        loop = asyncio.get_running_loop()
        period = 1.0 / BROADCAST_HZ
        next_at = loop.time() + period
        while self.phase is SessionPhase.RUNNING:
            delay = next_at - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            next_at += period
            if self.phase is SessionPhase.RUNNING:
                self._advance_frame()

    # -- outbound ----------------------------------------------------------

    def _to_operator(self, line: str) -> None:
        if self._operator_queue is not None:
            self._operator_queue.put_nowait(line)

    def _broadcast(self, lines: list[str]) -> None:
        for line in lines:
            for queue in self._queues:
                queue.put_nowait(line)

    def _close_queues(self) -> None:
        for queue in self._queues:
            queue.put_nowait(None)
        self._queues.clear()
        self._operator_queue = None

    def _finalize(self) -> None:
        self.log = self.engine.trial_log()
        try:
            if self.log_dir is not None:
                self.log_dir.mkdir(parents=True, exist_ok=True)
                self.log_path = self.log_dir / f"{self.scenario.name}-{self.session_id}.jsonl"
                self.log.write(self.log_path)
        finally:
            self._close_queues()  # a failed disk write must not strand readers


class SessionRegistry:
    """All sessions this server has hosted, by id. Ids are sequential so a
    scripted run against a fresh server is reproducible byte-for-byte."""

    def __init__(self) -> None:
        self._sessions: dict[str, LiveSession] = {}
        self._counter = 0

    def create(
        self,
        scenario: Scenario,
        *,
        seed: Optional[int] = None,
        headless: bool = True,
        log_dir: Optional[Path] = None,
    ) -> LiveSession:
        self._counter += 1
        session_id = f"s{self._counter:04d}"
        session = LiveSession(
            scenario,
            session_id=session_id,
            seed=seed,
            headless=headless,
            log_dir=log_dir,
        )
        self._sessions[session_id] = session
        return session

    def get(self, session_id: str) -> Optional[LiveSession]:
        return self._sessions.get(session_id)

    def items(self):
        return self._sessions.items()

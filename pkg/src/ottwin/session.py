"""Trial sessions: the tick loop, input pipeline, outcome detection, replay.

Physics advances at the scenario tick rate; records are emitted at 60 Hz
frame boundaries (tick ``f * pps // 60`` for frame ``f``) plus one final
record at the end tick. Hand inputs are zero-order-hold: the latest value
per device is consumed at each physics tick, and every change is logged as
an event carrying the tick at which it took effect. Replaying those events
against the same scenario and seed reproduces the log byte for byte.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Protocol

from .geom import Vec3, v_dist
from .logs import BROADCAST_HZ, LOG_SCHEMA_VERSION, TrialLog
from .scenario import Scenario
from .teleop import HandInput, LowPassState, lowpass_step, raw_force, render_force, update_trap
from .teleop import TrapLossTracker


class ReplayError(ValueError):
    """Raised when a log cannot be replayed against the given scenario."""


class SessionPhase(enum.Enum):
    LOBBY = "lobby"
    RUNNING = "running"
    ENDED = "ended"


@dataclass(frozen=True)
class SourcePoll:
    """What an input source hands the engine before one tick executes."""

    inputs: tuple[tuple[str, Vec3], ...] = ()
    abort: bool = False
    closed: bool = False


class InputSource(Protocol):
    def poll(self, tick: int, t: float, record: Optional[dict]) -> SourcePoll:
        """Called once per tick; ``record`` is set on the first poll after a
        new record was emitted (frame boundary), else None."""
        ...


@dataclass
class ScriptSource:
    """Timestamped hand inputs; each applies at the first tick whose start
    time has reached its timestamp. Optional abort/close times."""

    entries: list[HandInput]
    abort_at: Optional[float] = None
    close_at: Optional[float] = None
    _cursor: int = field(default=0, init=False)

    def __post_init__(self):
        self.entries = sorted(self.entries, key=lambda e: e.timestamp)

    def poll(self, tick: int, t: float, record: Optional[dict]) -> SourcePoll:
        if self.abort_at is not None and t >= self.abort_at:
            return SourcePoll(abort=True)
        if self.close_at is not None and t >= self.close_at:
            return SourcePoll(closed=True)
        updates: dict[str, Vec3] = {}
        while self._cursor < len(self.entries) and self.entries[self._cursor].timestamp <= t:
            e = self.entries[self._cursor]
            updates[e.device] = e.velocity  # later entries win: latest value holds
            self._cursor += 1
        return SourcePoll(inputs=tuple(updates.items()))


@dataclass
class ReplaySource:
    """Re-issues logged events at exactly their recorded ticks."""

    events: list[dict]
    _cursor: int = field(default=0, init=False)

    def __post_init__(self):
        self.events = sorted(self.events, key=lambda e: e["tick"])

    def poll(self, tick: int, t: float, record: Optional[dict]) -> SourcePoll:
        updates: list[tuple[str, Vec3]] = []
        while self._cursor < len(self.events) and self.events[self._cursor]["tick"] <= tick:
            ev = self.events[self._cursor]
            self._cursor += 1
            kind = ev.get("kind")
            if kind == "input":
                updates.append((ev["device"], tuple(ev["vel"])))
            elif kind == "abort":
                return SourcePoll(inputs=tuple(updates), abort=True)
            elif kind == "disconnect":
                return SourcePoll(inputs=tuple(updates), closed=True)
        return SourcePoll(inputs=tuple(updates))


class SessionEngine:
    """Owns one trial: world, filters, trap-loss latch, records, outcome.

    Drive it with ``start()`` then ``advance_frame()`` until ``phase`` is
    ENDED; ``trial_log()`` returns the finished log. All state transitions
    are pure functions of (scenario, seed, polled inputs), which is what
    makes replay exact.
    """

    def __init__(self, scenario: Scenario, source: InputSource, *, seed: Optional[int] = None):
        self.scenario = scenario
        self.source = source
        self.seed = scenario.seed if seed is None else seed
        self.world = scenario.build_world(self.seed)
        self.pps = scenario.ticks_per_second
        self.devices = scenario.devices
        self.phase = SessionPhase.LOBBY
        self.frame = 0
        cfg = scenario.teleop
        self._cfg = cfg
        self._motion: dict[str, LowPassState] = {d: LowPassState() for d in self.devices}
        self._force: dict[str, LowPassState] = {d: LowPassState() for d in self.devices}
        self._hand_vel: dict[str, Vec3] = {d: (0.0, 0.0, 0.0) for d in self.devices}
        self._applied: dict[str, Vec3] = {d: (0.0, 0.0, 0.0) for d in self.devices}
        self._outputs: dict[str, Vec3] = {d: (0.0, 0.0, 0.0) for d in self.devices}
        self._raw: dict[str, Vec3] = {d: (0.0, 0.0, 0.0) for d in self.devices}
        self._warning = False
        self.tracker = TrapLossTracker(len(scenario.traps), cfg.d_loss)
        self.records: list[dict] = []
        self._pending_events: list[dict] = []
        self._fresh_record: Optional[dict] = None
        self.outcome: Optional[dict] = None
        self.header = {
            "type": "header",
            "schema_version": LOG_SCHEMA_VERSION,
            "scenario": scenario.name,
            "config_hash": scenario.config_hash,
            "seed": self.seed,
            "dt": scenario.dt,
            "ticks_per_second": self.pps,
            "record_hz": BROADCAST_HZ,
        }

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> dict:
        if self.phase is not SessionPhase.LOBBY:
            raise RuntimeError(f"cannot start from phase {self.phase.value}")
        self.phase = SessionPhase.RUNNING
        return self._emit_record()

    def advance_frame(self) -> list[dict]:
        """Run ticks up to the next frame boundary; returns new records
        (usually one; the final frame may add the end record early)."""
        if self.phase is not SessionPhase.RUNNING:
            raise RuntimeError("session is not running")
        self.frame += 1
        target = self.frame * self.pps // BROADCAST_HZ
        emitted = []
        while self.world.tick < target and self.phase is SessionPhase.RUNNING:
            rec = self._tick_once()
            if rec is not None:
                emitted.append(rec)
        if self.phase is SessionPhase.RUNNING and self.world.tick == target:
            emitted.append(self._emit_record())
        return emitted

    def run_to_end(self) -> None:
        while self.phase is SessionPhase.RUNNING:
            self.advance_frame()

    def trial_log(self) -> TrialLog:
        if self.outcome is None:
            raise RuntimeError("session has not ended")
        return TrialLog(header=self.header, records=tuple(self.records), outcome=self.outcome)

    # -- internals ---------------------------------------------------------

    def _tick_once(self) -> Optional[dict]:
        tick = self.world.tick
        poll = self.source.poll(tick, self.world.time, self._fresh_record)
        self._fresh_record = None
        for device, vel in poll.inputs:
            if device not in self._applied:
                continue  # no trap tagged for this device in the scenario
            if vel != self._applied[device]:
                self._applied[device] = vel
                self._pending_events.append(
                    {"kind": "input", "tick": tick, "device": device, "vel": list(vel)}
                )
        if poll.abort:
            self._pending_events.append({"kind": "abort", "tick": tick})
            return self._end("abort", False)
        if poll.closed:
            self._pending_events.append({"kind": "disconnect", "tick": tick})
            return self._end("disconnect", False)

        dt = self.scenario.dt
        cfg = self._cfg
        for d in self.devices:
            self._motion[d], self._hand_vel[d] = lowpass_step(
                self._motion[d], self._applied[d], cfg.alpha_m
            )
        for i, device in enumerate(self.scenario.trap_devices):
            if device in self._hand_vel:
                self.world.traps[i] = update_trap(
                    self.world.traps[i],
                    self._hand_vel[device],
                    cfg.g_control,
                    dt,
                    self.scenario.workspace,
                )

        self.world.step(dt)

        _, any_lost = self.tracker.update(
            self.world.traps, self.world.element_centers(), self.world.elements
        )
        self._warning = False
        for d in self.devices:
            f_raw = raw_force(
                self.world.last_optical,
                self.world.elements,
                list(self.scenario.trap_devices),
                d,
            )
            self._force[d], out = render_force(
                f_raw, self._force[d], cfg, self._hand_vel[d], trap_lost=any_lost
            )
            self._raw[d] = f_raw
            self._outputs[d] = out.f_hand
            self._warning = self._warning or out.warning

        if any_lost:
            return self._end("trap_loss", False)
        if self._payload_in_goal():
            return self._end("success", True)
        if self.world.time >= self.scenario.timeout_s - 1e-12:
            return self._end("timeout", False)
        return None

    def _payload_in_goal(self) -> bool:
        s = self.scenario
        if s.goal_center is None or s.payload_cell is None:
            return False
        payload = self.world.cells[s.payload_cell].position
        return v_dist(payload, s.goal_center) <= s.goal_radius

    def _trap_distance(self) -> Optional[float]:
        best = None
        centers = self.world.element_centers()
        for el, c in zip(self.world.elements, centers):
            if el.assigned_trap is None:
                continue
            d = v_dist(self.world.traps[el.assigned_trap].position, c)
            if best is None or d < best:
                best = d
        return best

    def _emit_record(self) -> dict:
        w = self.world
        rec = {
            "type": "record",
            "tick": w.tick,
            "t": w.time,
            "robot": {
                "position": list(w.state.position),
                "orientation": list(w.state.orientation),
            },
            "traps": [list(t.position) for t in w.traps],
            "contact_force": w.last_contact.max_cell_force,
            "trap_distance": self._trap_distance(),
            "f_hand": {d: list(self._outputs[d]) for d in self.devices},
            "f_raw": {d: list(self._raw[d]) for d in self.devices},
            "warning": self._warning,
            "trap_lost": self.tracker.any_lost,
            "events": self._pending_events,
        }
        self._pending_events = []
        self.records.append(rec)
        self._fresh_record = rec
        return rec

    def _end(self, reason: str, success: bool) -> dict:
        rec = self._emit_record()
        self.outcome = {
            "type": "outcome",
            "success": success,
            "reason": reason,
            "ticks": self.world.tick,
            "duration_s": self.world.time,
        }
        self.phase = SessionPhase.ENDED
        return rec


def run_session(
    scenario: Scenario, source: InputSource, *, seed: Optional[int] = None
) -> TrialLog:
    """Run one trial to its outcome and return the finished log."""
    engine = SessionEngine(scenario, source, seed=seed)
    engine.start()
    engine.run_to_end()
    return engine.trial_log()


def replay(log: TrialLog, scenario: Scenario) -> TrialLog:
    """Re-run a logged trial; the result is byte-identical to the input.

    Precondition: the log's config hash matches the scenario's — any edit to
    the scenario (seed, dt, geometry, gains) shows up as a mismatch here.
    """
    recorded = log.header.get("config_hash")
    if recorded != scenario.config_hash:
        raise ReplayError(
            f"config hash mismatch: log has {recorded}, scenario has {scenario.config_hash}"
        )
    source = ReplaySource(list(log.iter_events()))
    return run_session(scenario, source, seed=log.header["seed"])

"""Scripted operator policies: waypoint drivers standing in for human pilots.

A policy reads the latest session record at each frame boundary and commands
a hand velocity toward its current waypoint. The force-aware variant slows
down as the raw trap force grows — speed = max(0, nominal − gain·|f_raw|) —
the force-blind variant ignores force entirely. With slowdown_gain = 0 the
two are identical by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .geom import Vec3, v_dist, v_norm, v_scale, v_sub
from .session import SourcePoll
from .teleop import DEVICES

POLICY_KINDS = ("force_blind", "force_aware")


class PolicyError(ValueError):
    """Raised for invalid operator-policy parameters."""


@dataclass(frozen=True)
class OperatorPolicy:
    kind: str
    nominal_speed: float  # µm/s of trap motion
    waypoints: tuple[Vec3, ...]
    slowdown_gain: float = 0.0  # µm/s shed per pN of |f_raw| (force_aware)
    device: str = "right"
    advance_tol: float = 0.75  # µm; within this of a waypoint → next one

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise PolicyError(f"kind must be one of {POLICY_KINDS}, got {self.kind!r}")
        if not self.nominal_speed > 0.0:
            raise PolicyError(f"nominal_speed must be > 0, got {self.nominal_speed}")
        if self.slowdown_gain < 0.0:
            raise PolicyError(f"slowdown_gain must be >= 0, got {self.slowdown_gain}")
        if self.kind == "force_blind" and self.slowdown_gain != 0.0:
            raise PolicyError("force_blind does not take a slowdown_gain")
        if not self.waypoints:
            raise PolicyError("policy needs at least one waypoint")
        if self.device not in DEVICES:
            raise PolicyError(f"device must be one of {DEVICES}")
        if not self.advance_tol > 0.0:
            raise PolicyError("advance_tol must be > 0")

    def speed(self, raw_force_magnitude: float) -> float:
        if self.kind == "force_blind":
            return self.nominal_speed
        return max(0.0, self.nominal_speed - self.slowdown_gain * raw_force_magnitude)


@dataclass
class PolicySource:
    """Session input source driven by an :class:`OperatorPolicy`.

    Decisions are made only when a fresh record arrives (frame boundaries),
    so the command stream — and therefore the whole trial — is a pure
    function of the log prefix. Trap position and raw force are read from
    the record, exactly what a remote client would see.
    """

    policy: OperatorPolicy
    g_control: float
    trap_index: int
    _waypoint: int = field(default=0, init=False)
    _command: Vec3 = field(default=(0.0, 0.0, 0.0), init=False)

    def poll(self, tick: int, t: float, record: Optional[dict]) -> SourcePoll:
        if record is None:
            return SourcePoll()
        trap = tuple(record["traps"][self.trap_index])
        f_raw = record["f_raw"].get(self.policy.device, (0.0, 0.0, 0.0))
        self._command = self._decide(trap, v_norm(tuple(f_raw)))
        return SourcePoll(inputs=((self.policy.device, self._command),))

    def _decide(self, trap: Vec3, raw_mag: float) -> Vec3:
        wp = self.policy.waypoints
        while (
            self._waypoint < len(wp) - 1
            and v_dist(trap, wp[self._waypoint]) < self.policy.advance_tol
        ):
            self._waypoint += 1
        target = wp[self._waypoint]
        offset = v_sub(target, trap)
        dist = v_norm(offset)
        if dist < self.policy.advance_tol and self._waypoint == len(wp) - 1:
            return (0.0, 0.0, 0.0)  # parked at the final waypoint
        speed = self.policy.speed(raw_mag)
        if speed == 0.0 or dist == 0.0:
            return (0.0, 0.0, 0.0)
        # hand-units: the trap pipeline multiplies by g_control
        return v_scale(offset, speed / (dist * self.g_control))

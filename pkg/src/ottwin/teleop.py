"""Bilateral teleoperation signal pipeline.

Forward path: raw hand velocity -> low-pass (alpha_m) -> scaled by g_control
-> incremental trap motion, clamped to the workspace box.

Feedback path: per-device raw model force -> low-pass (alpha_f) -> virtual
damping against the filtered hand velocity -> scaled by g_hand -> rendered
hand force. The warning flag compares the UNfiltered raw force against the
threshold, so a hard impact cannot hide behind the filter lag.

The raw force is the trap-side reaction: minus the optical force the device's
traps exert on the robot. Pulling against resistance is therefore felt as
resistance. Trap loss is latched: once a trap is further than d_loss from its
assigned element, the trial cannot silently recover.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .force_model import OpticalForceParams, SphereElement, Trap
from .geom import Vec3, v_clamp, v_dist, v_finite

G_HAND_RANGE = (0.0022, 0.0030)

DEVICES = ("left", "right")


class TeleopConfigError(ValueError):
    """Teleop configuration violates its invariants."""


@dataclass(frozen=True)
class TeleopConfig:
    """Pipeline constants.

    ``damping_B`` and ``d_loss`` may be None, meaning "derive the default":
    B = 0.2 * g_control * gamma_t (damping stays a fraction of a typical
    force cue at nominal hand speed) and d_loss = the force cutoff (beyond
    it the restoring force is identically zero, so recapture is impossible).
    Call ``resolve`` to obtain a fully numeric config.
    """

    alpha_m: float = 0.05
    alpha_f: float = 0.05
    g_control: float = 50.0  # µm of trap travel per hand-unit
    g_hand: float = 0.0026
    damping_B: float | None = None  # pN·s per hand-unit
    f_warn: float = 8.0  # pN
    d_loss: float | None = None  # µm
    g_hand_override: bool = False

    def __post_init__(self):
        for name in ("alpha_m", "alpha_f"):
            a = getattr(self, name)
            if not (math.isfinite(a) and 0.0 < a <= 1.0):
                raise TeleopConfigError(f"{name} must be in (0, 1], got {a}")
        if not (math.isfinite(self.g_control) and self.g_control > 0):
            raise TeleopConfigError(f"g_control must be > 0, got {self.g_control}")
        if not math.isfinite(self.g_hand) or self.g_hand <= 0:
            raise TeleopConfigError(f"g_hand must be > 0, got {self.g_hand}")
        lo, hi = G_HAND_RANGE
        if not self.g_hand_override and not (lo <= self.g_hand <= hi):
            raise TeleopConfigError(
                f"g_hand {self.g_hand} outside [{lo}, {hi}]; "
                "set g_hand_override to use it anyway"
            )
        if not (math.isfinite(self.f_warn) and self.f_warn > 0):
            raise TeleopConfigError(f"f_warn must be > 0, got {self.f_warn}")
        if self.damping_B is not None and (
            not math.isfinite(self.damping_B) or self.damping_B < 0
        ):
            raise TeleopConfigError(f"damping_B must be >= 0, got {self.damping_B}")

    def resolve(self, params: OpticalForceParams, gamma_t: float) -> "ResolvedTeleop":
        damping = self.damping_B
        if damping is None:
            damping = 0.2 * self.g_control * gamma_t
        d_loss = self.d_loss
        if d_loss is None:
            d_loss = params.cutoff_r_max
        if not (math.isfinite(d_loss) and d_loss > params.delta):
            raise TeleopConfigError(
                f"d_loss ({d_loss}) must exceed the force breakpoint "
                f"delta ({params.delta})"
            )
        return ResolvedTeleop(
            alpha_m=self.alpha_m,
            alpha_f=self.alpha_f,
            g_control=self.g_control,
            g_hand=self.g_hand,
            damping_B=damping,
            f_warn=self.f_warn,
            d_loss=d_loss,
        )


@dataclass(frozen=True)
class ResolvedTeleop:
    alpha_m: float
    alpha_f: float
    g_control: float
    g_hand: float
    damping_B: float
    f_warn: float
    d_loss: float


@dataclass(frozen=True)
class HandInput:
    device: str
    velocity: Vec3  # hand-units/s
    timestamp: float  # s

    def __post_init__(self):
        if self.device not in DEVICES:
            raise TeleopConfigError(
                f"device must be one of {DEVICES}, got {self.device!r}"
            )
        if not v_finite(self.velocity) or not math.isfinite(self.timestamp):
            raise TeleopConfigError("hand input must be finite")


@dataclass(frozen=True)
class LowPassState:
    y_prev: Vec3 = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class HapticOutput:
    f_hand: Vec3  # device-scale units
    f_raw: Vec3  # pN
    warning: bool
    trap_lost: bool


@dataclass(frozen=True)
class Workspace:
    min_corner: Vec3
    max_corner: Vec3

    def __post_init__(self):
        if not (v_finite(self.min_corner) and v_finite(self.max_corner)):
            raise TeleopConfigError("workspace corners must be finite")
        if not all(a < b for a, b in zip(self.min_corner, self.max_corner)):
            raise TeleopConfigError(
                f"workspace min {self.min_corner} must be < max {self.max_corner}"
            )


def lowpass_step(
    state: LowPassState, x: Vec3, alpha: float
) -> tuple[LowPassState, Vec3]:
    """One first-order low-pass update: y = y_prev + alpha*(x - y_prev)."""
    if not (0.0 < alpha <= 1.0):
        raise TeleopConfigError(f"alpha must be in (0, 1], got {alpha}")
    if alpha == 1.0:
        y = x  # exact pass-through, no round-off detour
    else:
        yp = state.y_prev
        y = (
            yp[0] + alpha * (x[0] - yp[0]),
            yp[1] + alpha * (x[1] - yp[1]),
            yp[2] + alpha * (x[2] - yp[2]),
        )
    return LowPassState(y_prev=y), y


def update_trap(
    trap: Trap,
    filtered_vel: Vec3,
    g_control: float,
    dt: float,
    workspace: Workspace,
) -> Trap:
    """Incremental trap motion, clamped to the workspace box."""
    if dt <= 0:
        raise TeleopConfigError(f"dt must be > 0, got {dt}")
    step = g_control * dt
    target = (
        trap.position[0] + step * filtered_vel[0],
        trap.position[1] + step * filtered_vel[1],
        trap.position[2] + step * filtered_vel[2],
    )
    clamped = v_clamp(target, workspace.min_corner, workspace.max_corner)
    if clamped == trap.position:
        return trap
    return replace(trap, position=clamped)


def render_force(
    f_raw: Vec3,
    filter_state: LowPassState,
    cfg: ResolvedTeleop,
    hand_vel_filtered: Vec3,
    trap_lost: bool = False,
) -> tuple[LowPassState, HapticOutput]:
    """Filter, damp, and scale one device's raw force into a hand force."""
    new_state, f_f = lowpass_step(filter_state, f_raw, cfg.alpha_f)
    b = cfg.damping_B
    f_d = (
        f_f[0] - b * hand_vel_filtered[0],
        f_f[1] - b * hand_vel_filtered[1],
        f_f[2] - b * hand_vel_filtered[2],
    )
    g = cfg.g_hand
    f_hand = (g * f_d[0], g * f_d[1], g * f_d[2])
    raw_mag = math.sqrt(f_raw[0] ** 2 + f_raw[1] ** 2 + f_raw[2] ** 2)
    return new_state, HapticOutput(
        f_hand=f_hand,
        f_raw=f_raw,
        warning=raw_mag >= cfg.f_warn,
        trap_lost=trap_lost,
    )


def raw_force(
    per_element_forces: list[Vec3],
    elements: list[SphereElement],
    trap_devices: list[str],
    device: str,
) -> Vec3:
    """Trap-side reaction felt by one device: minus its traps' force on the robot."""
    fx = fy = fz = 0.0
    for el, f in zip(elements, per_element_forces):
        if el.assigned_trap is None:
            continue
        if trap_devices[el.assigned_trap] != device:
            continue
        fx -= f[0]
        fy -= f[1]
        fz -= f[2]
    return (fx, fy, fz)


class TrapLossTracker:
    """Latching trap-loss detector.

    A trap is lost when its distance to its assigned element center exceeds
    d_loss; a trap driving several elements uses the nearest one. Unassigned
    traps cannot be lost. Once lost, always lost.
    """

    def __init__(self, n_traps: int, d_loss: float):
        self.d_loss = d_loss
        self._lost = [False] * n_traps

    def update(
        self,
        traps: list[Trap],
        element_centers: list[Vec3],
        elements: list[SphereElement],
    ) -> tuple[tuple[bool, ...], bool]:
        nearest: dict[int, float] = {}
        for el, c in zip(elements, element_centers):
            if el.assigned_trap is None:
                continue
            d = v_dist(traps[el.assigned_trap].position, c)
            prev = nearest.get(el.assigned_trap)
            if prev is None or d < prev:
                nearest[el.assigned_trap] = d
        for idx, d in nearest.items():
            if d > self.d_loss:
                self._lost[idx] = True
        lost = tuple(self._lost)
        return lost, any(lost)

    @property
    def any_lost(self) -> bool:
        return any(self._lost)

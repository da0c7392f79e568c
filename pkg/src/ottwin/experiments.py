"""Batch studies: rotation curves, rendering consistency, delivery comparison.

Three desk-scale experiments, each emitting CSV rows plus a JSON-able
summary:

* rotation — steady out-of-plane angle θ versus trap spacing d* for the
  two twin-trap strategies, simulated at T=0 until the pose settles;
* consistency — pre-scaled rendered force along axial and radial sweeps
  against the force model it should reproduce (MSE/RMSE/R²);
* delivery — paired-seed trials of a force-blind versus force-aware
  scripted operator pushing a payload cell through a constriction.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .dynamics import Medium, RigidState, World, drag_coefficients
from .force_model import (
    OpticalForceParams,
    SphereElement,
    Trap,
    eval_trap_force,
    force_magnitude,
)
from .geom import Vec3, q_angle_between, q_rotate, v_norm
from .logs import SummaryComparison, TrialLog, TrialSummary, compare, summarize
from .policies import OperatorPolicy, PolicySource
from .rng import SimRng
from .scenario import Scenario, load_scenario
from .session import run_session
from .teleop import LowPassState, lowpass_step

# reference parameter set used by the bench studies and their tests;
# continuity at delta holds exactly: C + A/delta**2 == K*delta
REFERENCE_PARAMS = OpticalForceParams(
    stiffness_K=5.0, delta=1.0, far_A=2.0, far_C=3.0, cutoff_r_max=8.0
)


class StudyError(ValueError):
    """Raised for invalid study configurations."""


def spearman_rho(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman rank correlation; ties get their average rank."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise StudyError("spearman needs two equal-length series of >= 2 points")

    def ranks(vals):
        order = sorted(range(len(vals)), key=lambda i: vals[i])
        out = [0.0] * len(vals)
        i = 0
        while i < len(order):
            j = i
            while j + 1 < len(order) and vals[order[j + 1]] == vals[order[i]]:
                j += 1
            avg = (i + j) / 2.0 + 1.0
            for k in range(i, j + 1):
                out[order[k]] = avg
            i = j + 1
        return out

    rx, ry = ranks(xs), ranks(ys)
    mx = sum(rx) / len(rx)
    my = sum(ry) / len(ry)
    num = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    den = math.sqrt(
        sum((a - mx) ** 2 for a in rx) * sum((b - my) ** 2 for b in ry)
    )
    if den == 0.0:
        return 0.0
    return num / den


# ---------------------------------------------------------------------------
# rotation study


@dataclass(frozen=True)
class RotationStudyConfig:
    """Two-handle robot, two traps; spacing d* sets the steady tilt.

    Strategy A: equal trap powers, traps symmetrically offset out of plane
    by ±sqrt(L² − d*²)/2 so the handles can sit at the trap centers at
    separation L. Strategy B: powers (m, 1) normalized to sum 2; the strong
    trap stays in the focal plane and the weak one sags by the full
    sqrt(L² − d*²). Both reach handle-at-trap equilibria, so the steady
    angle is arcsin(sqrt(L² − d*²)/L) — strictly decreasing in d*.
    """

    strategy: str
    d_star_values: tuple[float, ...]
    power_ratio_m: float = 1.5
    settle_time: float = 2.0
    handle_separation: float = 6.0
    element_radius: float = 1.0
    params: OpticalForceParams = REFERENCE_PARAMS
    dt: float = 1e-3
    window_s: float = 0.1
    rate_threshold: float = 1e-4  # rad/s of quaternion change → converged

    def __post_init__(self):
        if self.strategy not in ("A", "B"):
            raise StudyError(f"strategy must be 'A' or 'B', got {self.strategy!r}")
        if len(self.d_star_values) < 5:
            raise StudyError("need at least 5 d_star values")
        if any(b <= a for a, b in zip(self.d_star_values, self.d_star_values[1:])):
            raise StudyError("d_star_values must be strictly increasing")
        if not self.power_ratio_m > 0.0:
            raise StudyError(f"power_ratio_m must be > 0, got {self.power_ratio_m}")
        L = self.handle_separation
        if not all(0.0 < d <= L for d in self.d_star_values):
            raise StudyError(
                f"every d_star must lie in (0, handle_separation={L}]"
            )
        if not self.settle_time > 0.0:
            raise StudyError("settle_time must be > 0")
        if not 0.0 < self.element_radius < L / 2:
            raise StudyError("element_radius must be positive and below half the separation")


@dataclass(frozen=True)
class RotationRow:
    d_star: float
    theta_deg: float
    converged: bool
    settle_s: float


def _rotation_traps(cfg: RotationStudyConfig, d_star: float) -> list[Trap]:
    L = cfg.handle_separation
    sag = math.sqrt(max(0.0, L * L - d_star * d_star))
    if cfg.strategy == "A":
        return [
            Trap(position=(-d_star / 2.0, 0.0, sag / 2.0), power_weight=1.0),
            Trap(position=(d_star / 2.0, 0.0, -sag / 2.0), power_weight=1.0),
        ]
    m = cfg.power_ratio_m
    strong = 2.0 * m / (m + 1.0)
    weak = 2.0 / (m + 1.0)
    return [
        Trap(position=(-d_star / 2.0, 0.0, 0.0), power_weight=strong),
        Trap(position=(d_star / 2.0, 0.0, -sag), power_weight=weak),
    ]


def run_rotation_study(cfg: RotationStudyConfig) -> list[RotationRow]:
    """Simulate each d* at T=0 until the pose settles; record steady θ.

    Convergence: the quaternion rotates by less than ``rate_threshold``
    rad/s over a ``window_s`` window. Rows that fail to converge within
    10·settle_time are flagged, not dropped.
    """
    L = cfg.handle_separation
    a = cfg.element_radius
    elements = [
        SphereElement(offset_body=(-L / 2.0, 0.0, 0.0), radius=a, assigned_trap=0),
        SphereElement(offset_body=(L / 2.0, 0.0, 0.0), radius=a, assigned_trap=1),
    ]
    axis_body = (1.0, 0.0, 0.0)
    medium = Medium(temperature_T=0.0)
    window_ticks = max(1, round(cfg.window_s / cfg.dt))
    max_ticks = round(10.0 * cfg.settle_time / cfg.dt)

    rows = []
    for d_star in cfg.d_star_values:
        world = World(
            elements=elements,
            state=RigidState(position=(0.0, 0.0, 0.0)),
            medium=medium,
            params=cfg.params,
            traps=_rotation_traps(cfg, d_star),
            rng=SimRng(0),
        )
        converged = False
        q_prev = world.state.orientation
        while world.tick < max_ticks:
            world.step(cfg.dt)
            if world.tick % window_ticks == 0:
                angle = q_angle_between(q_prev, world.state.orientation)
                q_prev = world.state.orientation
                if angle / cfg.window_s < cfg.rate_threshold:
                    converged = True
                    break
        axis_world = q_rotate(world.state.orientation, axis_body)
        theta = math.degrees(math.asin(min(1.0, abs(axis_world[2]) / v_norm(axis_world))))
        rows.append(
            RotationRow(
                d_star=d_star,
                theta_deg=theta,
                converged=converged,
                settle_s=world.time,
            )
        )
    return rows


ROTATION_CSV_HEADER = ("d_star_um", "theta_deg", "converged", "settle_s")


def write_rotation_csv(rows: list[RotationRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ROTATION_CSV_HEADER)
        for r in rows:
            w.writerow([repr(r.d_star), repr(r.theta_deg), int(r.converged), repr(r.settle_s)])


def read_rotation_csv(path) -> list[RotationRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != ROTATION_CSV_HEADER:
            raise StudyError(f"bad rotation CSV header {header!r}")
        return [
            RotationRow(
                d_star=float(r[0]),
                theta_deg=float(r[1]),
                converged=bool(int(r[2])),
                settle_s=float(r[3]),
            )
            for r in reader
        ]


# ---------------------------------------------------------------------------
# rendering-consistency study


@dataclass(frozen=True)
class ConsistencyRow:
    axis: str  # "axial" (beam z) or "radial" (x)
    r_target: float
    r: float
    f_rendered: float
    f_model: float


@dataclass(frozen=True)
class AxisStats:
    mse: float
    rmse: float
    r2: float


@dataclass(frozen=True)
class ConsistencyResult:
    axial: AxisStats
    radial: AxisStats
    rows: tuple[ConsistencyRow, ...]


def _axis_stats(rows: list[ConsistencyRow]) -> AxisStats:
    resid = [(r.f_rendered - r.f_model) for r in rows]
    mse = sum(e * e for e in resid) / len(rows)
    mean_model = sum(r.f_model for r in rows) / len(rows)
    ss_tot = sum((r.f_model - mean_model) ** 2 for r in rows)
    r2 = 1.0 - (mse * len(rows) / ss_tot) if ss_tot > 0.0 else 1.0
    return AxisStats(mse=mse, rmse=math.sqrt(mse), r2=r2)


def run_consistency_study(
    params: OpticalForceParams,
    *,
    grid: Optional[Sequence[float]] = None,
    sweep_speed: float = 2.0,
    ideal: bool = False,
    alpha_f: float = 0.05,
    damping_B: Optional[float] = None,
    g_control: float = 50.0,
    element_radius: float = 1.5,
    dt: float = 1e-3,
) -> ConsistencyResult:
    """Sweep trap–element displacement along the beam axis and a radial
    axis; compare the pre-scaled rendered force against the model.

    The element is held (probe condition) while the trap recedes at
    ``sweep_speed``; the force filter runs every tick and rows are taken as
    the displacement crosses each grid point, so filter lag and the virtual
    damping offset show up as honest residuals. With ``ideal=True`` the trap
    is parked at each grid point instead, damping is off, and the filter is
    run to convergence — the rendered force then equals the model to
    floating-point noise.
    """
    if grid is None:
        grid = [0.25 * k for k in range(1, 31)]  # 0.25 .. 7.5 µm
    grid = sorted(float(g) for g in grid)
    if not grid:
        raise StudyError("empty sweep grid")
    if grid[0] <= 0.0:
        raise StudyError("sweep displacements must be > 0")
    element = SphereElement(offset_body=(0.0, 0.0, 0.0), radius=element_radius)
    gamma_t = drag_coefficients([element], Medium()).gamma_t
    if damping_B is None:
        damping_B = 0.2 * g_control * gamma_t

    rows: list[ConsistencyRow] = []
    for axis_name, axis in (("axial", (0.0, 0.0, 1.0)), ("radial", (1.0, 0.0, 0.0))):
        origin = (0.0, 0.0, 0.0)  # pinned element center

        def f_raw_at(disp: float) -> Vec3:
            trap = Trap(position=(axis[0] * disp, axis[1] * disp, axis[2] * disp))
            f = eval_trap_force(params, trap, origin)
            return (-f[0], -f[1], -f[2])

        if ideal:
            for r_target in grid:
                state = LowPassState()
                x = f_raw_at(r_target)
                for _ in range(400):  # (1-alpha)^400 ~ 1e-9: converged
                    state, f_f = lowpass_step(state, x, alpha_f)
                rows.append(
                    ConsistencyRow(
                        axis=axis_name,
                        r_target=r_target,
                        r=r_target,
                        f_rendered=v_norm(f_f),
                        f_model=force_magnitude(params, r_target),
                    )
                )
            continue

        # receding sweep: start at the first grid point with the filter
        # pre-settled there, then advance one tick of trap motion at a time
        disp = grid[0]
        state = LowPassState(y_prev=f_raw_at(disp))
        hand_speed = sweep_speed / g_control  # what the operator would command
        next_idx = 1
        rows.append(
            ConsistencyRow(
                axis=axis_name,
                r_target=grid[0],
                r=disp,
                f_rendered=abs(v_norm(f_raw_at(disp)) - damping_B * hand_speed),
                f_model=force_magnitude(params, disp),
            )
        )
        while next_idx < len(grid):
            disp += sweep_speed * dt
            state, f_f = lowpass_step(state, f_raw_at(disp), alpha_f)
            if disp >= grid[next_idx]:
                f_d = (
                    f_f[0] - damping_B * hand_speed * axis[0],
                    f_f[1] - damping_B * hand_speed * axis[1],
                    f_f[2] - damping_B * hand_speed * axis[2],
                )
                rows.append(
                    ConsistencyRow(
                        axis=axis_name,
                        r_target=grid[next_idx],
                        r=disp,
                        f_rendered=v_norm(f_d),
                        f_model=force_magnitude(params, disp),
                    )
                )
                next_idx += 1

    axial_rows = [r for r in rows if r.axis == "axial"]
    radial_rows = [r for r in rows if r.axis == "radial"]
    return ConsistencyResult(
        axial=_axis_stats(axial_rows),
        radial=_axis_stats(radial_rows),
        rows=tuple(rows),
    )


CONSISTENCY_CSV_HEADER = ("axis", "r_target_um", "r_um", "f_rendered_pN", "f_model_pN")


def write_consistency_csv(result: ConsistencyResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CONSISTENCY_CSV_HEADER)
        for r in result.rows:
            w.writerow([r.axis, repr(r.r_target), repr(r.r), repr(r.f_rendered), repr(r.f_model)])


def read_consistency_csv(path) -> list[ConsistencyRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CONSISTENCY_CSV_HEADER:
            raise StudyError(f"bad consistency CSV header {header!r}")
        return [
            ConsistencyRow(
                axis=r[0],
                r_target=float(r[1]),
                r=float(r[2]),
                f_rendered=float(r[3]),
                f_model=float(r[4]),
            )
            for r in reader
        ]


# ---------------------------------------------------------------------------
# delivery study


def corridor_scenario_doc(seed: int = 0) -> dict:
    """Push-a-cell-through-a-constriction course used by the delivery study.

    A 6 µm corridor along x narrows in two stages: a funnel (3.4 µm gap,
    x ∈ [-3.5, -1]) that centres the payload, then a tight slot (2.7 µm,
    x ∈ [-1, 1]) the 3 µm cell can only clear by elastic compression.
    Clearing the slot takes a sustained press, so how hard the operator
    pushes shows up directly in the contact-force record.  Without the
    funnel a thermal kick during approach can wedge the cell against the
    slot's edge, where the pushing robot slips past and strands it.
    """
    return {
        "schema_version": 1,
        "name": "delivery-corridor",
        "seed": seed,
        "timeout_s": 45.0,
        "robot": {"elements": [{"offset": [0, 0, 0], "radius": 1.5, "trap": 0}]},
        "start": [-8.0, 0.0, 0.0],
        "traps": [{"position": [-8.0, 0.0, 0.0], "device": "right"}],
        "force": {
            "params": {"K": 5.0, "delta": 1.0, "A": 2.0, "C": 3.0, "r_max": 8.0}
        },
        "cells": [{"position": [-5.0, 0.0, 0.0]}],
        "goal": {"center": [7.0, 0.0, 0.0], "radius": 2.0},
        "obstacles": [
            {"type": "plane", "normal": [0, -1, 0], "offset": -3.0},
            {"type": "plane", "normal": [0, 1, 0], "offset": -3.0},
            {"type": "plane", "normal": [0, 0, -1], "offset": -2.5},
            {"type": "plane", "normal": [0, 0, 1], "offset": -2.5},
            {"type": "box", "min": [-1.0, 1.35, -2.5], "max": [1.0, 3.0, 2.5]},
            {"type": "box", "min": [-1.0, -3.0, -2.5], "max": [1.0, -1.35, 2.5]},
            {"type": "box", "min": [-3.5, 1.7, -2.5], "max": [-1.0, 3.0, 2.5]},
            {"type": "box", "min": [-3.5, -3.0, -2.5], "max": [-1.0, -1.7, 2.5]},
        ],
        "workspace": {"min": [-20, -20, -20], "max": [20, 20, 20]},
    }


DELIVERY_WAYPOINTS = ((-2.0, 0.0, 0.0), (4.0, 0.0, 0.0), (10.0, 0.0, 0.0))


def default_delivery_policies(
    nominal_speed: float = 8.0, slowdown_gain: float = 5.0
) -> tuple[OperatorPolicy, OperatorPolicy]:
    blind = OperatorPolicy(
        kind="force_blind", nominal_speed=nominal_speed, waypoints=DELIVERY_WAYPOINTS
    )
    aware = OperatorPolicy(
        kind="force_aware",
        nominal_speed=nominal_speed,
        slowdown_gain=slowdown_gain,
        waypoints=DELIVERY_WAYPOINTS,
    )
    return blind, aware


@dataclass(frozen=True)
class TrialRow:
    condition: str
    trial: int
    seed: int
    reason: str
    success: bool
    duration_s: float
    contact_mean: float
    contact_max: float


@dataclass(frozen=True)
class DeliveryResult:
    blind: TrialSummary
    aware: TrialSummary
    comparison: SummaryComparison  # reductions blind → aware
    trial_rows: tuple[TrialRow, ...]
    blind_logs: tuple[TrialLog, ...]
    aware_logs: tuple[TrialLog, ...]


def _run_condition(
    scenario: Scenario, policy: OperatorPolicy, trials: int, base_seed: int
) -> list[TrialLog]:
    trap_index = next(
        i for i, d in enumerate(scenario.trap_devices) if d == policy.device
    )
    logs = []
    for k in range(trials):
        source = PolicySource(
            policy=policy,
            g_control=scenario.teleop.g_control,
            trap_index=trap_index,
        )
        logs.append(run_session(scenario, source, seed=base_seed + k))
    return logs


def run_delivery_study(
    scenario: Scenario,
    blind: OperatorPolicy,
    aware: OperatorPolicy,
    *,
    trials_per_condition: int = 10,
    base_seed: int = 1000,
) -> DeliveryResult:
    """Paired-seed comparison: trial k of both conditions uses seed
    base_seed + k, so the Brownian streams are identical across conditions."""
    if trials_per_condition < 2:
        raise StudyError("trials_per_condition must be >= 2")
    if blind.kind != "force_blind" or aware.kind != "force_aware":
        raise StudyError("pass one force_blind and one force_aware policy")
    if blind.device not in scenario.devices or aware.device not in scenario.devices:
        raise StudyError("policy device has no tagged trap in the scenario")

    blind_logs = _run_condition(scenario, blind, trials_per_condition, base_seed)
    aware_logs = _run_condition(scenario, aware, trials_per_condition, base_seed)

    rows = []
    for name, logs in (("force_blind", blind_logs), ("force_aware", aware_logs)):
        for k, log in enumerate(logs):
            contacts = [r["contact_force"] for r in log.records]
            rows.append(
                TrialRow(
                    condition=name,
                    trial=k,
                    seed=base_seed + k,
                    reason=log.outcome["reason"],
                    success=log.success,
                    duration_s=log.outcome["duration_s"],
                    contact_mean=sum(contacts) / len(contacts),
                    contact_max=max(contacts),
                )
            )

    blind_summary = summarize(blind_logs)
    aware_summary = summarize(aware_logs)
    return DeliveryResult(
        blind=blind_summary,
        aware=aware_summary,
        comparison=compare(blind_summary, aware_summary),
        trial_rows=tuple(rows),
        blind_logs=tuple(blind_logs),
        aware_logs=tuple(aware_logs),
    )


TRIALS_CSV_HEADER = (
    "condition",
    "trial",
    "seed",
    "reason",
    "success",
    "duration_s",
    "contact_mean_pN",
    "contact_max_pN",
)


def write_trials_csv(rows: Sequence[TrialRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRIALS_CSV_HEADER)
        for r in rows:
            w.writerow(
                [
                    r.condition,
                    r.trial,
                    r.seed,
                    r.reason,
                    int(r.success),
                    repr(r.duration_s),
                    repr(r.contact_mean),
                    repr(r.contact_max),
                ]
            )


def delivery_summary_dict(result: DeliveryResult) -> dict:
    def summary(s: TrialSummary) -> dict:
        return {
            "n_trials": s.n_trials,
            "n_records": s.n_records,
            "success_rate": s.success_rate,
            "contact_mean": s.contact_mean,
            "contact_sd": s.contact_sd,
            "distance_mean": s.distance_mean,
            "distance_sd": s.distance_sd,
        }

    c = result.comparison
    return {
        "force_blind": summary(result.blind),
        "force_aware": summary(result.aware),
        "reductions_blind_to_aware": {
            "contact_mean": c.contact_mean_reduction,
            "contact_sd": c.contact_sd_reduction,
            "distance_mean": c.distance_mean_reduction,
            "distance_sd": c.distance_sd_reduction,
        },
    }


def load_corridor_scenario(seed: int = 0) -> Scenario:
    return load_scenario(corridor_scenario_doc(seed=seed))

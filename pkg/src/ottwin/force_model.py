"""Piecewise optical trap force surrogate and multi-sphere wrench assembly.

A trap pulls a trapped sphere toward the beam focus. Near the focus the
restoring force is linear in displacement (stiffness ``K``); past a breakpoint
``delta`` it rolls off as ``C + A/r²``; beyond ``cutoff_r_max`` the sphere has
escaped and feels nothing. The two branches are tied together by a continuity
constraint at ``delta``.

A robot is a rigid assembly of spherical trapping elements, each optionally
driven by one trap. Its optical wrench is the plain vector sum of per-element
forces and their moments about the center of mass.

Units: µm for displacement, pN for force, pN·µm for torque.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

from .geom import Quat, Vec3, q_rotate, v_finite

CONTINUITY_RTOL = 1e-9


class ParameterError(ValueError):
    """Force-model parameters violate their invariants."""


class FitError(ValueError):
    """Sample set cannot support a piecewise fit."""


@dataclass(frozen=True)
class OpticalForceParams:
    """Coefficients of the piecewise trap-force law.

    stiffness_K: pN/µm    near-field linear stiffness
    delta: µm             breakpoint between near and far branches
    far_A: pN·µm²         inverse-square coefficient of the far branch
    far_C: pN             constant offset of the far branch
    cutoff_r_max: µm      capture range; zero force at or beyond it
    """

    stiffness_K: float
    delta: float
    far_A: float
    far_C: float
    cutoff_r_max: float

    def __post_init__(self):
        for name in ("stiffness_K", "delta", "far_A", "far_C", "cutoff_r_max"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")
        if self.stiffness_K <= 0:
            raise ParameterError(f"stiffness_K must be > 0, got {self.stiffness_K}")
        if self.delta <= 0:
            raise ParameterError(f"delta must be > 0, got {self.delta}")
        if self.cutoff_r_max <= self.delta:
            raise ParameterError(
                f"cutoff_r_max ({self.cutoff_r_max}) must exceed delta ({self.delta})"
            )
        junction = self.stiffness_K * self.delta
        mismatch = abs(self.far_C + self.far_A / self.delta**2 - junction)
        if mismatch > CONTINUITY_RTOL * junction:
            raise ParameterError(
                f"branches discontinuous at delta: |C + A/delta^2 - K*delta| = "
                f"{mismatch:.3e} exceeds {CONTINUITY_RTOL:g} * K*delta"
            )


@dataclass(frozen=True)
class Trap:
    """One optical trap: focus position and relative beam power."""

    position: Vec3
    power_weight: float = 1.0

    def __post_init__(self):
        if not v_finite(self.position):
            raise ParameterError(f"trap position must be finite, got {self.position}")
        if not math.isfinite(self.power_weight) or self.power_weight < 0:
            raise ParameterError(
                f"power_weight must be finite and >= 0, got {self.power_weight}"
            )


@dataclass(frozen=True)
class SphereElement:
    """Spherical trapping element of a rigid assembly (body-frame center)."""

    offset_body: Vec3
    radius: float
    assigned_trap: int | None = None

    def __post_init__(self):
        if not v_finite(self.offset_body):
            raise ParameterError(f"element offset must be finite, got {self.offset_body}")
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ParameterError(f"element radius must be > 0, got {self.radius}")


@dataclass(frozen=True)
class ForceSample:
    """One measured (displacement, force magnitude) pair."""

    displacement_r: float
    force_magnitude: float

    def __post_init__(self):
        if not (math.isfinite(self.displacement_r) and self.displacement_r >= 0):
            raise ParameterError(
                f"displacement_r must be >= 0, got {self.displacement_r}"
            )
        if not math.isfinite(self.force_magnitude):
            raise ParameterError("force_magnitude must be finite")


@dataclass(frozen=True)
class GaussianBeamProfile:
    """Analytic stand-in for a measured trap-force curve."""

    f_max: float
    beam_waist_w: float

    def __post_init__(self):
        if not (math.isfinite(self.f_max) and self.f_max > 0):
            raise ParameterError(f"f_max must be > 0, got {self.f_max}")
        if not (math.isfinite(self.beam_waist_w) and self.beam_waist_w > 0):
            raise ParameterError(f"beam_waist_w must be > 0, got {self.beam_waist_w}")


@dataclass(frozen=True)
class WrenchResult:
    net_force: Vec3
    net_torque: Vec3
    per_element: list[Vec3] = field(repr=False)


def force_magnitude(params: OpticalForceParams, r: float) -> float:
    """Unweighted force magnitude at displacement ``r`` (µm), clamped >= 0."""
    if r < params.delta:
        return params.stiffness_K * r
    if r < params.cutoff_r_max:
        mag = params.far_C + params.far_A / (r * r)
        return mag if mag > 0.0 else 0.0
    return 0.0


def eval_trap_force(params: OpticalForceParams, trap: Trap, point: Vec3) -> Vec3:
    """Force (pN) on a sphere centered at ``point``, pulling it toward the trap."""
    dx = trap.position[0] - point[0]
    dy = trap.position[1] - point[1]
    dz = trap.position[2] - point[2]
    r = math.sqrt(dx * dx + dy * dy + dz * dz)
    if r == 0.0:
        return (0.0, 0.0, 0.0)
    s = trap.power_weight * force_magnitude(params, r) / r
    return (s * dx, s * dy, s * dz)


def sample_reference_force(
    profile: GaussianBeamProfile, displacements: list[float]
) -> list[ForceSample]:
    """Evaluate the analytic reference curve F(r) = F_max (r/w) exp(1/2 - r²/2w²)."""
    w = profile.beam_waist_w
    out = []
    for r in displacements:
        f = profile.f_max * (r / w) * math.exp(0.5 - r * r / (2.0 * w * w))
        out.append(ForceSample(displacement_r=r, force_magnitude=f))
    return out


MIN_FIT_SAMPLES = 8
_MIN_BRANCH_POINTS = 2


def fit_piecewise(
    samples: list[ForceSample], cutoff_override: float | None = None
) -> OpticalForceParams:
    """Least-squares fit of the piecewise law to magnitude samples.

    The breakpoint is chosen by scanning every sampled displacement as a
    candidate delta: stiffness K comes from a one-parameter fit through the
    origin on points below the candidate, then (A, C) from a one-parameter
    fit above it with C eliminated by the continuity constraint. The
    candidate with the smallest total squared residual wins. cutoff_r_max
    defaults to the largest sampled displacement.
    """
    if len(samples) < MIN_FIT_SAMPLES:
        raise FitError(
            f"too few samples: need at least {MIN_FIT_SAMPLES}, got {len(samples)}"
        )
    pairs = sorted((s.displacement_r, s.force_magnitude) for s in samples)
    rs = [p[0] for p in pairs]
    fs = [p[1] for p in pairs]
    if len(set(rs)) != len(rs):
        raise FitError("degenerate samples: displacements must be distinct")

    best: tuple[float, float, float, float, float] | None = None
    rank_deficient_only = True
    for d in rs:
        if d <= 0:
            continue
        split = 0
        while split < len(rs) and rs[split] < d:
            split += 1
        if split < _MIN_BRANCH_POINTS or len(rs) - split < _MIN_BRANCH_POINTS:
            continue
        # near branch: F = K r through the origin
        srr = sum(r * r for r in rs[:split])
        srf = sum(r * f for r, f in zip(rs[:split], fs[:split]))
        if srr <= 0.0:
            continue
        k = srf / srr
        if k <= 0.0:
            rank_deficient_only = False
            continue
        # far branch: F = C + A/r² with C = K d - A/d²  =>  F - K d = A (1/r² - 1/d²)
        inv_d2 = 1.0 / (d * d)
        gs = [1.0 / (r * r) - inv_d2 for r in rs[split:]]
        gg = sum(g * g for g in gs)
        if gg < 1e-30:
            continue
        rank_deficient_only = False
        a = sum(g * (f - k * d) for g, f in zip(gs, fs[split:])) / gg
        c = k * d - a * inv_d2
        sse = sum((f - k * r) ** 2 for r, f in zip(rs[:split], fs[:split]))
        for r, f in zip(rs[split:], fs[split:]):
            pred = c + a / (r * r)
            if pred < 0.0:
                pred = 0.0
            sse += (f - pred) ** 2
        if best is None or sse < best[0]:
            best = (sse, k, d, a, c)

    if best is None:
        if rank_deficient_only:
            raise FitError(
                "rank-deficient far-field fit: far displacements carry no "
                "1/r^2 contrast at any candidate breakpoint"
            )
        raise FitError(
            "degenerate samples: no candidate breakpoint leaves enough points "
            "on both sides with a positive near-field slope"
        )
    _, k, d, a, c = best
    cutoff = cutoff_override if cutoff_override is not None else rs[-1]
    if cutoff <= d:
        raise FitError(
            f"cutoff {cutoff} does not exceed fitted breakpoint {d}; "
            "extend the sample range or override the cutoff"
        )
    return OpticalForceParams(
        stiffness_K=k, delta=d, far_A=a, far_C=c, cutoff_r_max=cutoff
    )


def msdm_wrench(
    params: OpticalForceParams,
    traps: list[Trap],
    pose,
    elements: list[SphereElement],
) -> WrenchResult:
    """Net optical wrench on a rigid sphere assembly.

    ``pose`` needs ``position: Vec3`` and ``orientation: Quat`` attributes.
    Per-element forces come from each element's assigned trap; unassigned
    elements contribute nothing. Torque is taken about the pose position.
    """
    pos: Vec3 = pose.position
    q: Quat = pose.orientation
    fx = fy = fz = 0.0
    tx = ty = tz = 0.0
    per: list[Vec3] = []
    for i, el in enumerate(elements):
        if el.assigned_trap is None:
            per.append((0.0, 0.0, 0.0))
            continue
        if not (0 <= el.assigned_trap < len(traps)):
            raise IndexError(
                f"element {i} assigned trap {el.assigned_trap} is out of range "
                f"for {len(traps)} trap(s)"
            )
        ox, oy, oz = q_rotate(q, el.offset_body)
        center = (pos[0] + ox, pos[1] + oy, pos[2] + oz)
        f = eval_trap_force(params, traps[el.assigned_trap], center)
        per.append(f)
        fx += f[0]
        fy += f[1]
        fz += f[2]
        tx += oy * f[2] - oz * f[1]
        ty += oz * f[0] - ox * f[2]
        tz += ox * f[1] - oy * f[0]
    return WrenchResult(net_force=(fx, fy, fz), net_torque=(tx, ty, tz), per_element=per)


# ---------------------------------------------------------------------------
# serialization

CSV_HEADER = ("r_um", "force_pN")


def write_force_samples(samples: list[ForceSample], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for s in samples:
            writer.writerow([repr(float(s.displacement_r)), repr(float(s.force_magnitude))])


def read_force_samples(path: str) -> list[ForceSample]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != list(CSV_HEADER):
            raise ValueError(
                f"bad sample CSV header {header!r}; expected {','.join(CSV_HEADER)}"
            )
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"line {lineno}: expected 2 columns, got {len(row)}")
            out.append(
                ForceSample(displacement_r=float(row[0]), force_magnitude=float(row[1]))
            )
    return out


def params_to_dict(params: OpticalForceParams) -> dict:
    return {
        "K": params.stiffness_K,
        "delta": params.delta,
        "A": params.far_A,
        "C": params.far_C,
        "r_max": params.cutoff_r_max,
    }


def params_from_dict(obj: dict) -> OpticalForceParams:
    missing = {"K", "delta", "A", "C", "r_max"} - set(obj)
    if missing:
        raise ParameterError(f"params object missing keys: {sorted(missing)}")
    return OpticalForceParams(
        stiffness_K=float(obj["K"]),
        delta=float(obj["delta"]),
        far_A=float(obj["A"]),
        far_C=float(obj["C"]),
        cutoff_r_max=float(obj["r_max"]),
    )


def write_params(params: OpticalForceParams, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(params_to_dict(params), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_params(path: str) -> OpticalForceParams:
    with open(path) as fh:
        return params_from_dict(json.load(fh))

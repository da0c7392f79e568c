"""Scenario documents: schema, validation, and compilation to runtime objects.

A scenario is a JSON document (``schema_version: 1``) describing one trial
setup: medium, robot geometry, traps with device tags, the force law (inline
params or reference samples to fit), cells, obstacles, start/goal, workspace
bounds, and teleoperation settings. ``load_scenario`` validates the document,
resolves the force parameters, and returns a compiled :class:`Scenario` whose
``config_hash`` covers the normalized document plus the resolved parameters —
two documents that resolve identically but declare the force law differently
(inline vs. fitted from samples) hash differently on purpose.
"""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from .dynamics import (
    MAX_DT,
    BoxObstacle,
    Cell,
    Medium,
    PlaneObstacle,
    RigidState,
    World,
    drag_coefficients,
)
from .force_model import (
    FitError,
    ForceSample,
    OpticalForceParams,
    ParameterError,
    SphereElement,
    Trap,
    fit_piecewise,
    read_force_samples,
)
from .geom import IDENTITY_QUAT, Vec3, v_norm
from .rng import SimRng
from .serialize import config_hash
from .teleop import DEVICES, ResolvedTeleop, TeleopConfig, TeleopConfigError, Workspace

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Raised for unparseable or invalid scenario documents."""


# --- document models -------------------------------------------------------


class MediumDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    viscosity_eta: float = Field(default=1e-3, gt=0.0)
    temperature_T: float = Field(default=300.0, ge=0.0)


class ElementDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    offset: tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = Field(gt=0.0)
    trap: Optional[int] = Field(default=None, ge=0)


class RobotDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    elements: list[ElementDoc] = Field(min_length=1)
    orientation: tuple[float, float, float, float] = IDENTITY_QUAT
    axis_body: tuple[float, float, float] = (1.0, 0.0, 0.0)

    @field_validator("orientation")
    @classmethod
    def _unit_quat(cls, q):
        n = math.sqrt(sum(c * c for c in q))
        if abs(n - 1.0) > 1e-6:
            raise ValueError("orientation must be a unit quaternion")
        return q

    @field_validator("axis_body")
    @classmethod
    def _nonzero_axis(cls, a):
        if v_norm(a) <= 0.0:
            raise ValueError("axis_body must be nonzero")
        return a


class TrapDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    position: tuple[float, float, float]
    power_weight: float = Field(default=1.0, gt=0.0)
    device: Optional[Literal["left", "right"]] = None


class ForceParamsDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    K: float
    delta: float
    A: float
    C: float
    r_max: float


class ForceDoc(BaseModel):
    """Exactly one source: inline params, inline samples, or a CSV path."""

    model_config = ConfigDict(extra="forbid")

    params: Optional[ForceParamsDoc] = None
    samples: Optional[list[tuple[float, float]]] = None
    samples_csv: Optional[str] = None
    cutoff_r_max: Optional[float] = Field(default=None, gt=0.0)

    @model_validator(mode="after")
    def _one_source(self):
        given = [
            name
            for name, value in (
                ("params", self.params),
                ("samples", self.samples),
                ("samples_csv", self.samples_csv),
            )
            if value is not None
        ]
        if len(given) != 1:
            raise ValueError(
                "force requires exactly one of params, samples, samples_csv"
            )
        if self.params is not None and self.cutoff_r_max is not None:
            raise ValueError("cutoff_r_max only applies when fitting samples")
        return self


class CellDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    position: tuple[float, float, float]
    radius: float = Field(default=1.5, gt=0.0)
    stiffness: float = Field(default=10.0, gt=0.0)
    damping: Optional[float] = Field(default=None, ge=0.0)


class BoxDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    type: Literal["box"]
    min: tuple[float, float, float]
    max: tuple[float, float, float]
    stiffness: float = Field(default=100.0, gt=0.0)

    @model_validator(mode="after")
    def _ordered(self):
        if not all(lo < hi for lo, hi in zip(self.min, self.max)):
            raise ValueError("box min must be strictly below max on every axis")
        return self


class PlaneDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    type: Literal["plane"]
    normal: tuple[float, float, float]
    offset: float = 0.0
    stiffness: float = Field(default=100.0, gt=0.0)

    @field_validator("normal")
    @classmethod
    def _unit_normal(cls, n):
        if abs(v_norm(n) - 1.0) > 1e-6:
            raise ValueError("normal must be a unit vector")
        return n


ObstacleDoc = Annotated[Union[BoxDoc, PlaneDoc], Field(discriminator="type")]


class GoalDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    center: tuple[float, float, float]
    radius: float = Field(gt=0.0)


class WorkspaceDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    min: tuple[float, float, float] = (-50.0, -50.0, -50.0)
    max: tuple[float, float, float] = (50.0, 50.0, 50.0)

    @model_validator(mode="after")
    def _ordered(self):
        if not all(lo < hi for lo, hi in zip(self.min, self.max)):
            raise ValueError("workspace min must be strictly below max on every axis")
        return self


class TeleopDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alpha_m: float = Field(default=0.05, gt=0.0, le=1.0)
    alpha_f: float = Field(default=0.05, gt=0.0, le=1.0)
    g_control: float = Field(default=50.0, gt=0.0)
    g_hand: float = 0.0026
    g_hand_override: bool = False
    damping_B: Optional[float] = Field(default=None, ge=0.0)
    f_warn: float = Field(default=8.0, gt=0.0)
    d_loss: Optional[float] = Field(default=None, gt=0.0)


class ScenarioDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: int
    name: str = Field(min_length=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    dt: float = Field(default=1e-3)
    timeout_s: float = Field(default=120.0, gt=0.0)
    medium: MediumDoc = MediumDoc()
    robot: RobotDoc
    start: tuple[float, float, float] = (0.0, 0.0, 0.0)
    traps: list[TrapDoc] = Field(min_length=1)
    force: ForceDoc
    cells: list[CellDoc] = []
    payload_cell: Optional[int] = Field(default=None, ge=0)
    obstacles: list[ObstacleDoc] = []
    goal: Optional[GoalDoc] = None
    workspace: WorkspaceDoc = WorkspaceDoc()
    teleop: TeleopDoc = TeleopDoc()

    @field_validator("schema_version")
    @classmethod
    def _version(cls, v):
        if v != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema version {v} (expected {SCHEMA_VERSION})")
        return v

    @field_validator("dt")
    @classmethod
    def _tickable(cls, dt):
        if not (0.0 < dt <= MAX_DT):
            raise ValueError(f"dt must lie in (0, {MAX_DT}]")
        pps = round(1.0 / dt)
        if pps < 60 or abs(pps * dt - 1.0) > 1e-9:
            raise ValueError("dt must divide one second into an integer tick count")
        return dt

    @model_validator(mode="after")
    def _cross_checks(self):
        n_traps = len(self.traps)
        for i, el in enumerate(self.robot.elements):
            if el.trap is not None and el.trap >= n_traps:
                raise ValueError(
                    f"robot.elements[{i}].trap {el.trap} out of range for {n_traps} traps"
                )
        if self.payload_cell is not None:
            if not self.cells:
                raise ValueError("payload_cell given but scenario has no cells")
            if self.payload_cell >= len(self.cells):
                raise ValueError(
                    f"payload_cell {self.payload_cell} out of range for {len(self.cells)} cells"
                )
        return self


# --- compiled scenario -----------------------------------------------------


@dataclasses.dataclass(frozen=True)
class Scenario:
    """A validated document compiled to runtime objects, plus its hash."""

    name: str
    seed: int
    dt: float
    timeout_s: float
    medium: Medium
    elements: tuple[SphereElement, ...]
    initial_state: RigidState
    axis_body: Vec3
    traps: tuple[Trap, ...]
    trap_devices: tuple[Optional[str], ...]
    params: OpticalForceParams
    cells: tuple[Cell, ...]
    obstacles: tuple
    payload_cell: Optional[int]
    goal_center: Optional[Vec3]
    goal_radius: Optional[float]
    workspace: Workspace
    teleop_config: TeleopConfig
    teleop: ResolvedTeleop
    config_hash: str
    document: dict

    @property
    def ticks_per_second(self) -> int:
        return round(1.0 / self.dt)

    @property
    def devices(self) -> tuple[str, ...]:
        """Devices that actually drive at least one trap, in canonical order."""
        present = {d for d in self.trap_devices if d is not None}
        return tuple(d for d in DEVICES if d in present)

    def build_world(self, seed: Optional[int] = None) -> World:
        return World(
            elements=list(self.elements),
            state=self.initial_state,
            medium=self.medium,
            params=self.params,
            traps=[dataclasses.replace(t) for t in self.traps],
            cells=list(self.cells),
            obstacles=list(self.obstacles),
            rng=SimRng(self.seed if seed is None else seed),
        )


def _resolve_params(doc: ScenarioDoc, base_dir: Path) -> OpticalForceParams:
    force = doc.force
    if force.params is not None:
        p = force.params
        return OpticalForceParams(
            stiffness_K=p.K, delta=p.delta, far_A=p.A, far_C=p.C, cutoff_r_max=p.r_max
        )
    if force.samples is not None:
        samples = [ForceSample(displacement_r=r, force_magnitude=f) for r, f in force.samples]
    else:
        csv_path = Path(force.samples_csv)
        if not csv_path.is_absolute():
            csv_path = base_dir / csv_path
        if not csv_path.exists():
            raise ScenarioError(f"force.samples_csv: file not found: {csv_path}")
        samples = read_force_samples(csv_path)
    return fit_piecewise(samples, cutoff_override=force.cutoff_r_max)


def _format_validation_error(err: ValidationError) -> str:
    parts = []
    for item in err.errors():
        loc = ".".join(str(p) for p in item["loc"] if p != "__root__")
        parts.append(f"{loc}: {item['msg']}" if loc else item["msg"])
    return "; ".join(parts)


def load_scenario(source: Union[str, Path, dict]) -> Scenario:
    """Parse, validate, and compile a scenario document.

    ``source`` may be a path to a JSON file or an already-parsed dict. Raises
    :class:`ScenarioError` naming the offending field on any problem.
    """
    base_dir = Path.cwd()
    if isinstance(source, (str, Path)):
        path = Path(source)
        base_dir = path.parent
        try:
            raw = path.read_text()
        except OSError as e:
            raise ScenarioError(f"cannot read scenario file: {e}") from e
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as e:
            raise ScenarioError(
                f"invalid JSON at line {e.lineno} column {e.colno}: {e.msg}"
            ) from e
    else:
        data = source
    if not isinstance(data, dict):
        raise ScenarioError("scenario document must be a JSON object")

    try:
        doc = ScenarioDoc.model_validate(data)
    except ValidationError as e:
        raise ScenarioError(_format_validation_error(e)) from e

    try:
        params = _resolve_params(doc, base_dir)
    except (ParameterError, FitError) as e:
        raise ScenarioError(f"force: {e}") from e

    medium = Medium(viscosity_eta=doc.medium.viscosity_eta, temperature_T=doc.medium.temperature_T)
    elements = tuple(
        SphereElement(offset_body=el.offset, radius=el.radius, assigned_trap=el.trap)
        for el in doc.robot.elements
    )
    traps = tuple(Trap(position=t.position, power_weight=t.power_weight) for t in doc.traps)
    trap_devices = tuple(t.device for t in doc.traps)
    cells = tuple(
        Cell(
            position=c.position,
            radius=c.radius,
            stiffness_k_cell=c.stiffness,
            contact_damping=c.damping,
        )
        for c in doc.cells
    )
    obstacles = tuple(
        BoxObstacle(min_corner=o.min, max_corner=o.max, stiffness=o.stiffness)
        if isinstance(o, BoxDoc)
        else PlaneObstacle(normal=o.normal, offset=o.offset, stiffness=o.stiffness)
        for o in doc.obstacles
    )

    payload = doc.payload_cell
    if payload is None and cells:
        payload = 0

    t = doc.teleop
    teleop_config = TeleopConfig(
        alpha_m=t.alpha_m,
        alpha_f=t.alpha_f,
        g_control=t.g_control,
        g_hand=t.g_hand,
        g_hand_override=t.g_hand_override,
        damping_B=t.damping_B,
        f_warn=t.f_warn,
        d_loss=t.d_loss,
    )
    gamma = drag_coefficients(elements, medium)
    try:
        resolved = teleop_config.resolve(params, gamma.gamma_t)
    except TeleopConfigError as e:
        raise ScenarioError(f"teleop: {e}") from e

    workspace = Workspace(min_corner=doc.workspace.min, max_corner=doc.workspace.max)

    normalized = doc.model_dump(mode="json")
    digest = config_hash(
        {
            "document": normalized,
            "resolved_params": {
                "K": params.stiffness_K,
                "delta": params.delta,
                "A": params.far_A,
                "C": params.far_C,
                "r_max": params.cutoff_r_max,
            },
        }
    )

    return Scenario(
        name=doc.name,
        seed=doc.seed,
        dt=doc.dt,
        timeout_s=doc.timeout_s,
        medium=medium,
        elements=elements,
        initial_state=RigidState(position=doc.start, orientation=doc.robot.orientation),
        axis_body=doc.robot.axis_body,
        traps=traps,
        trap_devices=trap_devices,
        params=params,
        cells=cells,
        obstacles=obstacles,
        payload_cell=payload,
        goal_center=doc.goal.center if doc.goal else None,
        goal_radius=doc.goal.radius if doc.goal else None,
        workspace=workspace,
        teleop_config=teleop_config,
        teleop=resolved,
        config_hash=digest,
        document=normalized,
    )

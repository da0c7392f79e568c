"""Overdamped Brownian rigid-body dynamics with penalty contacts.

At the micrometre scale inertia is irrelevant: velocity is force over drag,
so the state is pose only and each tick applies

    dx  = (F_optical + F_contact) / gamma_t * dt + Brownian kick
    dth = (tau_optical + tau_contact) / gamma_r * dt + rotational kick

with kick standard deviation sqrt(2 D dt), D = kB T / gamma (fluctuation-
dissipation). The quaternion is updated by the exponential map and
renormalized every step. Gravity and buoyancy are omitted.

Contacts are penalty springs: normal force k*p + c*(approach speed),
clamped to be non-adhesive. Inside ``World.step`` the pair stiffness is
additionally clamped to ``0.9 * gamma_reduced / dt`` — an explicit integrator
diverges when k dt exceeds the drag (the stiff obstacle default does), and a
slightly softer wall is the honest price of a stable explicit step. The pure
``contact_forces`` operation applies the configured stiffness exactly.

Units: µm, s, pN; viscosity in pN·s/µm² (water = 1e-3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .force_model import OpticalForceParams, SphereElement, Trap, eval_trap_force
from .geom import (
    IDENTITY_QUAT,
    Quat,
    Vec3,
    q_from_rotvec,
    q_mul,
    q_normalize,
    q_rotate,
    v_finite,
    v_norm,
)
from .rng import SimRng

# kB in pN·µm/K: 1.380649e-23 J/K * 1e18 (pN·µm per J)
KB_PN_UM_PER_K = 1.380649e-5

# fraction of the explicit-stability stiffness bound used by World.step
STABILITY_BETA = 0.9

# default pair damping as a fraction of the reduced drag
DEFAULT_DAMPING_FRACTION = 0.1

MAX_DT = 0.002


class SimulationUnstableError(RuntimeError):
    """A single tick moved a body further than the blowup threshold."""


@dataclass(frozen=True)
class Medium:
    """Fluid environment. temperature_T = 0 is the documented noise-free limit."""

    viscosity_eta: float = 1e-3
    temperature_T: float = 300.0

    def __post_init__(self):
        if not (math.isfinite(self.viscosity_eta) and self.viscosity_eta > 0):
            raise ValueError(f"viscosity_eta must be > 0, got {self.viscosity_eta}")
        if not (math.isfinite(self.temperature_T) and self.temperature_T >= 0):
            raise ValueError(f"temperature_T must be >= 0, got {self.temperature_T}")

    @property
    def thermal_energy(self) -> float:
        """kB·T in pN·µm (4.1419e-3 at 300 K)."""
        return KB_PN_UM_PER_K * self.temperature_T


@dataclass(frozen=True)
class RigidState:
    position: Vec3
    orientation: Quat = IDENTITY_QUAT

    def __post_init__(self):
        if not v_finite(self.position):
            raise ValueError(f"position must be finite, got {self.position}")
        n = math.sqrt(sum(c * c for c in self.orientation))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"orientation quaternion norm {n} deviates from 1")


@dataclass(frozen=True)
class Cell:
    """Passive spherical cell; position is its initial/current center."""

    position: Vec3
    radius: float
    stiffness_k_cell: float = 10.0
    contact_damping: float | None = None

    def __post_init__(self):
        if not v_finite(self.position):
            raise ValueError(f"cell position must be finite, got {self.position}")
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"cell radius must be > 0, got {self.radius}")
        if not (math.isfinite(self.stiffness_k_cell) and self.stiffness_k_cell >= 0):
            raise ValueError(
                f"cell stiffness must be >= 0, got {self.stiffness_k_cell}"
            )


@dataclass(frozen=True)
class BoxObstacle:
    """Axis-aligned solid box."""

    min_corner: Vec3
    max_corner: Vec3
    stiffness: float = 100.0

    def __post_init__(self):
        if not (v_finite(self.min_corner) and v_finite(self.max_corner)):
            raise ValueError("box corners must be finite")
        if not all(a < b for a, b in zip(self.min_corner, self.max_corner)):
            raise ValueError(
                f"box min {self.min_corner} must be < max {self.max_corner} "
                "componentwise"
            )
        if not (math.isfinite(self.stiffness) and self.stiffness >= 0):
            raise ValueError(f"box stiffness must be >= 0, got {self.stiffness}")


@dataclass(frozen=True)
class PlaneObstacle:
    """Solid half-space: points with normal·x <= offset are inside the wall."""

    normal: Vec3
    offset: float
    stiffness: float = 100.0

    def __post_init__(self):
        n = v_norm(self.normal)
        if abs(n - 1.0) > 1e-6:
            raise ValueError(f"plane normal must be unit length, |n| = {n}")
        if not math.isfinite(self.offset):
            raise ValueError("plane offset must be finite")
        if not (math.isfinite(self.stiffness) and self.stiffness >= 0):
            raise ValueError(f"plane stiffness must be >= 0, got {self.stiffness}")


Obstacle = BoxObstacle | PlaneObstacle


@dataclass(frozen=True)
class DragCoefficients:
    gamma_t: float  # pN·s/µm
    gamma_r: float  # pN·s·µm


def drag_coefficients(elements: list[SphereElement], medium: Medium) -> DragCoefficients:
    """Free-draining Stokes composition over the assembly's spheres.

    Translation adds 6 pi eta a per sphere; rotation adds each sphere's own
    spin drag 8 pi eta a^3 plus its translation-at-lever term
    6 pi eta a |offset|^2. Hydrodynamic coupling between spheres is ignored.
    """
    if not elements:
        raise ValueError("drag_coefficients requires a nonempty element list")
    eta = medium.viscosity_eta
    gt = 0.0
    gr = 0.0
    for el in elements:
        a = el.radius
        off2 = (
            el.offset_body[0] ** 2 + el.offset_body[1] ** 2 + el.offset_body[2] ** 2
        )
        gt += 6.0 * math.pi * eta * a
        gr += 8.0 * math.pi * eta * a**3 + 6.0 * math.pi * eta * a * off2
    return DragCoefficients(gamma_t=gt, gamma_r=gr)


def stokes_drag(radius: float, medium: Medium) -> float:
    return 6.0 * math.pi * medium.viscosity_eta * radius


def diffusion_coefficient(gamma: float, medium: Medium) -> float:
    """Stokes–Einstein: D = kB·T/gamma (µm²/s)."""
    return medium.thermal_energy / gamma


def brownian_kick(gamma: float, medium: Medium, dt: float, rng: SimRng) -> float:
    """One Gaussian displacement component with std sqrt(2 D dt).

    Advances the generator exactly one draw; exactly 0.0 at T = 0.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    scale = math.sqrt(2.0 * diffusion_coefficient(gamma, medium) * dt)
    return scale * rng.normal_scalar()


# ---------------------------------------------------------------------------
# contacts


@dataclass(frozen=True)
class StabilityLimit:
    """Per-pair stiffness clamp for the explicit step: k_eff <= beta*gamma/dt."""

    dt: float
    beta: float = STABILITY_BETA


@dataclass(frozen=True)
class ContactResult:
    on_robot_force: Vec3
    on_robot_torque: Vec3
    on_cells: list[Vec3] = field(repr=False)
    on_obstacles: list[Vec3] = field(repr=False)
    cell_force_magnitudes: list[float] = field(repr=False)
    max_cell_force: float = 0.0


def _pair_stiffness(k_a: float | None, k_b: float | None) -> float:
    """Series spring composition; None means rigid (infinite)."""
    if k_a is None:
        return k_b if k_b is not None else 0.0
    if k_b is None:
        return k_a
    if k_a + k_b == 0.0:
        return 0.0
    return k_a * k_b / (k_a + k_b)


def _reduced_drag(g_a: float | None, g_b: float | None) -> float:
    """Reduced drag of a pair; None marks a static partner."""
    if g_a is None:
        return g_b if g_b is not None else math.inf
    if g_b is None:
        return g_a
    return g_a * g_b / (g_a + g_b)


def contact_forces(
    elements_world: list[tuple[Vec3, float]],
    cells: list[Cell],
    obstacles: list[Obstacle],
    *,
    robot_com: Vec3 = (0.0, 0.0, 0.0),
    robot_velocity: Vec3 = (0.0, 0.0, 0.0),
    cell_velocities: list[Vec3] | None = None,
    robot_gamma: float | None = None,
    cell_gammas: list[float] | None = None,
    stability: StabilityLimit | None = None,
) -> ContactResult:
    """Penalty contact forces for every sphere–sphere and sphere–wall pair.

    ``elements_world`` holds the robot's spheres as (center, radius). With the
    default zero velocities and no stability limit this is a pure function of
    geometry: normal force = k·p exactly, clamped non-adhesive. ``World.step``
    passes velocity estimates, per-body drags, and a ``StabilityLimit``.

    Forces come in equal and opposite pairs, so the returned robot, cell, and
    obstacle entries always sum to zero.
    """
    n_cells = len(cells)
    if cell_velocities is None:
        cell_velocities = [(0.0, 0.0, 0.0)] * n_cells
    rfx = rfy = rfz = 0.0
    rtx = rty = rtz = 0.0
    cell_forces = [[0.0, 0.0, 0.0] for _ in range(n_cells)]
    obstacle_forces = [[0.0, 0.0, 0.0] for _ in range(len(obstacles))]

    def pair_force(
        nx: float,
        ny: float,
        nz: float,
        p: float,
        k_pair: float,
        damping: float,
        va: Vec3,
        vb: Vec3,
        gamma_pair: float,
    ) -> float:
        if stability is not None:
            bound = stability.beta * gamma_pair / stability.dt
            if k_pair > bound:
                k_pair = bound
        approach = (vb[0] - va[0]) * nx + (vb[1] - va[1]) * ny + (vb[2] - va[2]) * nz
        mag = k_pair * p + damping * approach
        return mag if mag > 0.0 else 0.0

    def sphere_sphere(ca, ra, cb, rb):
        dx, dy, dz = ca[0] - cb[0], ca[1] - cb[1], ca[2] - cb[2]
        dist = math.sqrt(dx * dx + dy * dy + dz * dz)
        p = (ra + rb) - dist
        if p <= 0.0 or dist == 0.0:
            return None
        return dx / dist, dy / dist, dz / dist, p

    def sphere_plane(c, r, plane: PlaneObstacle):
        n = plane.normal
        h = c[0] * n[0] + c[1] * n[1] + c[2] * n[2] - plane.offset
        p = r - h
        if p <= 0.0:
            return None
        return n[0], n[1], n[2], p

    def sphere_box(c, r, box: BoxObstacle):
        qx = min(max(c[0], box.min_corner[0]), box.max_corner[0])
        qy = min(max(c[1], box.min_corner[1]), box.max_corner[1])
        qz = min(max(c[2], box.min_corner[2]), box.max_corner[2])
        dx, dy, dz = c[0] - qx, c[1] - qy, c[2] - qz
        dist = math.sqrt(dx * dx + dy * dy + dz * dz)
        if dist > 0.0:
            p = r - dist
            if p <= 0.0:
                return None
            return dx / dist, dy / dist, dz / dist, p
        # center inside the box: push out through the nearest face
        best_p = math.inf
        best_n = (1.0, 0.0, 0.0)
        for axis in range(3):
            lo = c[axis] - box.min_corner[axis]
            hi = box.max_corner[axis] - c[axis]
            if lo < best_p:
                best_p = lo
                n = [0.0, 0.0, 0.0]
                n[axis] = -1.0
                best_n = tuple(n)
            if hi < best_p:
                best_p = hi
                n = [0.0, 0.0, 0.0]
                n[axis] = 1.0
                best_n = tuple(n)
        return best_n[0], best_n[1], best_n[2], r + best_p

    def default_damping(gamma_pair: float) -> float:
        # drag-derived default; pure-geometry calls carry no drag info
        if math.isinf(gamma_pair):
            return 0.0
        return DEFAULT_DAMPING_FRACTION * gamma_pair

    def cell_damping(cell: Cell, gamma_pair: float) -> float:
        if cell.contact_damping is not None:
            return cell.contact_damping
        return default_damping(gamma_pair)

    # robot elements vs cells and obstacles
    for ec, er in elements_world:
        for j, cell in enumerate(cells):
            hit = sphere_sphere(ec, er, cell.position, cell.radius)
            if hit is None:
                continue
            nx, ny, nz, p = hit
            gamma_pair = _reduced_drag(
                robot_gamma, cell_gammas[j] if cell_gammas else None
            )
            mag = pair_force(
                nx, ny, nz, p,
                _pair_stiffness(None, cell.stiffness_k_cell),
                cell_damping(cell, gamma_pair),
                robot_velocity, cell_velocities[j], gamma_pair,
            )
            fx, fy, fz = mag * nx, mag * ny, mag * nz
            rfx += fx; rfy += fy; rfz += fz
            ox, oy, oz = ec[0] - robot_com[0], ec[1] - robot_com[1], ec[2] - robot_com[2]
            rtx += oy * fz - oz * fy
            rty += oz * fx - ox * fz
            rtz += ox * fy - oy * fx
            cf = cell_forces[j]
            cf[0] -= fx; cf[1] -= fy; cf[2] -= fz
        for j, obs in enumerate(obstacles):
            hit = (
                sphere_plane(ec, er, obs)
                if isinstance(obs, PlaneObstacle)
                else sphere_box(ec, er, obs)
            )
            if hit is None:
                continue
            nx, ny, nz, p = hit
            gamma_pair = _reduced_drag(robot_gamma, None)
            mag = pair_force(
                nx, ny, nz, p,
                _pair_stiffness(None, obs.stiffness),
                default_damping(gamma_pair),
                robot_velocity, (0.0, 0.0, 0.0), gamma_pair,
            )
            fx, fy, fz = mag * nx, mag * ny, mag * nz
            rfx += fx; rfy += fy; rfz += fz
            ox, oy, oz = ec[0] - robot_com[0], ec[1] - robot_com[1], ec[2] - robot_com[2]
            rtx += oy * fz - oz * fy
            rty += oz * fx - ox * fz
            rtz += ox * fy - oy * fx
            of = obstacle_forces[j]
            of[0] -= fx; of[1] -= fy; of[2] -= fz

    # cell vs cell, cell vs obstacle
    for i, cell_a in enumerate(cells):
        for j in range(i + 1, n_cells):
            cell_b = cells[j]
            hit = sphere_sphere(cell_a.position, cell_a.radius, cell_b.position, cell_b.radius)
            if hit is None:
                continue
            nx, ny, nz, p = hit
            gamma_pair = _reduced_drag(
                cell_gammas[i] if cell_gammas else None,
                cell_gammas[j] if cell_gammas else None,
            )
            damping_a = cell_a.contact_damping
            damping_b = cell_b.contact_damping
            if damping_a is not None and damping_b is not None:
                damping = 0.5 * (damping_a + damping_b)
            elif damping_a is not None:
                damping = damping_a
            elif damping_b is not None:
                damping = damping_b
            else:
                damping = default_damping(gamma_pair)
            mag = pair_force(
                nx, ny, nz, p,
                _pair_stiffness(cell_a.stiffness_k_cell, cell_b.stiffness_k_cell),
                damping,
                cell_velocities[i], cell_velocities[j], gamma_pair,
            )
            fa = cell_forces[i]
            fb = cell_forces[j]
            fa[0] += mag * nx; fa[1] += mag * ny; fa[2] += mag * nz
            fb[0] -= mag * nx; fb[1] -= mag * ny; fb[2] -= mag * nz
        for j, obs in enumerate(obstacles):
            hit = (
                sphere_plane(cell_a.position, cell_a.radius, obs)
                if isinstance(obs, PlaneObstacle)
                else sphere_box(cell_a.position, cell_a.radius, obs)
            )
            if hit is None:
                continue
            nx, ny, nz, p = hit
            gamma_pair = _reduced_drag(cell_gammas[i] if cell_gammas else None, None)
            mag = pair_force(
                nx, ny, nz, p,
                _pair_stiffness(cell_a.stiffness_k_cell, obs.stiffness),
                cell_damping(cell_a, gamma_pair),
                cell_velocities[i], (0.0, 0.0, 0.0), gamma_pair,
            )
            fa = cell_forces[i]
            fa[0] += mag * nx; fa[1] += mag * ny; fa[2] += mag * nz
            of = obstacle_forces[j]
            of[0] -= mag * nx; of[1] -= mag * ny; of[2] -= mag * nz

    magnitudes = [math.sqrt(f[0] ** 2 + f[1] ** 2 + f[2] ** 2) for f in cell_forces]
    return ContactResult(
        on_robot_force=(rfx, rfy, rfz),
        on_robot_torque=(rtx, rty, rtz),
        on_cells=[tuple(f) for f in cell_forces],
        on_obstacles=[tuple(f) for f in obstacle_forces],
        cell_force_magnitudes=magnitudes,
        max_cell_force=max(magnitudes, default=0.0),
    )


# ---------------------------------------------------------------------------
# world


@dataclass(frozen=True)
class WorldSnapshot:
    tick: int
    time: float
    robot: RigidState
    trap_positions: tuple[Vec3, ...]
    cell_positions: tuple[Vec3, ...]
    contact_metric: float
    cell_contact_magnitudes: tuple[float, ...]


class World:
    """Single-owner mutable simulation state, advanced tick by tick.

    Exactly one context may call ``step``; ``snapshot()`` returns immutable
    values safe to share. The per-tick Gaussian batch has a fixed layout
    (robot translation 3, robot rotation 3, then 3 per cell in index order),
    which makes runs bit-replayable from the seed alone.
    """

    def __init__(
        self,
        *,
        elements: list[SphereElement],
        state: RigidState,
        medium: Medium,
        params: OpticalForceParams,
        traps: list[Trap],
        cells: list[Cell] | None = None,
        obstacles: list[Obstacle] | None = None,
        rng: SimRng,
    ):
        if not elements:
            raise ValueError("world requires at least one robot element")
        self.elements = list(elements)
        self.state = state
        self.medium = medium
        self.params = params
        self.traps = list(traps)
        self.cells = list(cells or [])
        self.obstacles = list(obstacles or [])
        self.rng = rng
        drag = drag_coefficients(self.elements, medium)
        self.gamma_t = drag.gamma_t
        self.gamma_r = drag.gamma_r
        self.cell_gammas = [stokes_drag(c.radius, medium) for c in self.cells]
        self._blowup_limit = 5.0 * max(el.radius for el in self.elements)
        self._robot_velocity: Vec3 = (0.0, 0.0, 0.0)
        self._cell_velocities: list[Vec3] = [(0.0, 0.0, 0.0)] * len(self.cells)
        self.tick = 0
        self.time = 0.0
        self.last_optical: list[Vec3] = [(0.0, 0.0, 0.0)] * len(self.elements)
        self.last_contact = ContactResult(
            on_robot_force=(0.0, 0.0, 0.0),
            on_robot_torque=(0.0, 0.0, 0.0),
            on_cells=[(0.0, 0.0, 0.0)] * len(self.cells),
            on_obstacles=[(0.0, 0.0, 0.0)] * len(self.obstacles),
            cell_force_magnitudes=[0.0] * len(self.cells),
            max_cell_force=0.0,
        )

    def element_centers(self) -> list[Vec3]:
        pos = self.state.position
        q = self.state.orientation
        out = []
        for el in self.elements:
            ox, oy, oz = q_rotate(q, el.offset_body)
            out.append((pos[0] + ox, pos[1] + oy, pos[2] + oz))
        return out

    def step(self, dt: float) -> None:
        if not (0.0 < dt <= MAX_DT):
            raise ValueError(f"dt must be in (0, {MAX_DT}] s, got {dt}")
        pos = self.state.position
        q = self.state.orientation

        centers = self.element_centers()
        fx = fy = fz = 0.0
        tx = ty = tz = 0.0
        per_element: list[Vec3] = []
        for el, c in zip(self.elements, centers):
            if el.assigned_trap is None:
                per_element.append((0.0, 0.0, 0.0))
                continue
            if not (0 <= el.assigned_trap < len(self.traps)):
                raise IndexError(
                    f"element assigned trap {el.assigned_trap} out of range"
                )
            f = eval_trap_force(self.params, self.traps[el.assigned_trap], c)
            per_element.append(f)
            fx += f[0]; fy += f[1]; fz += f[2]
            ox, oy, oz = c[0] - pos[0], c[1] - pos[1], c[2] - pos[2]
            tx += oy * f[2] - oz * f[1]
            ty += oz * f[0] - ox * f[2]
            tz += ox * f[1] - oy * f[0]

        contact = contact_forces(
            [(c, el.radius) for c, el in zip(centers, self.elements)],
            self.cells,
            self.obstacles,
            robot_com=pos,
            robot_velocity=self._robot_velocity,
            cell_velocities=self._cell_velocities,
            robot_gamma=self.gamma_t,
            cell_gammas=self.cell_gammas,
            stability=StabilityLimit(dt=dt),
        )
        fx += contact.on_robot_force[0]
        fy += contact.on_robot_force[1]
        fz += contact.on_robot_force[2]
        tx += contact.on_robot_torque[0]
        ty += contact.on_robot_torque[1]
        tz += contact.on_robot_torque[2]

        # one fixed-layout batch per tick; python floats keep downstream
        # arithmetic and JSON serialization free of numpy scalars
        kicks = self.rng.standard_normal(6 + 3 * len(self.cells)).tolist()
        kt = self.medium.thermal_energy
        scale_t = math.sqrt(2.0 * kt / self.gamma_t * dt)
        scale_r = math.sqrt(2.0 * kt / self.gamma_r * dt)

        inv_gt = dt / self.gamma_t
        dxr = (
            fx * inv_gt + scale_t * kicks[0],
            fy * inv_gt + scale_t * kicks[1],
            fz * inv_gt + scale_t * kicks[2],
        )
        if not (v_norm(dxr) <= self._blowup_limit):
            raise SimulationUnstableError(
                f"robot moved {v_norm(dxr):.3g} µm in one tick "
                f"(limit {self._blowup_limit:.3g}); reduce dt or stiffness"
            )
        inv_gr = dt / self.gamma_r
        dth = (
            tx * inv_gr + scale_r * kicks[3],
            ty * inv_gr + scale_r * kicks[4],
            tz * inv_gr + scale_r * kicks[5],
        )

        new_cells = []
        new_cell_velocities = []
        for i, cell in enumerate(self.cells):
            g = self.cell_gammas[i]
            cf = contact.on_cells[i]
            sc = math.sqrt(2.0 * kt / g * dt)
            base = 6 + 3 * i
            dxc = (
                cf[0] / g * dt + sc * kicks[base],
                cf[1] / g * dt + sc * kicks[base + 1],
                cf[2] / g * dt + sc * kicks[base + 2],
            )
            if not (v_norm(dxc) <= self._blowup_limit):
                raise SimulationUnstableError(
                    f"cell[{i}] moved {v_norm(dxc):.3g} µm in one tick "
                    f"(limit {self._blowup_limit:.3g}); reduce dt or stiffness"
                )
            new_cells.append(
                replace(
                    cell,
                    position=(
                        cell.position[0] + dxc[0],
                        cell.position[1] + dxc[1],
                        cell.position[2] + dxc[2],
                    ),
                )
            )
            new_cell_velocities.append((dxc[0] / dt, dxc[1] / dt, dxc[2] / dt))

        new_pos = (pos[0] + dxr[0], pos[1] + dxr[1], pos[2] + dxr[2])
        new_q = q_normalize(q_mul(q_from_rotvec(dth), q))
        self.state = RigidState(position=new_pos, orientation=new_q)
        self.cells = new_cells
        self._robot_velocity = (dxr[0] / dt, dxr[1] / dt, dxr[2] / dt)
        self._cell_velocities = new_cell_velocities
        self.last_optical = per_element
        self.last_contact = contact
        self.tick += 1
        self.time = self.tick * dt

    def snapshot(self) -> WorldSnapshot:
        return WorldSnapshot(
            tick=self.tick,
            time=self.time,
            robot=self.state,
            trap_positions=tuple(t.position for t in self.traps),
            cell_positions=tuple(c.position for c in self.cells),
            contact_metric=self.last_contact.max_cell_force,
            cell_contact_magnitudes=tuple(self.last_contact.cell_force_magnitudes),
        )

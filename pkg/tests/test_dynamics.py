"""Drag composition, Brownian scaling, stepping, and stability detection."""

import math

import pytest

from ottwin.dynamics import (
    KB_PN_UM_PER_K,
    Cell,
    BoxObstacle,
    Medium,
    PlaneObstacle,
    RigidState,
    SimulationUnstableError,
    World,
    brownian_kick,
    diffusion_coefficient,
    drag_coefficients,
    stokes_drag,
)
from ottwin.force_model import OpticalForceParams, SphereElement, Trap
from ottwin.geom import q_norm, v_dist, v_norm
from ottwin.rng import SimRng


def std_params(**overrides):
    kw = dict(stiffness_K=5.0, delta=1.0, far_A=2.0, far_C=3.0, cutoff_r_max=8.0)
    kw.update(overrides)
    return OpticalForceParams(**kw)


def single_element_world(
    *,
    start=(0.0, 0.0, 0.0),
    radius=1.5,
    trap_at=(0.0, 0.0, 0.0),
    temperature=300.0,
    seed=1,
    params=None,
    cells=None,
    obstacles=None,
):
    return World(
        elements=[SphereElement(offset_body=(0.0, 0.0, 0.0), radius=radius, assigned_trap=0)],
        state=RigidState(position=start),
        medium=Medium(temperature_T=temperature),
        params=params or std_params(),
        traps=[Trap(position=trap_at)],
        cells=cells,
        obstacles=obstacles,
        rng=SimRng(seed),
    )


# ---------------------------------------------------------------------------
# drag and diffusion


def test_stokes_drag_single_sphere():
    g = drag_coefficients(
        [SphereElement(offset_body=(0, 0, 0), radius=1.5)], Medium()
    )
    assert g.gamma_t == pytest.approx(6 * math.pi * 1e-3 * 1.5, rel=1e-12)
    assert g.gamma_t == pytest.approx(0.028274, rel=1e-4)


def test_drag_additivity_two_spheres():
    els = [
        SphereElement(offset_body=(1.0, 0.0, 0.0), radius=1.0),
        SphereElement(offset_body=(-1.0, 0.0, 0.0), radius=1.0),
    ]
    g = drag_coefficients(els, Medium())
    assert g.gamma_t == pytest.approx(0.037699, rel=1e-4)
    # per sphere: 8 pi eta a^3 spin + 6 pi eta a |offset|^2 lever
    assert g.gamma_r == pytest.approx(
        2 * (8 * math.pi * 1e-3 + 6 * math.pi * 1e-3), rel=1e-12
    )
    assert g.gamma_r == pytest.approx(0.087965, rel=1e-4)


def test_drag_requires_elements():
    with pytest.raises(ValueError, match="nonempty"):
        drag_coefficients([], Medium())


def test_diffusion_coefficient_stokes_einstein():
    medium = Medium()
    gamma = stokes_drag(1.5, medium)
    d = diffusion_coefficient(gamma, medium)
    assert medium.thermal_energy == pytest.approx(4.1419e-3, rel=1e-4)
    assert d == pytest.approx(KB_PN_UM_PER_K * 300.0 / gamma, rel=1e-15)
    assert d == pytest.approx(0.1465, rel=2e-4)


def test_medium_rejects_bad_values():
    with pytest.raises(ValueError):
        Medium(viscosity_eta=0.0)
    with pytest.raises(ValueError):
        Medium(temperature_T=-1.0)


# ---------------------------------------------------------------------------
# brownian kicks


def test_kick_deterministic_for_fixed_seed():
    medium = Medium()
    a = brownian_kick(0.028274, medium, 1e-3, SimRng(42))
    b = brownian_kick(0.028274, medium, 1e-3, SimRng(42))
    assert a == b
    assert a != brownian_kick(0.028274, medium, 1e-3, SimRng(43))


def test_kick_zero_at_zero_temperature():
    rng = SimRng(7)
    for _ in range(50):
        assert brownian_kick(0.028274, Medium(temperature_T=0.0), 1e-3, rng) == 0.0


def test_kick_scale_matches_fluctuation_dissipation():
    medium = Medium()
    gamma = stokes_drag(1.5, medium)
    expected_std = math.sqrt(2 * diffusion_coefficient(gamma, medium) * 1e-3)
    rng = SimRng(11)
    n = 20000
    draws = [brownian_kick(gamma, medium, 1e-3, rng) for _ in range(n)]
    mean = sum(draws) / n
    var = sum((x - mean) ** 2 for x in draws) / (n - 1)
    assert mean == pytest.approx(0.0, abs=4 * expected_std / math.sqrt(n))
    assert math.sqrt(var) == pytest.approx(expected_std, rel=0.03)


def test_kick_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        brownian_kick(0.028, Medium(), 0.0, SimRng(1))


# ---------------------------------------------------------------------------
# stepping


def test_zero_force_fixed_point():
    w = World(
        elements=[SphereElement(offset_body=(0.3, 0.0, 0.0), radius=1.0)],
        state=RigidState(position=(1.0, -2.0, 0.5)),
        medium=Medium(temperature_T=0.0),
        params=std_params(),
        traps=[],
        rng=SimRng(5),
    )
    before = w.state
    for _ in range(10):
        w.step(1e-3)
    assert w.state.position == before.position
    assert w.state.orientation == before.orientation


def test_single_tick_displacement_hand_computed():
    w = single_element_world(start=(0.4, 0.0, 0.0), temperature=0.0)
    w.step(1e-3)
    gamma = 6 * math.pi * 1e-3 * 1.5
    expected = 0.4 - 2.0 / gamma * 1e-3
    assert w.state.position[0] == pytest.approx(expected, rel=1e-12)
    assert 2.0 / gamma * 1e-3 == pytest.approx(0.070736, rel=1e-4)


def test_zero_temperature_convergence_is_monotone():
    w = single_element_world(start=(0.5, 0.0, 0.0), temperature=0.0)
    distances = [v_norm(w.state.position)]
    for _ in range(1000):
        w.step(1e-3)
        distances.append(v_norm(w.state.position))
    assert all(b <= a for a, b in zip(distances, distances[1:]))
    assert distances[-1] < 1e-3


def test_step_determinism_bit_identical():
    def run(seed):
        w = World(
            elements=[
                SphereElement(offset_body=(-1.0, 0.0, 0.0), radius=1.0, assigned_trap=0),
                SphereElement(offset_body=(1.0, 0.0, 0.0), radius=1.0, assigned_trap=1),
            ],
            state=RigidState(position=(0.0, 0.0, 0.0)),
            medium=Medium(),
            params=std_params(),
            traps=[Trap(position=(-1.2, 0.1, 0.0)), Trap(position=(1.2, -0.1, 0.0))],
            cells=[Cell(position=(0.0, 2.4, 0.0), radius=1.5)],
            obstacles=[PlaneObstacle(normal=(0.0, 0.0, 1.0), offset=-3.0)],
            rng=SimRng(seed),
        )
        for _ in range(200):
            w.step(1e-3)
        return w.state, w.cells[0].position

    s1, c1 = run(99)
    s2, c2 = run(99)
    assert s1.position == s2.position
    assert s1.orientation == s2.orientation
    assert c1 == c2
    s3, _ = run(100)
    assert s3.position != s1.position


def test_step_rejects_bad_dt():
    w = single_element_world()
    with pytest.raises(ValueError):
        w.step(0.0)
    with pytest.raises(ValueError):
        w.step(0.003)


def test_blowup_names_robot():
    p = OpticalForceParams(
        stiffness_K=1e6, delta=1.0, far_A=0.0, far_C=1e6, cutoff_r_max=10.0
    )
    w = single_element_world(start=(0.9, 0.0, 0.0), temperature=0.0, params=p)
    with pytest.raises(SimulationUnstableError, match="robot"):
        w.step(1e-3)


def test_blowup_names_cell():
    # small robot far away sets a tight blowup limit; the cell starts deep
    # inside a box and the push-out exceeds it
    w = World(
        elements=[SphereElement(offset_body=(0.0, 0.0, 0.0), radius=0.5)],
        state=RigidState(position=(50.0, 0.0, 0.0)),
        medium=Medium(temperature_T=0.0),
        params=std_params(),
        traps=[],
        cells=[Cell(position=(0.0, 0.0, 0.0), radius=0.1, stiffness_k_cell=50.0)],
        obstacles=[BoxObstacle(min_corner=(-4.0, -4.0, -4.0), max_corner=(4.0, 4.0, 4.0), stiffness=500.0)],
        rng=SimRng(3),
    )
    with pytest.raises(SimulationUnstableError, match=r"cell\[0\]"):
        w.step(1e-3)


def test_quaternion_norm_stays_unit_over_long_run():
    w = World(
        elements=[SphereElement(offset_body=(0.5, 0.0, 0.0), radius=1.0, assigned_trap=0)],
        state=RigidState(position=(0.1, 0.0, 0.0)),
        medium=Medium(),
        params=std_params(),
        traps=[Trap(position=(0.0, 0.0, 0.0))],
        rng=SimRng(8),
    )
    for _ in range(1_000_000):
        w.step(1e-3)
    assert abs(q_norm(w.state.orientation) - 1.0) < 1e-9


def test_free_sphere_msd_matches_diffusion():
    # ensemble of short walks; the acceptance suite runs the full-budget version
    medium = Medium()
    gamma = stokes_drag(1.5, medium)
    d = diffusion_coefficient(gamma, medium)
    n_worlds, n_steps, dt = 40, 250, 1e-3
    total = 0.0
    for k in range(n_worlds):
        w = World(
            elements=[SphereElement(offset_body=(0.0, 0.0, 0.0), radius=1.5)],
            state=RigidState(position=(0.0, 0.0, 0.0)),
            medium=medium,
            params=std_params(),
            traps=[],
            rng=SimRng(3000 + k),
        )
        for _ in range(n_steps):
            w.step(dt)
        total += sum(c * c for c in w.state.position)
    msd = total / n_worlds
    expected = 6.0 * d * n_steps * dt
    assert msd == pytest.approx(expected, rel=0.25)


def test_snapshot_is_immutable_value():
    w = single_element_world(cells=[Cell(position=(5.0, 0.0, 0.0), radius=1.0)])
    snap = w.snapshot()
    w.step(1e-3)
    assert snap.tick == 0
    assert snap.robot.position == (0.0, 0.0, 0.0)
    with pytest.raises(AttributeError):
        snap.tick = 5


def test_cells_diffuse_and_contact_metric_updates():
    w = single_element_world(
        start=(0.0, 0.0, 0.0),
        cells=[Cell(position=(2.6, 0.0, 0.0), radius=1.5)],
        temperature=0.0,
    )
    w.step(1e-3)
    assert w.last_contact.max_cell_force > 0.0
    # the overlapping cell is pushed away along +x
    assert w.cells[0].position[0] > 2.6

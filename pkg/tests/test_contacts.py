"""Penalty contact geometry, pairwise balance, and steady-state consistency."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ottwin.dynamics import (
    BoxObstacle,
    Cell,
    Medium,
    PlaneObstacle,
    RigidState,
    StabilityLimit,
    World,
    contact_forces,
    stokes_drag,
)
from ottwin.force_model import OpticalForceParams, SphereElement, Trap
from ottwin.geom import v_add, v_norm
from ottwin.rng import SimRng


def test_sphere_cell_overlap_hand_computed():
    # centers 2.6 apart, radii 1.5 + 1.5: p = 0.4, k = 10 -> 4.0 pN
    cell = Cell(position=(2.6, 0.0, 0.0), radius=1.5, stiffness_k_cell=10.0)
    res = contact_forces([((0.0, 0.0, 0.0), 1.5)], [cell], [])
    assert res.on_robot_force == pytest.approx((-4.0, 0.0, 0.0), abs=1e-12)
    assert res.on_cells[0] == pytest.approx((4.0, 0.0, 0.0), abs=1e-12)
    assert res.max_cell_force == pytest.approx(4.0, abs=1e-12)
    # independent geometric-overlap oracle
    p = (1.5 + 1.5) - math.dist((0, 0, 0), (2.6, 0, 0))
    assert res.max_cell_force == pytest.approx(10.0 * p, abs=1e-12)


def test_separated_pair_is_force_free():
    cell = Cell(position=(3.1, 0.0, 0.0), radius=1.5)
    res = contact_forces([((0.0, 0.0, 0.0), 1.5)], [cell], [])
    assert res.on_robot_force == (0.0, 0.0, 0.0)
    assert res.max_cell_force == 0.0


def test_symmetric_pinch_cancels_but_reports_per_cell():
    cells = [
        Cell(position=(2.6, 0.0, 0.0), radius=1.5),
        Cell(position=(-2.6, 0.0, 0.0), radius=1.5),
    ]
    res = contact_forces([((0.0, 0.0, 0.0), 1.5)], cells, [])
    assert res.on_robot_force == pytest.approx((0.0, 0.0, 0.0), abs=1e-12)
    assert res.cell_force_magnitudes == pytest.approx([4.0, 4.0], abs=1e-12)
    assert res.max_cell_force == pytest.approx(4.0, abs=1e-12)


def test_plane_contact_pushes_along_normal():
    plane = PlaneObstacle(normal=(0.0, 0.0, 1.0), offset=0.0, stiffness=20.0)
    res = contact_forces([((0.0, 0.0, 0.8), 1.0)], [], [plane])
    # penetration = 1.0 - 0.8 = 0.2 -> 4.0 pN upward
    assert res.on_robot_force == pytest.approx((0.0, 0.0, 4.0), abs=1e-12)
    assert res.on_obstacles[0] == pytest.approx((0.0, 0.0, -4.0), abs=1e-12)


def test_box_face_contact():
    box = BoxObstacle(min_corner=(1.0, -5.0, -5.0), max_corner=(3.0, 5.0, 5.0), stiffness=10.0)
    res = contact_forces([((0.5, 0.0, 0.0), 1.0)], [], [box])
    # closest point on box is (1, 0, 0); overlap = 1.0 - 0.5
    assert res.on_robot_force == pytest.approx((-5.0, 0.0, 0.0), abs=1e-12)


def test_box_corner_contact_normal_is_radial():
    box = BoxObstacle(min_corner=(1.0, 1.0, -5.0), max_corner=(3.0, 3.0, 5.0), stiffness=10.0)
    c = (1.0 - 0.6 / math.sqrt(2), 1.0 - 0.6 / math.sqrt(2), 0.0)
    res = contact_forces([(c, 1.0)], [], [box])
    f = res.on_robot_force
    # distance to the corner is 0.6, penetration 0.4, direction (-1,-1,0)/sqrt2
    assert v_norm(f) == pytest.approx(4.0, abs=1e-9)
    assert f[0] == pytest.approx(f[1], abs=1e-12)
    assert f[2] == 0.0


def test_sphere_centered_inside_box_pushes_out_nearest_face():
    box = BoxObstacle(min_corner=(0.0, 0.0, 0.0), max_corner=(10.0, 4.0, 10.0), stiffness=1.0)
    res = contact_forces([((5.0, 3.5, 5.0), 0.5)], [], [box])
    # nearest face is y = 4 at distance 0.5; p = r + 0.5 = 1.0
    assert res.on_robot_force == pytest.approx((0.0, 1.0, 0.0), abs=1e-12)


def test_damping_resists_approach_and_never_pulls():
    cell = Cell(position=(2.6, 0.0, 0.0), radius=1.5, stiffness_k_cell=10.0, contact_damping=1.0)
    approaching = contact_forces(
        [((0.0, 0.0, 0.0), 1.5)], [cell], [], robot_velocity=(2.0, 0.0, 0.0)
    )
    # approach speed 2 adds c*2 = 2 pN on top of k*p = 4
    assert approaching.on_robot_force[0] == pytest.approx(-6.0, abs=1e-12)
    receding_fast = contact_forces(
        [((0.0, 0.0, 0.0), 1.5)], [cell], [], robot_velocity=(-50.0, 0.0, 0.0)
    )
    # separation faster than the spring can pay out: clamped at zero, no adhesion
    assert receding_fast.on_robot_force == (0.0, 0.0, 0.0)


def test_stability_limit_clamps_stiff_pairs():
    plane = PlaneObstacle(normal=(0.0, 0.0, 1.0), offset=0.0, stiffness=100.0)
    gamma = stokes_drag(1.5, Medium())
    free = contact_forces([((0.0, 0.0, 1.0), 1.5)], [], [plane], robot_gamma=gamma)
    limited = contact_forces(
        [((0.0, 0.0, 1.0), 1.5)], [], [plane],
        robot_gamma=gamma,
        stability=StabilityLimit(dt=1e-3),
    )
    assert free.on_robot_force[2] == pytest.approx(100.0 * 0.5, abs=1e-12)
    bound = 0.9 * gamma / 1e-3
    assert limited.on_robot_force[2] == pytest.approx(bound * 0.5, abs=1e-9)
    assert limited.on_robot_force[2] < free.on_robot_force[2]


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_newtons_third_law_random_cramped_scenes(data):
    coord = st.floats(min_value=-3.0, max_value=3.0)
    vel = st.floats(min_value=-5.0, max_value=5.0)

    def vec(strategy):
        return (data.draw(strategy), data.draw(strategy), data.draw(strategy))

    elements = [
        (vec(coord), data.draw(st.floats(min_value=0.5, max_value=2.0)))
        for _ in range(data.draw(st.integers(min_value=1, max_value=3)))
    ]
    cells = [
        Cell(
            position=vec(coord),
            radius=data.draw(st.floats(min_value=0.5, max_value=2.0)),
            stiffness_k_cell=data.draw(st.floats(min_value=0.0, max_value=50.0)),
            contact_damping=data.draw(
                st.one_of(st.none(), st.floats(min_value=0.0, max_value=2.0))
            ),
        )
        for _ in range(data.draw(st.integers(min_value=0, max_value=3)))
    ]
    obstacles = [
        PlaneObstacle(normal=(0.0, 0.0, 1.0), offset=data.draw(st.floats(-2.0, 0.0)), stiffness=30.0),
        BoxObstacle(min_corner=(-4.0, -4.0, -6.0), max_corner=(0.5, 4.0, 2.0), stiffness=25.0),
    ]
    res = contact_forces(
        elements,
        cells,
        obstacles,
        robot_com=(0.0, 0.0, 0.0),
        robot_velocity=vec(vel),
        cell_velocities=[vec(vel) for _ in cells],
        robot_gamma=0.03,
        cell_gammas=[stokes_drag(c.radius, Medium()) for c in cells],
        stability=data.draw(st.one_of(st.none(), st.just(StabilityLimit(dt=1e-3)))),
    )
    total = res.on_robot_force
    for f in res.on_cells:
        total = v_add(total, f)
    for f in res.on_obstacles:
        total = v_add(total, f)
    assert v_norm(total) < 1e-9


def test_steady_penetration_matches_configured_stiffness():
    # trap far below the floor pulls the sphere down; at rest the penalty
    # spring balances the pull, so k * p equals the optical force there
    params = OpticalForceParams(
        stiffness_K=5.0, delta=1.0, far_A=2.0, far_C=3.0, cutoff_r_max=20.0
    )
    floor = PlaneObstacle(normal=(0.0, 0.0, 1.0), offset=0.0, stiffness=10.0)
    w = World(
        elements=[SphereElement(offset_body=(0.0, 0.0, 0.0), radius=1.0, assigned_trap=0)],
        state=RigidState(position=(0.0, 0.0, 1.0)),
        medium=Medium(temperature_T=0.0),
        params=params,
        traps=[Trap(position=(0.0, 0.0, -6.0))],
        obstacles=[floor],
        rng=SimRng(21),
    )
    for _ in range(4000):
        w.step(1e-3)
    z = w.state.position[2]
    penetration = 1.0 - z
    assert penetration > 0.0
    r = abs(-6.0 - z)
    pull = params.far_C + params.far_A / (r * r)
    assert 10.0 * penetration == pytest.approx(pull, rel=0.05)


def test_stiff_wall_stays_stable_under_step():
    # obstacle stiffness far beyond the explicit bound must not oscillate
    floor = PlaneObstacle(normal=(0.0, 0.0, 1.0), offset=0.0, stiffness=100.0)
    w = World(
        elements=[SphereElement(offset_body=(0.0, 0.0, 0.0), radius=1.0, assigned_trap=0)],
        state=RigidState(position=(0.0, 0.0, 1.0)),
        medium=Medium(temperature_T=0.0),
        params=OpticalForceParams(
            stiffness_K=5.0, delta=1.0, far_A=2.0, far_C=3.0, cutoff_r_max=20.0
        ),
        traps=[Trap(position=(0.0, 0.0, -6.0))],
        obstacles=[floor],
        rng=SimRng(22),
    )
    zs = []
    for _ in range(4000):
        w.step(1e-3)
        zs.append(w.state.position[2])
    tail = zs[-200:]
    assert max(tail) - min(tail) < 1e-9  # settled, no chatter
    assert tail[-1] < 1.0  # resting inside the wall by the softened spring

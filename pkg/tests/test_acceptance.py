"""Release acceptance suite.

One test per release criterion. Each records a ``[PASS]``/``[FAIL]`` line
with the measured numbers; conftest flushes them into the terminal summary,
so a plain ``pytest`` run ends with the acceptance report.

``test_reference_profile_fit_rmse`` is expected to fail: the piecewise
linear/inverse-square family has an RMSE floor around 9.4% of F_max on the
smooth reference beam profile, above the 5% target. The target is kept as
written rather than loosened; see the test's docstring.
"""

import math
import random
import time

import pytest

from ottwin.dynamics import (
    Medium,
    RigidState,
    World,
    diffusion_coefficient,
    stokes_drag,
)
from ottwin.experiments import (
    REFERENCE_PARAMS,
    RotationStudyConfig,
    default_delivery_policies,
    load_corridor_scenario,
    run_consistency_study,
    run_delivery_study,
    run_rotation_study,
    spearman_rho,
)
from ottwin.force_model import (
    ForceSample,
    GaussianBeamProfile,
    OpticalForceParams,
    SphereElement,
    Trap,
    eval_trap_force,
    fit_piecewise,
    force_magnitude,
    sample_reference_force,
)
from ottwin.rng import SimRng
from ottwin.scenario import load_scenario
from ottwin.session import ScriptSource, replay, run_session
from ottwin.teleop import HandInput, LowPassState, lowpass_step

from test_golden import GOLDEN, run_script


# ---------------------------------------------------------------------------
# force model


def test_force_law_property_suite(acceptance):
    """Continuity at the breakpoint, monotone near field, attraction, and
    power-weight linearity over 1000 randomized parameter sets."""
    t0 = time.perf_counter()
    rng = random.Random(424242)
    worst_jump = 0.0
    worst_linearity = 0.0
    for _ in range(1000):
        k_stiff = rng.uniform(0.5, 20.0)
        delta = rng.uniform(0.2, 3.0)
        far_a = rng.uniform(0.01, 10.0)
        far_c = k_stiff * delta - far_a / delta**2  # continuity by construction
        cutoff = delta + rng.uniform(0.5, 8.0)
        p = OpticalForceParams(
            stiffness_K=k_stiff, delta=delta, far_A=far_a, far_C=far_c,
            cutoff_r_max=cutoff,
        )

        jump = abs(force_magnitude(p, delta) - force_magnitude(p, delta * (1.0 - 1e-12)))
        worst_jump = max(worst_jump, jump)

        near = [force_magnitude(p, delta * j / 40.0) for j in range(1, 41)]
        assert all(b > a for a, b in zip(near, near[1:]))

        r_any = rng.uniform(1e-3, cutoff * 1.2)
        assert force_magnitude(p, r_any) >= 0.0
        assert force_magnitude(p, cutoff) == 0.0

        trap_pos = tuple(rng.uniform(-5.0, 5.0) for _ in range(3))
        point = tuple(rng.uniform(-5.0, 5.0) for _ in range(3))
        w = rng.uniform(0.05, 4.0)
        lam = rng.uniform(0.5, 3.0)
        f1 = eval_trap_force(p, Trap(position=trap_pos, power_weight=w), point)
        f2 = eval_trap_force(p, Trap(position=trap_pos, power_weight=lam * w), point)
        to_trap = tuple(a - b for a, b in zip(trap_pos, point))
        assert sum(a * b for a, b in zip(f1, to_trap)) >= 0.0  # never repels
        for a, b in zip(f2, f1):
            err = abs(a - lam * b)
            scale = max(1.0, abs(lam * b))
            worst_linearity = max(worst_linearity, err / scale)

    wall = time.perf_counter() - t0
    ok = worst_jump <= 1e-6 and worst_linearity <= 1e-12 and wall < 5.0
    acceptance(
        "force-model properties",
        ok,
        f"1000 parameter sets; worst breakpoint jump {worst_jump:.2e} pN, "
        f"worst power-scaling error {worst_linearity:.2e} rel, {wall:.2f} s",
    )
    assert worst_jump <= 1e-6
    assert worst_linearity <= 1e-12
    assert wall < 5.0


def test_fit_recovers_generating_parameters(acceptance):
    true = OpticalForceParams(
        stiffness_K=4.0, delta=1.0, far_A=3.0, far_C=1.0, cutoff_r_max=7.0
    )
    rs = [0.125 * k for k in range(1, 49)]  # includes r == delta
    samples = [ForceSample(r, force_magnitude(true, r)) for r in rs]
    fitted = fit_piecewise(samples, cutoff_override=7.0)
    rels = {
        "K": abs(fitted.stiffness_K - true.stiffness_K) / true.stiffness_K,
        "delta": abs(fitted.delta - true.delta) / true.delta,
        "A": abs(fitted.far_A - true.far_A) / true.far_A,
        "C": abs(fitted.far_C - true.far_C) / true.far_C,
    }
    worst = max(rels.values())
    ok = worst <= 1e-6
    acceptance(
        "fit parameter recovery", ok,
        f"max relative error {worst:.2e} over (K, delta, A, C)",
    )
    assert ok


def test_reference_profile_fit_rmse(acceptance):
    """Fit against the analytic beam profile over [0, 4w].

    Expected to fail: the profile's rounded peak cannot be tracked by a
    linear ramp meeting an inverse-square tail, no matter the coefficients.
    A dense scan over all continuity-respecting parameter choices bottoms
    out near 9.4% of F_max, so the 5% target is unattainable for this model
    family and the red result documents that honestly.
    """
    profile = GaussianBeamProfile(f_max=6.0, beam_waist_w=0.8)
    rs = [4.0 * profile.beam_waist_w * k / 200.0 for k in range(1, 201)]
    samples = sample_reference_force(profile, rs)
    fitted = fit_piecewise(samples)
    sq = 0.0
    for s in samples:
        resid = force_magnitude(fitted, s.displacement_r) - s.force_magnitude
        sq += resid * resid
    rmse = math.sqrt(sq / len(samples))
    pct = 100.0 * rmse / profile.f_max
    ok = pct <= 5.0
    acceptance(
        "reference-profile fit RMSE", ok,
        f"RMSE {pct:.2f}% of F_max (target 5%; family floor ~9.4% on this profile)",
    )
    assert ok, (
        f"piecewise fit RMSE is {pct:.2f}% of F_max; the model family cannot "
        "reach the 5% target on the smooth reference profile"
    )


# ---------------------------------------------------------------------------
# dynamics and haptics


def test_msd_matches_fluctuation_dissipation(acceptance):
    """Free-sphere ensemble MSD vs 6*D*t over 1e5 total steps."""
    t0 = time.perf_counter()
    medium = Medium()
    gamma = stokes_drag(1.5, medium)
    d_coef = diffusion_coefficient(gamma, medium)
    assert d_coef == pytest.approx(0.1465, rel=5e-3)

    n_worlds, n_steps, dt = 1000, 100, 1e-3
    total = 0.0
    for k in range(n_worlds):
        w = World(
            elements=[SphereElement(offset_body=(0.0, 0.0, 0.0), radius=1.5)],
            state=RigidState(position=(0.0, 0.0, 0.0)),
            medium=medium,
            params=REFERENCE_PARAMS,
            traps=[],
            rng=SimRng(50_000 + k),
        )
        for _ in range(n_steps):
            w.step(dt)
        total += sum(c * c for c in w.state.position)
    msd = total / n_worlds
    expected = 6.0 * d_coef * n_steps * dt
    ratio = msd / expected
    wall = time.perf_counter() - t0
    ok = abs(ratio - 1.0) <= 0.10 and wall < 30.0
    acceptance(
        "fluctuation-dissipation MSD", ok,
        f"MSD/(6*D*t) = {ratio:.4f} over {n_worlds * n_steps} steps "
        f"(D = {d_coef:.4f} um^2/s), {wall:.1f} s",
    )
    assert abs(ratio - 1.0) <= 0.10
    assert wall < 30.0


def test_lowpass_step_response_is_exact(acceptance):
    alpha = 0.05
    state = LowPassState()
    worst = 0.0
    for k in range(1, 401):
        state, y = lowpass_step(state, (1.0, 0.0, 0.0), alpha)
        worst = max(worst, abs(y[0] - (1.0 - (1.0 - alpha) ** k)))
    ok = worst <= 1e-12
    acceptance(
        "filter step exactness", ok,
        f"max |y_k - (1-(1-a)^k)| = {worst:.2e} over 400 steps at a=0.05",
    )
    assert ok


def test_rendered_force_tracks_model_in_sweeps(acceptance):
    t0 = time.perf_counter()
    swept = run_consistency_study(REFERENCE_PARAMS)
    ideal = run_consistency_study(REFERENCE_PARAMS, ideal=True)
    worst_ideal = max(abs(r.f_rendered - r.f_model) for r in ideal.rows)
    wall = time.perf_counter() - t0
    ok = (
        swept.axial.r2 >= 0.95
        and swept.radial.r2 >= 0.95
        and worst_ideal <= 1e-6
        and wall < 10.0
    )
    acceptance(
        "rendering consistency", ok,
        f"R^2 axial {swept.axial.r2:.4f} / radial {swept.radial.r2:.4f} "
        f"(>= 0.95); ideal-path identity {worst_ideal:.2e} pN, {wall:.1f} s",
    )
    assert swept.axial.r2 >= 0.95
    assert swept.radial.r2 >= 0.95
    assert worst_ideal <= 1e-6
    assert wall < 10.0


# ---------------------------------------------------------------------------
# rotation studies


D_STARS = (2.0, 3.0, 4.0, 5.0, 6.0)


def test_rotation_strategy_a_angle_decreases_with_spacing(acceptance):
    rows = run_rotation_study(RotationStudyConfig(strategy="A", d_star_values=D_STARS))
    rho = spearman_rho([r.d_star for r in rows], [r.theta_deg for r in rows])
    ok = rho <= -0.9 and all(r.converged for r in rows)
    thetas = ", ".join(f"{r.theta_deg:.1f}" for r in rows)
    acceptance(
        "rotation strategy A trend", ok,
        f"Spearman(d*, theta) = {rho:.3f} over {len(rows)} points "
        f"(theta deg: {thetas})",
    )
    assert rho <= -0.9
    assert all(r.converged for r in rows)


def test_rotation_strategy_b_matches_a_at_equal_power(acceptance):
    rows_a = run_rotation_study(RotationStudyConfig(strategy="A", d_star_values=D_STARS))
    rows_b1 = run_rotation_study(
        RotationStudyConfig(strategy="B", d_star_values=D_STARS, power_ratio_m=1.0)
    )
    worst = max(
        abs(a.theta_deg - b.theta_deg) for a, b in zip(rows_a, rows_b1)
    )
    rows_b15 = run_rotation_study(
        RotationStudyConfig(strategy="B", d_star_values=D_STARS, power_ratio_m=1.5)
    )
    finite = all(math.isfinite(r.theta_deg) for r in rows_b15)
    converged = all(r.converged for r in rows_b15)
    ok = worst <= 1e-6 and finite and converged
    acceptance(
        "rotation strategy B equivalence", ok,
        f"max |theta_A - theta_B(m=1)| = {worst:.2e} deg; m=1.5 rows "
        f"{'all converged' if (finite and converged) else 'NOT converged'}",
    )
    assert worst <= 1e-6
    assert finite and converged


# ---------------------------------------------------------------------------
# delivery study


def test_force_aware_delivery_reduces_contact_forces(acceptance):
    t0 = time.perf_counter()
    scenario = load_corridor_scenario()
    blind, aware = default_delivery_policies()
    res = run_delivery_study(
        scenario, blind, aware, trials_per_condition=10, base_seed=1000
    )
    wall = time.perf_counter() - t0
    mean_red = 100.0 * res.comparison.contact_mean_reduction
    sd_red = 100.0 * res.comparison.contact_sd_reduction
    ok = (
        res.aware.contact_mean < res.blind.contact_mean
        and res.aware.contact_sd < res.blind.contact_sd
        and wall < 120.0
    )
    acceptance(
        "delivery contact-force direction", ok,
        f"aware mean {res.aware.contact_mean:.3f} < blind {res.blind.contact_mean:.3f} pN "
        f"(-{mean_red:.0f}%), SD -{sd_red:.0f}%, 10 paired trials/condition, {wall:.1f} s",
    )
    assert res.aware.contact_mean < res.blind.contact_mean
    assert res.aware.contact_sd < res.blind.contact_sd
    assert wall < 120.0


# ---------------------------------------------------------------------------
# determinism and wire protocol


def _determinism_scenario():
    return load_scenario(
        {
            "schema_version": 1,
            "name": "accept-determinism",
            "seed": 0,
            "timeout_s": 0.4,
            "robot": {"elements": [{"offset": [0, 0, 0], "radius": 1.5, "trap": 0}]},
            "traps": [{"position": [0, 0, 0], "device": "right"}],
            "force": {
                "params": {"K": 5.0, "delta": 1.0, "A": 2.0, "C": 3.0, "r_max": 8.0}
            },
            "cells": [{"position": [3.2, 0.3, 0]}],
            "goal": {"center": [6, 0, 0], "radius": 1.5},
            "obstacles": [{"type": "plane", "normal": [0, 0, 1], "offset": -3.0}],
        }
    )


def test_scripted_sessions_replay_byte_identically(acceptance):
    """100 randomized scripted trials, each replayed from its own log."""
    t0 = time.perf_counter()
    sc = _determinism_scenario()
    rng = random.Random(90210)
    mismatches = 0
    for k in range(100):
        entries = [
            HandInput(
                "right",
                (rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)),
                rng.uniform(0.0, 0.45),
            )
            for _ in range(rng.randrange(0, 7))
        ]
        abort_at = rng.uniform(0.05, 0.5) if rng.random() < 0.4 else None
        close_at = rng.uniform(0.05, 0.5) if rng.random() < 0.2 else None
        source = ScriptSource(entries, abort_at=abort_at, close_at=close_at)
        log = run_session(sc, source, seed=7_000 + k)
        if replay(log, sc).to_jsonl() != log.to_jsonl():
            mismatches += 1
    wall = time.perf_counter() - t0
    ok = mismatches == 0
    acceptance(
        "replay determinism", ok,
        f"{mismatches} mismatches over 100 randomized sessions, {wall:.1f} s",
    )
    assert mismatches == 0


def test_wire_stream_reproduces_golden_bytes(acceptance):
    lines = run_script()
    text = "\n".join(lines) + "\n"
    ok = GOLDEN.exists() and text == GOLDEN.read_text()
    acceptance(
        "protocol golden stream", ok,
        f"{len(lines)} messages byte-compared against the checked-in transcript",
    )
    assert GOLDEN.exists()
    assert text == GOLDEN.read_text()

"""Small 3-vector and quaternion helpers on plain tuples.

The hot simulation loop works on ``(x, y, z)`` float tuples rather than numpy
arrays: per-tick allocations stay cheap and results are bit-reproducible
regardless of BLAS. Quaternions are ``(w, x, y, z)``, kept unit-length by the
integrator.
"""

from __future__ import annotations

import math

Vec3 = tuple[float, float, float]
Quat = tuple[float, float, float, float]

IDENTITY_QUAT: Quat = (1.0, 0.0, 0.0, 0.0)


def v_add(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def v_sub(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def v_scale(a: Vec3, s: float) -> Vec3:
    return (a[0] * s, a[1] * s, a[2] * s)


def v_dot(a: Vec3, b: Vec3) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def v_cross(a: Vec3, b: Vec3) -> Vec3:
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def v_norm(a: Vec3) -> float:
    return math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])


def v_dist(a: Vec3, b: Vec3) -> float:
    dx, dy, dz = a[0] - b[0], a[1] - b[1], a[2] - b[2]
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def v_clamp(a: Vec3, lo: Vec3, hi: Vec3) -> Vec3:
    return (
        min(max(a[0], lo[0]), hi[0]),
        min(max(a[1], lo[1]), hi[1]),
        min(max(a[2], lo[2]), hi[2]),
    )


def v_finite(a) -> bool:
    return (
        len(a) == 3
        and all(isinstance(c, (int, float)) and math.isfinite(c) for c in a)
    )


def q_norm(q: Quat) -> float:
    return math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])


def q_normalize(q: Quat) -> Quat:
    n = q_norm(q)
    if n == 0.0:
        raise ValueError("cannot normalize zero quaternion")
    return (q[0] / n, q[1] / n, q[2] / n, q[3] / n)


def q_mul(a: Quat, b: Quat) -> Quat:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def q_conj(q: Quat) -> Quat:
    return (q[0], -q[1], -q[2], -q[3])


def q_rotate(q: Quat, v: Vec3) -> Vec3:
    """Rotate vector ``v`` by unit quaternion ``q`` (body to world)."""
    qw, qx, qy, qz = q
    vx, vy, vz = v
    # t = 2 q_vec x v
    tx = 2.0 * (qy * vz - qz * vy)
    ty = 2.0 * (qz * vx - qx * vz)
    tz = 2.0 * (qx * vy - qy * vx)
    # v' = v + w t + q_vec x t
    return (
        vx + qw * tx + qy * tz - qz * ty,
        vy + qw * ty + qz * tx - qx * tz,
        vz + qw * tz + qx * ty - qy * tx,
    )


def q_from_rotvec(w: Vec3) -> Quat:
    """Exponential map: rotation vector (radians) to unit quaternion."""
    angle = v_norm(w)
    if angle < 1e-12:
        # first-order expansion; renormalization absorbs the truncation
        return q_normalize((1.0, 0.5 * w[0], 0.5 * w[1], 0.5 * w[2]))
    half = 0.5 * angle
    s = math.sin(half) / angle
    return (math.cos(half), s * w[0], s * w[1], s * w[2])


def q_angle_between(a: Quat, b: Quat) -> float:
    """Rotation angle (radians) taking orientation ``a`` to ``b``."""
    dot = abs(a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3])
    return 2.0 * math.acos(min(1.0, dot))

"""Small 3-vector / quaternion helpers shared by the builder and the engine.

Quaternions are stored as numpy arrays ``(w, x, y, z)``.  Everything here is
plain numpy; the simulation kernels carry their own scalar versions of the
same formulas (see :mod:`tenjoint.kernels`).
"""

from __future__ import annotations

import math

import numpy as np

QUAT_UNIT_TOL = 1e-9

IDENTITY_QUAT = (1.0, 0.0, 0.0, 0.0)


def vec3(v) -> np.ndarray:
    """Coerce to a float64 3-vector."""
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {a.shape}")
    return a


def unit(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return np.asarray(v, dtype=np.float64) / n


def quat(q) -> np.ndarray:
    a = np.asarray(q, dtype=np.float64)
    if a.shape != (4,):
        raise ValueError(f"expected a quaternion (w,x,y,z), got shape {a.shape}")
    return a


def quat_is_unit(q, tol: float = QUAT_UNIT_TOL) -> bool:
    return abs(float(np.linalg.norm(np.asarray(q, dtype=np.float64))) - 1.0) <= tol


def quat_normalize(q) -> np.ndarray:
    a = quat(q)
    return a / float(np.linalg.norm(a))


def quat_conjugate(q) -> np.ndarray:
    w, x, y, z = quat(q)
    return np.array([w, -x, -y, -z])


def quat_multiply(a, b) -> np.ndarray:
    aw, ax, ay, az = quat(a)
    bw, bx, by, bz = quat(b)
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_rotate(q, v) -> np.ndarray:
    """Rotate vector ``v`` by unit quaternion ``q``."""
    w, x, y, z = quat(q)
    vx, vy, vz = vec3(v)
    # t = 2 * (q_vec x v); v' = v + w*t + q_vec x t
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return np.array(
        [
            vx + w * tx + (y * tz - z * ty),
            vy + w * ty + (z * tx - x * tz),
            vz + w * tz + (x * ty - y * tx),
        ]
    )


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    a = unit(vec3(axis))
    half = 0.5 * float(angle)
    s = math.sin(half)
    return np.array([math.cos(half), a[0] * s, a[1] * s, a[2] * s])


def quat_between(a, b) -> np.ndarray:
    """Minimal rotation taking direction ``a`` onto direction ``b``."""
    ua, ub = unit(vec3(a)), unit(vec3(b))
    d = float(np.dot(ua, ub))
    if d > 1.0 - 1e-12:
        return np.array([1.0, 0.0, 0.0, 0.0])
    if d < -1.0 + 1e-12:
        # 180 degrees: any axis orthogonal to a
        ortho = np.array([1.0, 0.0, 0.0])
        if abs(ua[0]) > 0.9:
            ortho = np.array([0.0, 1.0, 0.0])
        axis = unit(np.cross(ua, ortho))
        return np.array([0.0, axis[0], axis[1], axis[2]])
    axis = np.cross(ua, ub)
    w = 1.0 + d
    return quat_normalize(np.array([w, axis[0], axis[1], axis[2]]))


def segment_distance(p0, p1, q0, q1) -> float:
    """Minimum distance between segments ``p0p1`` and ``q0q1``."""
    p0, p1, q0, q1 = vec3(p0), vec3(p1), vec3(q0), vec3(q1)
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = float(np.dot(d1, d1))
    e = float(np.dot(d2, d2))
    f = float(np.dot(d2, r))
    if a <= 1e-30 and e <= 1e-30:
        return float(np.linalg.norm(r))
    if a <= 1e-30:
        s, t = 0.0, min(max(f / e, 0.0), 1.0)
    else:
        c = float(np.dot(d1, r))
        if e <= 1e-30:
            t, s = 0.0, min(max(-c / a, 0.0), 1.0)
        else:
            b = float(np.dot(d1, d2))
            denom = a * e - b * b
            s = min(max((b * f - c * e) / denom, 0.0), 1.0) if denom > 1e-30 else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t, s = 0.0, min(max(-c / a, 0.0), 1.0)
            elif t > 1.0:
                t, s = 1.0, min(max((b - c) / a, 0.0), 1.0)
    closest_p = p0 + s * d1
    closest_q = q0 + t * d2
    return float(np.linalg.norm(closest_p - closest_q))

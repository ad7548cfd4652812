"""Small 3D helpers: unit vectors and quaternion rotations.

Quaternions are stored as (x, y, z, w), matching scipy's convention.
Rotation of vector arrays is hand-rolled because it sits on the per-frame
hot path (ray grids, box intersections) where constructing a scipy
Rotation object per call costs more than the math.
"""

from __future__ import annotations

import numpy as np

IDENTITY_QUAT = np.array([0.0, 0.0, 0.0, 1.0])


def unit(v, eps: float = 1e-12) -> np.ndarray:
    """Normalize a vector; zero-length input comes back as zeros."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n < eps:
        return np.zeros_like(v)
    return v / n


def angle_between(a, b) -> float:
    """Angle in radians between two vectors (0 for any zero vector)."""
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        return 0.0
    c = float(np.dot(a, b) / (na * nb))
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q)


def quat_conj(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.array([-q[0], -q[1], -q[2], q[3]])


def quat_multiply(a, b) -> np.ndarray:
    ax, ay, az, aw = a
    bx, by, bz, bw = b
    return np.array(
        [
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
            aw * bw - ax * bx - ay * by - az * bz,
        ]
    )


def quat_rotate(q, v) -> np.ndarray:
    """Rotate vector(s) ``v`` (shape (..., 3)) by quaternion ``q``."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    qv = q[:3]
    w = q[3]
    t = 2.0 * np.cross(qv, v)
    return v + w * t + np.cross(qv, t)


def quat_from_matrix(m) -> np.ndarray:
    """Rotation matrix (3x3, columns = rotated basis) to quaternion."""
    m = np.asarray(m, dtype=float)
    t = np.trace(m)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2.0
        return quat_normalize(
            [(m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s, 0.25 * s]
        )
    i = int(np.argmax(np.diag(m)))
    j, k = (i + 1) % 3, (i + 2) % 3
    s = np.sqrt(m[i, i] - m[j, j] - m[k, k] + 1.0) * 2.0
    q = np.empty(4)
    q[i] = 0.25 * s
    q[j] = (m[j, i] + m[i, j]) / s
    q[k] = (m[k, i] + m[i, k]) / s
    q[3] = (m[k, j] - m[j, k]) / s
    return quat_normalize(q)


def look_rotation(forward, up_hint=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Quaternion whose local +y maps to ``forward`` with +z near ``up_hint``.

    The identity orientation therefore looks along world +y with +z up,
    which is the natural "seated at the table" viewpoint in this package's
    coordinate frame.
    """
    f = unit(forward)
    right = np.cross(f, unit(up_hint))
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(f, (1.0, 0.0, 0.0))
    right = unit(right)
    up = unit(np.cross(right, f))
    return quat_from_matrix(np.column_stack([right, f, up]))


def camera_axes(q) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(right, forward, up) world-frame axes of an orientation quaternion."""
    right = quat_rotate(q, np.array([1.0, 0.0, 0.0]))
    forward = quat_rotate(q, np.array([0.0, 1.0, 0.0]))
    up = quat_rotate(q, np.array([0.0, 0.0, 1.0]))
    return right, forward, up


def perturb_direction(d, offset_u, offset_v, up_hint=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Tilt unit vector ``d`` by small angles (radians) in an orthonormal frame."""
    d = unit(d)
    u = np.cross(d, unit(up_hint))
    if np.linalg.norm(u) < 1e-9:
        u = np.cross(d, (1.0, 0.0, 0.0))
    u = unit(u)
    v = unit(np.cross(u, d))
    return unit(d + np.tan(offset_u) * u + np.tan(offset_v) * v)

"""Unit-quaternion helpers for the small amount of SO(3) math the stack needs.

Quaternions are (w, x, y, z) numpy arrays. The planar character lives in the
sagittal x-z plane; its orientations rotate purely about the lateral (y) axis,
so only the w and y components are ever nonzero. The planar angle convention
is counterclockwise in the x-z plane (+x tips toward +z), which corresponds to
a rotation about -y; `quat_from_pitch` / `pitch_from_quat` encapsulate that.
"""

import numpy as np

_EPS = 1e-12

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def normalize(q: np.ndarray) -> np.ndarray:
    """Return q scaled to unit norm. Raises on a near-zero quaternion."""
    n = float(np.linalg.norm(q))
    if n < _EPS:
        raise ValueError("cannot normalize near-zero quaternion")
    return np.asarray(q, dtype=float) / n


def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a ⊗ b, both (w, x, y, z)."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def exp_map(r: np.ndarray) -> np.ndarray:
    """Rotation vector (rad) to unit quaternion."""
    r = np.asarray(r, dtype=float)
    angle = float(np.linalg.norm(r))
    if angle < 1e-9:
        # second-order series keeps exp/log round trips tight near zero
        w = 1.0 - angle * angle / 8.0
        xyz = 0.5 * r
    else:
        w = np.cos(0.5 * angle)
        xyz = np.sin(0.5 * angle) * (r / angle)
    return normalize(np.array([w, xyz[0], xyz[1], xyz[2]]))


def log_map(q: np.ndarray) -> np.ndarray:
    """Unit quaternion to rotation vector; input canonicalized to w >= 0."""
    q = normalize(q)
    if q[0] < 0.0:
        q = -q
    s = float(np.linalg.norm(q[1:]))
    if s < 1e-9:
        return 2.0 * q[1:]
    angle = 2.0 * np.arctan2(s, float(q[0]))
    return angle * (q[1:] / s)


def boxminus(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rotation vector r with exp_map(r) ⊗ b = a; ||r|| <= pi.

    Canonicalizing to w >= 0 before the log picks the short way around, so the
    orientation-imitation kernel stays continuous at small errors.
    """
    return log_map(multiply(normalize(a), conjugate(normalize(b))))


def rotate_vector(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Apply the rotation q to a 3-vector."""
    qv = np.array([0.0, v[0], v[1], v[2]])
    out = multiply(multiply(q, qv), conjugate(q))
    return out[1:]


def quat_from_pitch(theta: float) -> np.ndarray:
    """Planar angle (CCW in x-z) to its quaternion embedding about -y."""
    return np.array([np.cos(0.5 * theta), 0.0, -np.sin(0.5 * theta), 0.0])


def pitch_from_quat(q: np.ndarray) -> float:
    """Inverse of quat_from_pitch for planar (w, y only) quaternions."""
    q = normalize(q)
    theta = -2.0 * np.arctan2(float(q[2]), float(q[0]))
    return wrap_angle(theta)


def quat_from_yaw(psi: float) -> np.ndarray:
    """Yaw about +z, used by the path frame in the full 3D embedding."""
    return np.array([np.cos(0.5 * psi), 0.0, 0.0, np.sin(0.5 * psi)])


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = (a + np.pi) % (2.0 * np.pi) - np.pi
    if a == -np.pi:
        a = np.pi
    return float(a)


def is_planar(q: np.ndarray, tol: float = 1e-9) -> bool:
    """True if the rotation is purely about the lateral axis (x = z = 0)."""
    return abs(float(q[1])) <= tol and abs(float(q[3])) <= tol

"""Small dense kernels for SO(3) and SE(2).

Rotations are plain 3x3 ndarrays. Lie algebra elements are coordinate
vectors: the axial vector for so(3), and (xi1, xi2, xi3) in the basis

    e1 = [[0, 0, 1], [0, 0, 0], [0, 0, 0]]
    e2 = [[0, 0, 0], [0, 0, 1], [0, 0, 0]]
    e3 = [[0, 1, 0], [-1, 0, 0], [0, 0, 0]]

for se(2). Note that e3 generates a *clockwise* rotation.

Coadjoint actions follow <Ad*_g mu, xi> = <mu, Ad_g xi>, so that
Ad*_{gh} = Ad*_h o Ad*_g.
"""

from __future__ import annotations

import numpy as np

ANTISYMMETRY_TOL = 1e-10
ROTATION_TOL = 1e-10
_TAYLOR_EPS = 1e-6
_LOG_TRACE_MARGIN = 1e-9


class GeometryError(ValueError):
    """Raised when an input violates a precondition of a kernel."""


class SingularityError(GeometryError):
    """Raised when a map is evaluated at (or too close to) a singular point."""


# --------------------------------------------------------------------- so(3)


def hat(v) -> np.ndarray:
    """Skew matrix with ``hat(v) @ w == cross(v, w)``."""
    x, y, z = np.asarray(v, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(A, check: bool = True) -> np.ndarray:
    """Inverse of :func:`hat`.

    With ``check`` the input must be antisymmetric to within 1e-10
    (relative to max(1, max|A|)); otherwise only the antisymmetric part is used.
    """
    A = np.asarray(A, dtype=float)
    if A.shape != (3, 3):
        raise GeometryError(f"vee expects a 3x3 matrix, got shape {A.shape}")
    if check:
        scale = max(1.0, float(np.max(np.abs(A))))
        if np.max(np.abs(A + A.T)) > ANTISYMMETRY_TOL * scale:
            raise GeometryError("vee: matrix is not antisymmetric")
    S = 0.5 * (A - A.T)
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def is_rotation(R, tol: float = ROTATION_TOL) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    orth = np.max(np.abs(R.T @ R - np.eye(3)))
    return bool(orth <= tol and abs(np.linalg.det(R) - 1.0) <= tol)


def exp_so3(v) -> np.ndarray:
    """Rodrigues formula, with a Taylor branch for |v| < 1e-6."""
    v = np.asarray(v, dtype=float)
    theta2 = float(v @ v)
    theta = np.sqrt(theta2)
    K = hat(v)
    if theta < _TAYLOR_EPS:
        a = 1.0 - theta2 / 6.0
        b = 0.5 - theta2 / 24.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / theta2
    return np.eye(3) + a * K + b * (K @ K)


def log_so3(R) -> np.ndarray:
    """Rotation vector of ``R``; rotations by angles near pi are rejected."""
    R = np.asarray(R, dtype=float)
    tr = float(np.trace(R))
    if tr <= -1.0 + _LOG_TRACE_MARGIN:
        raise SingularityError(f"log_so3: rotation angle too close to pi (trace={tr!r})")
    s = vee(R, check=False)  # antisymmetric part: sin(theta) * axis
    sin_theta = float(np.linalg.norm(s))
    cos_theta = 0.5 * (tr - 1.0)
    theta = np.arctan2(sin_theta, cos_theta)
    if theta < _TAYLOR_EPS:
        return s * (1.0 + theta * theta / 6.0)
    return s * (theta / sin_theta)


def Ad_so3(R, xi) -> np.ndarray:
    """Adjoint action in axial coordinates: vee(R hat(xi) R^T) = R xi."""
    return np.asarray(R, dtype=float) @ np.asarray(xi, dtype=float)


def ad_star_so3(R, mu) -> np.ndarray:
    return np.asarray(R, dtype=float).T @ np.asarray(mu, dtype=float)


# -------------------------------------------------------------------- quats
# Unit quaternions (w, x, y, z); only used internally by the Moser-Veselov solve.


def quat_to_rot(q) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def rot_to_quat(R) -> np.ndarray:
    """Shepperd's method; returns the representative with w >= 0."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    diag = np.array([tr, R[0, 0], R[1, 1], R[2, 2]])
    k = int(np.argmax(diag))
    if k == 0:
        w = 0.5 * np.sqrt(1.0 + tr)
        q = np.array([w, (R[2, 1] - R[1, 2]) / (4 * w), (R[0, 2] - R[2, 0]) / (4 * w),
                      (R[1, 0] - R[0, 1]) / (4 * w)])
    elif k == 1:
        x = 0.5 * np.sqrt(1.0 + 2 * R[0, 0] - tr)
        q = np.array([(R[2, 1] - R[1, 2]) / (4 * x), x, (R[0, 1] + R[1, 0]) / (4 * x),
                      (R[0, 2] + R[2, 0]) / (4 * x)])
    elif k == 2:
        y = 0.5 * np.sqrt(1.0 + 2 * R[1, 1] - tr)
        q = np.array([(R[0, 2] - R[2, 0]) / (4 * y), (R[0, 1] + R[1, 0]) / (4 * y), y,
                      (R[1, 2] + R[2, 1]) / (4 * y)])
    else:
        z = 0.5 * np.sqrt(1.0 + 2 * R[2, 2] - tr)
        q = np.array([(R[1, 0] - R[0, 1]) / (4 * z), (R[0, 2] + R[2, 0]) / (4 * z),
                      (R[1, 2] + R[2, 1]) / (4 * z), z])
    q /= np.linalg.norm(q)
    return q if q[0] >= 0 else -q


def quat_mul(p, q) -> np.ndarray:
    pw, px, py, pz = p
    qw, qx, qy, qz = q
    return np.array(
        [
            pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw,
        ]
    )


def quat_exp(v) -> np.ndarray:
    """Unit quaternion of the rotation exp_so3(v)."""
    v = np.asarray(v, dtype=float)
    half = 0.5 * float(np.linalg.norm(v))
    if half < _TAYLOR_EPS:
        s = 0.5 - half * half / 12.0
    else:
        s = np.sin(half) / (2.0 * half)
    return np.concatenate(([np.cos(half)], s * v))


# -------------------------------------------------------------------- SE(2)


def se2_matrix(theta: float, x: float, y: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, x], [s, c, y], [0.0, 0.0, 1.0]])


def se2_params(g) -> tuple[float, float, float]:
    """(theta, x, y) of a homogeneous SE(2) matrix."""
    g = np.asarray(g, dtype=float)
    return float(np.arctan2(g[1, 0], g[0, 0])), float(g[0, 2]), float(g[1, 2])


def is_se2(g, tol: float = ROTATION_TOL) -> bool:
    g = np.asarray(g, dtype=float)
    if g.shape != (3, 3) or not np.all(np.isfinite(g)):
        return False
    if np.max(np.abs(g[2] - [0.0, 0.0, 1.0])) > tol:
        return False
    R = g[:2, :2]
    return bool(np.max(np.abs(R.T @ R - np.eye(2))) <= tol and abs(np.linalg.det(R) - 1.0) <= tol)


def se2_inv(g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    R = g[:2, :2]
    out = np.eye(3)
    out[:2, :2] = R.T
    out[:2, 2] = -R.T @ g[:2, 2]
    return out


def se2_hat(xi) -> np.ndarray:
    a, b, c = np.asarray(xi, dtype=float)
    return np.array([[0.0, c, a], [-c, 0.0, b], [0.0, 0.0, 0.0]])


def se2_vee(A, check: bool = True) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if check:
        scale = max(1.0, float(np.max(np.abs(A))))
        bad = (abs(A[0, 0]) + abs(A[1, 1]) + abs(A[0, 1] + A[1, 0]) + float(np.sum(np.abs(A[2]))))
        if bad > ANTISYMMETRY_TOL * scale:
            raise GeometryError("se2_vee: matrix is not in se(2)")
    return np.array([A[0, 2], A[1, 2], 0.5 * (A[0, 1] - A[1, 0])])


def se2_exp(xi) -> np.ndarray:
    a, b, c = np.asarray(xi, dtype=float)
    theta = -c  # e3 turns clockwise
    if abs(theta) < _TAYLOR_EPS:
        s_t = 1.0 - theta * theta / 6.0
        c_t = theta / 2.0 - theta**3 / 24.0
    else:
        s_t = np.sin(theta) / theta
        c_t = (1.0 - np.cos(theta)) / theta
    V = np.array([[s_t, -c_t], [c_t, s_t]])
    g = se2_matrix(theta, 0.0, 0.0)
    g[:2, 2] = V @ np.array([a, b])
    return g


def Ad_se2(g) -> np.ndarray:
    """Matrix of xi -> se2_vee(g se2_hat(xi) g^-1) in the (e1, e2, e3) basis."""
    g = np.asarray(g, dtype=float)
    R = g[:2, :2]
    px, py = g[0, 2], g[1, 2]
    out = np.zeros((3, 3))
    out[:2, :2] = R
    out[:2, 2] = [-py, px]
    out[2, 2] = 1.0
    return out


def ad_star_se2(g, mu) -> np.ndarray:
    return Ad_se2(g).T @ np.asarray(mu, dtype=float)


def ad_star(g, mu, group: str = "so3") -> np.ndarray:
    """Coadjoint action Ad*_g mu for ``group`` in {"so3", "se2"}."""
    if group == "so3":
        return ad_star_so3(g, mu)
    if group == "se2":
        return ad_star_se2(g, mu)
    raise GeometryError(f"unknown group {group!r}")

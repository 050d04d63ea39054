"""Reference formulas written independently of the package internals.

Each oracle is derived by hand from the Lagrangian it refers to and uses
only numpy (plus scipy's Rotation for rotation matrices), so agreement with
the package is a genuine cross-check.
"""

import numpy as np
from scipy.spatial.transform import Rotation


def rotvec_matrix(v):
    return Rotation.from_rotvec(np.asarray(v, dtype=float)).as_matrix()


def skew(v):
    return np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]], dtype=float)


def body_tensor(inertia):
    Id = np.diag(inertia) if np.ndim(inertia) == 1 else np.asarray(inertia)
    return 0.5 * np.trace(Id) * np.eye(3) - Id


# harmonic oscillator L(x, y) = h [m/2 |(y-x)/h|^2 - m w^2/2 |(x+y)/2|^2]

def ho_grad(x, y, m, w, h):
    """(dL/dx, dL/dy) by hand."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    dx = -m * (y - x) / h - h * m * w * w * (x + y) / 4.0
    dy = m * (y - x) / h - h * m * w * w * (x + y) / 4.0
    return dx, dy


def ho_mixed(m, w, h, d):
    # right(e_i) is -d/dx_i and left(e_j) is d/dy_j, so M = -d2L/dxdy
    return (m / h + h * m * w * w / 4.0) * np.eye(d)


def ho_next(x, y, m, w, h):
    """Solve dL/dy(x, y) + dL/dx(y, z) = 0 for z (linear in z)."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    a = m / h + h * m * w * w / 4.0
    b = m * (y - x) / h - h * m * w * w * (x + y) / 4.0 + m * y / h - h * m * w * w * y / 4.0
    return b / a


# heavy top L(G, W) = -(1/h) tr(II W) - h mgl G.e, right action G.W = W^T G

def heavy_top_left(G, W, K, II, h):
    """d/dt L(G, W exp(tK)) at t=0 = -(1/h) tr(II W K)."""
    return -np.trace(II @ W @ skew(K)) / h


def heavy_top_right(G, W, K, II, h, mgl, e):
    """d/ds L(exp(sK) G, exp(sK) W) at s=0 = -(1/h) tr(II K W) - h mgl (K x G).e."""
    return -np.trace(II @ skew(K) @ W) / h - h * mgl * np.cross(K, G) @ e


def heavy_top_mixed(W, II, h):
    """right(e_i) left(e_j) L = -(1/h) tr(II e_i^ W e_j^)."""
    return np.array([[-np.trace(II @ skew(a) @ W @ skew(b)) / h for b in np.eye(3)] for a in np.eye(3)])


def rigid_body_right(W, K, II):
    """For L(W) = -tr(II W): -d/dt L(exp(-tK) W) at t=0 = -tr(II K W)."""
    return -np.trace(II @ skew(K) @ W)


def lie_poisson_by_pairing(mu, g):
    """Coadjoint action via <Ad*_g mu, xi> = <mu, vee(g xi^ g^T)> on a basis."""
    out = np.empty(3)
    for i, xi in enumerate(np.eye(3)):
        A = g @ skew(xi) @ g.T
        out[i] = mu @ np.array([A[2, 1], A[0, 2], A[1, 0]])
    return out


def linearized_mv(Pi, II):
    """For small W = exp(s^): W II - II W^T ~ s^ II + II s^ = ((tr II) Id - II) s, hatted."""
    return np.linalg.solve(np.trace(II) * np.eye(3) - II, Pi)

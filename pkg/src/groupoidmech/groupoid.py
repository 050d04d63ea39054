"""Lie groupoid interface and the discrete Lagrangian calculus built on it.

Everything here is expressed through the structural maps of a
:class:`Groupoid` plus a retraction ``retract(x, v, t)``: a curve in the
source fiber over ``x`` that starts at the identity with velocity ``v``.
Invariant vector fields then act on a function ``L`` by

    left field  at g along v in A_{beta(g)}:   d/dt L(g . retract(beta(g), v, t))
    right field at h along v in A_{alpha(h)}:  -d/dt L(retract(alpha(h), v, t)^-1 . h)

and both derivatives are taken by central differences unless the Lagrangian
supplies exact Legendre transforms and the caller asks for them.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

DEFAULT_FD_STEP = 1e-5
COMPOSABLE_TOL = 1e-9
_EPS = np.finfo(float).eps
# safety factor on the roundoff estimate eps*|f|/step^k used to call a matrix singular
_NOISE_FACTOR = 64.0


class CompositionError(ValueError):
    """Raised when two elements are not composable."""


class Groupoid(abc.ABC):
    """A Lie groupoid with a trivialised algebroid over its working chart.

    Subclasses fix how elements and base points are represented; the calculus
    in this module only goes through these methods.
    """

    name = "groupoid"

    @abc.abstractmethod
    def source(self, g): ...

    @abc.abstractmethod
    def target(self, g): ...

    @abc.abstractmethod
    def identity(self, x): ...

    @abc.abstractmethod
    def compose(self, g, h): ...

    @abc.abstractmethod
    def invert(self, g): ...

    @abc.abstractmethod
    def fiber_dim(self) -> int: ...

    @abc.abstractmethod
    def retract(self, x, v, t: float): ...

    @abc.abstractmethod
    def to_chart(self, g) -> np.ndarray: ...

    @abc.abstractmethod
    def from_chart(self, c): ...

    @abc.abstractmethod
    def random_element(self, rng: np.random.Generator, source=None):
        """Random element, optionally with prescribed source point."""

    def chart_dim(self) -> int:
        return int(self.to_chart(self.identity(self.random_base(np.random.default_rng(0)))).size)

    def fiber_basis(self, x) -> np.ndarray:
        """Rows are the basis vectors of A_x G in fiber coordinates."""
        return np.eye(self.fiber_dim())

    def base_coords(self, x) -> np.ndarray:
        if x is None:
            return np.zeros(0)
        return np.atleast_1d(np.asarray(x, dtype=float)).ravel()

    def random_base(self, rng: np.random.Generator):
        return self.source(self.random_element(rng))

    def composable(self, g, h, tol: float = COMPOSABLE_TOL) -> bool:
        a = self.base_coords(self.target(g))
        b = self.base_coords(self.source(h))
        if a.size == 0:
            return True
        return bool(np.max(np.abs(a - b)) <= tol * max(1.0, float(np.max(np.abs(a)))))

    def multiply(self, g, h):
        """compose() with a composability check."""
        if not self.composable(g, h):
            raise CompositionError(f"{self.name}: elements are not composable")
        return self.compose(g, h)

    def continue_guess(self, g):
        """An element composable with ``g``, used to warm-start the next step.

        Defaults to the identity at the target ("zero velocity"); models
        override this with a constant-velocity continuation.
        """
        return self.identity(self.target(g))

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class DiscreteLagrangian:
    """A real function on a groupoid.

    ``fn`` maps an element to a float. Subclasses may additionally define
    ``exact_legendre_plus(g)`` / ``exact_legendre_minus(h)`` returning
    coordinates in the dual fiber basis, and ``exact_regularity_matrix(g)``.
    These are only used when a caller passes ``exact=True``.
    """

    def __init__(self, groupoid: Groupoid, fn: Callable[[Any], float] | None = None):
        self.groupoid = groupoid
        if fn is not None:
            self.fn = fn

    def fn(self, g) -> float:  # pragma: no cover - overridden
        raise NotImplementedError

    def __call__(self, g) -> float:
        return float(self.fn(g))

    @property
    def has_exact_legendre(self) -> bool:
        return hasattr(self, "exact_legendre_plus") and hasattr(self, "exact_legendre_minus")


@dataclass(frozen=True)
class Momentum:
    """A covector in A*_x G, stored as coordinates in the dual basis."""

    base: Any
    coords: np.ndarray

    def pair(self, v) -> float:
        return float(np.dot(self.coords, v))

    def __sub__(self, other: "Momentum") -> "Momentum":
        return Momentum(self.base, self.coords - other.coords)


# ------------------------------------------------------------ derivatives


def _central(f: Callable[[float], float], delta: float) -> float:
    return (f(delta) - f(-delta)) / (2.0 * delta)


def left_derivative(L: DiscreteLagrangian, g, v, delta: float = DEFAULT_FD_STEP) -> float:
    """Left-invariant field of ``v`` (a fiber vector at beta(g)) applied to L at g."""
    G = L.groupoid
    x = G.target(g)
    return _central(lambda t: L(G.compose(g, G.retract(x, v, t))), delta)


def right_derivative(L: DiscreteLagrangian, h, v, delta: float = DEFAULT_FD_STEP) -> float:
    """Right-invariant field of ``v`` (a fiber vector at alpha(h)) applied to L at h."""
    G = L.groupoid
    x = G.source(h)
    return -_central(lambda t: L(G.compose(G.invert(G.retract(x, v, t)), h)), delta)


def legendre_plus(L: DiscreteLagrangian, g, delta: float = DEFAULT_FD_STEP,
                  exact: bool = False) -> Momentum:
    G = L.groupoid
    x = G.target(g)
    if exact and L.has_exact_legendre:
        return Momentum(x, np.asarray(L.exact_legendre_plus(g), dtype=float))
    basis = G.fiber_basis(x)
    return Momentum(x, np.array([left_derivative(L, g, e, delta) for e in basis]))


def legendre_minus(L: DiscreteLagrangian, h, delta: float = DEFAULT_FD_STEP,
                   exact: bool = False) -> Momentum:
    G = L.groupoid
    x = G.source(h)
    if exact and L.has_exact_legendre:
        return Momentum(x, np.asarray(L.exact_legendre_minus(h), dtype=float))
    basis = G.fiber_basis(x)
    return Momentum(x, np.array([right_derivative(L, h, e, delta) for e in basis]))


def del_residual(L: DiscreteLagrangian, g, h, delta: float = DEFAULT_FD_STEP,
                 exact: bool = False) -> Momentum:
    """Discrete Euler-Lagrange operator at the composable pair (g, h).

    Computed as F+L(g) - F-L(h); it vanishes exactly on solutions.
    """
    if not L.groupoid.composable(g, h):
        raise CompositionError("del_residual: (g, h) is not a composable pair")
    return legendre_plus(L, g, delta, exact) - legendre_minus(L, h, delta, exact)


# ------------------------------------------------------------ regularity


def fd_noise_floor(scale: float, delta: float, order: int) -> float:
    """Rounding-noise level of an ``order``-fold central difference of a quantity of size ``scale``."""
    return _NOISE_FACTOR * _EPS * max(abs(scale), 1e-300) / delta**order


def singular_values_condition(A: np.ndarray, noise: float) -> float:
    """2-norm condition number, infinite when a singular value is below ``noise``."""
    if A.size == 0:
        return 1.0
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] <= noise or s[-1] <= noise or s[-1] == 0.0:
        return float("inf")
    return float(s[0] / s[-1])


def regularity_matrix(L: DiscreteLagrangian, g, delta: float = DEFAULT_FD_STEP,
                      exact: bool = False) -> tuple[np.ndarray, float]:
    """Matrix of right(e_i) left(e_j) L at g, and its condition number.

    With ``exact`` the inner derivative comes from the model's exact F+L
    (or the whole matrix from ``exact_regularity_matrix``), so only one level
    of differencing remains. A matrix whose entries are at the level of the
    rounding noise of the differences gets condition number ``inf``.
    """
    G = L.groupoid
    n = G.fiber_dim()
    a = G.source(g)
    Ea = G.fiber_basis(a)

    if exact and hasattr(L, "exact_regularity_matrix"):
        M = np.asarray(L.exact_regularity_matrix(g), dtype=float)
        return M, singular_values_condition(M, fd_noise_floor(max(1.0, np.max(np.abs(M))), 1.0, 0))

    def moved(e, s):
        return G.compose(G.invert(G.retract(a, e, s)), g)

    M = np.empty((n, n))
    if exact and L.has_exact_legendre:
        scale = float(np.max(np.abs(L.exact_legendre_plus(g)), initial=0.0))
        for i, e in enumerate(Ea):
            dp = (np.asarray(L.exact_legendre_plus(moved(e, delta)))
                  - np.asarray(L.exact_legendre_plus(moved(e, -delta))))
            M[i] = -dp / (2.0 * delta)
        noise = fd_noise_floor(scale, delta, 1)
    else:
        Eb = G.fiber_basis(G.target(g))
        for i, e in enumerate(Ea):
            gp, gm = moved(e, delta), moved(e, -delta)
            for j, f in enumerate(Eb):
                M[i, j] = -(left_derivative(L, gp, f, delta)
                            - left_derivative(L, gm, f, delta)) / (2.0 * delta)
        noise = fd_noise_floor(L(g), delta, 2)
    return M, singular_values_condition(M, noise)


def omega_matrix(M: np.ndarray) -> np.ndarray:
    """Poincare-Cartan 2-section in the lift basis, ordered (right lifts, left lifts)."""
    n = M.shape[0]
    Z = np.zeros((n, n))
    return np.block([[Z, -M], [M.T, Z]])


def omega_L(L: DiscreteLagrangian, g, u, w, delta: float = DEFAULT_FD_STEP,
            exact: bool = False) -> float:
    """Evaluate Omega_L(g) on two lifted pairs.

    ``u = (X, Y)``: X are coordinates of the right-invariant part (fiber at
    alpha(g)), Y of the left-invariant part (fiber at beta(g)).
    """
    M, _ = regularity_matrix(L, g, delta, exact)
    X, Y = (np.asarray(c, dtype=float) for c in u)
    Xp, Yp = (np.asarray(c, dtype=float) for c in w)
    return float(-X @ M @ Yp + Xp @ M @ Y)


# ------------------------------------------------------------ axiom suite


def groupoid_axiom_defects(G: Groupoid, rng: np.random.Generator, samples: int = 100,
                           t_values=(0.3, -0.7)) -> dict[str, float]:
    """Largest violation of each groupoid law over random composable triples.

    Differences are measured in chart coordinates (base coordinates for the
    source/target laws).
    """
    chart = G.to_chart
    base = G.base_coords
    worst: dict[str, float] = {}

    def record(key, a, b):
        d = float(np.max(np.abs(np.asarray(a) - np.asarray(b)), initial=0.0))
        worst[key] = max(worst.get(key, 0.0), d)

    n = G.fiber_dim()
    for _ in range(samples):
        g = G.random_element(rng)
        h = G.random_element(rng, source=G.target(g))
        k = G.random_element(rng, source=G.target(h))
        x = G.source(g)
        e = G.identity(x)
        record("identity_source", base(G.source(e)), base(x))
        record("identity_target", base(G.target(e)), base(x))
        gh = G.compose(g, h)
        record("product_source", base(G.source(gh)), base(G.source(g)))
        record("product_target", base(G.target(gh)), base(G.target(h)))
        record("associativity", chart(G.compose(gh, k)), chart(G.compose(g, G.compose(h, k))))
        record("left_identity", chart(G.compose(G.identity(G.source(g)), g)), chart(g))
        record("right_identity", chart(G.compose(g, G.identity(G.target(g)))), chart(g))
        gi = G.invert(g)
        record("right_inverse", chart(G.compose(g, gi)), chart(G.identity(G.source(g))))
        record("left_inverse", chart(G.compose(gi, g)), chart(G.identity(G.target(g))))
        v = rng.standard_normal(n)
        record("retract_zero", chart(G.retract(x, v, 0.0)), chart(e))
        for t in t_values:
            record("retract_source", base(G.source(G.retract(x, v, t))), base(x))
    return worst

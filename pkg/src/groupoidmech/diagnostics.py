"""Numerical checks of the structure preserved by the discrete flow."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .groupoid import (
    DiscreteLagrangian,
    Groupoid,
    Momentum,
    left_derivative,
    legendre_minus,
    legendre_plus,
    omega_matrix,
    regularity_matrix,
    right_derivative,
)
from .solver import NewtonConfig, evolve_step, invert_legendre_minus

RANK_TOL = 1e-8


class DecompositionError(RuntimeError):
    """Lift bases are (numerically) dependent at the image point."""


def _zero(x) -> float:
    return 0.0


@dataclass(frozen=True)
class NoetherSymmetry:
    """A section X of the algebroid with gauge function f (zero for strict invariance)."""

    X: Callable[[Any], np.ndarray]
    f: Callable[[Any], float] = _zero


@dataclass
class ConservationReport:
    values: dict[str, np.ndarray] = field(default_factory=dict)
    max_abs_drift: dict[str, float] = field(default_factory=dict)
    max_rel_drift: dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_series(cls, series: dict[str, Sequence[float]]) -> "ConservationReport":
        rep = cls()
        for name, vals in series.items():
            v = np.asarray(vals, dtype=float)
            rep.values[name] = v
            drift = float(np.max(np.abs(v - v[0]))) if v.size else 0.0
            rep.max_abs_drift[name] = drift
            rep.max_rel_drift[name] = drift / abs(v[0]) if v.size and v[0] != 0 else drift
        return rep


def _invariant_derivative(L: DiscreteLagrangian, g, v, left: bool, delta: float, exact: bool) -> float:
    # with exact transforms the derivative is the pairing of F+L or F-L with v
    G = L.groupoid
    if exact and L.has_exact_legendre:
        mu = legendre_plus(L, g, delta, True) if left else legendre_minus(L, g, delta, True)
        base = G.target(g) if left else G.source(g)
        coef, *_ = np.linalg.lstsq(np.atleast_2d(G.fiber_basis(base)).T, np.asarray(v, dtype=float), rcond=None)
        return float(mu.coords @ coef)
    return left_derivative(L, g, v, delta) if left else right_derivative(L, g, v, delta)


def noether_defect(L: DiscreteLagrangian, sym: NoetherSymmetry, samples, delta: float = 1e-5,
                   exact: bool = False) -> float:
    """max |-right(X)(L) + left(X)(L) - f(beta) + f(alpha)| over the sample elements."""
    G = L.groupoid
    worst = 0.0
    for g in samples:
        a, b = G.source(g), G.target(g)
        d = (-_invariant_derivative(L, g, sym.X(a), False, delta, exact)
             + _invariant_derivative(L, g, sym.X(b), True, delta, exact)
             - sym.f(b) + sym.f(a))
        worst = max(worst, abs(d))
    return worst


def noether_constant(L: DiscreteLagrangian, sym: NoetherSymmetry, g, delta: float = 1e-5,
                     exact: bool = False) -> float:
    """right(X)(L)(g) - f(alpha(g)); constant along solutions when ``sym`` is a symmetry."""
    a = L.groupoid.source(g)
    return _invariant_derivative(L, g, sym.X(a), False, delta, exact) - sym.f(a)


# ----------------------------------------------------------- symplecticity


def _right_curve(G: Groupoid, g, v, s):
    # tangent at s=0 is the right-invariant field of v at g
    return G.compose(G.invert(G.retract(G.source(g), v, -s)), g)


def _left_curve(G: Groupoid, g, v, s):
    return G.compose(g, G.retract(G.target(g), v, s))


def _tangent(G: Groupoid, curve, s):
    return (G.to_chart(curve(s)) - G.to_chart(curve(-s))) / (2.0 * s)


def symplectic_residual(L: DiscreteLagrangian, g, h_guess=None, cfg: NewtonConfig | None = None,
                        step: Callable | None = None) -> float:
    """|| P^T Omega_L(xi(g)) P - Omega_L(g) ||_inf in lift bases.

    ``step(g, guess)`` computes xi(g); by default the Newton solver with
    ``cfg``. The prolongation P sends
    (right e_i, 0) to (0, T xi(right e_i)) and
    (0, left e_j) to (-right e_j(xi g), T xi(left e_j) + right e_j(xi g)),
    the second components being decomposed on the left-invariant frame at
    xi(g) by least squares in chart coordinates. Tangent vectors and
    regularity matrices use the finite-difference step of ``cfg``.
    """
    cfg = cfg or NewtonConfig()
    G = L.groupoid
    n = G.fiber_dim()
    if n == 0:
        return 0.0
    if step is None:
        def step(el, guess):
            return evolve_step(L, el, guess, cfg)[0]
    s = cfg.fd_step
    h0 = step(g, h_guess if h_guess is not None else G.continue_guess(g))
    Ea = G.fiber_basis(G.source(g))
    Eb = G.fiber_basis(G.target(g))
    Ec = G.fiber_basis(G.target(h0))

    left_frame = np.column_stack([_tangent(G, lambda t, e=e: _left_curve(G, h0, e, t), s) for e in Ec])
    right_frame = np.column_stack([_tangent(G, lambda t, e=e: _right_curve(G, h0, e, t), s) for e in Eb])
    for frame in (left_frame, right_frame):
        sv = np.linalg.svd(frame, compute_uv=False)
        if sv[-1] <= RANK_TOL * sv[0]:
            raise DecompositionError(f"lift frame at xi(g) is rank deficient (sigma ratio {sv[-1] / sv[0]:.2e})")

    def in_left_frame(vec):
        coef, *_ = np.linalg.lstsq(left_frame, vec, rcond=None)
        miss = np.max(np.abs(left_frame @ coef - vec))
        if miss > 1e-4 * max(1.0, np.max(np.abs(vec))):
            raise DecompositionError(f"tangent not in the source fiber at xi(g) (miss {miss:.2e})")
        return coef

    P = np.zeros((2 * n, 2 * n))
    for i, e in enumerate(Ea):
        dxi = _tangent(G, lambda t: step(_right_curve(G, g, e, t), h0), s)
        P[n:, i] = in_left_frame(dxi)
    for j, e in enumerate(Eb):
        def xi_left(t):
            guess = G.compose(G.invert(G.retract(G.target(g), e, t)), h0)
            return step(_left_curve(G, g, e, t), guess)
        P[j, n + j] = -1.0
        P[n:, n + j] = in_left_frame(_tangent(G, xi_left, s) + right_frame[:, j])

    M0, _ = regularity_matrix(L, g, s, cfg.exact)
    M1, _ = regularity_matrix(L, h0, s, cfg.exact)
    return float(np.max(np.abs(P.T @ omega_matrix(M1) @ P - omega_matrix(M0))))


def hamiltonian_symplectic_defect(L: DiscreteLagrangian, q, p, h_guess=None,
                                  cfg: NewtonConfig | None = None) -> float:
    """|| DF^T J DF - J ||_inf for the pair-groupoid map (q, p) -> (q', p').

    F inverts F-L at (q, p) and applies F+L; DF by central differences.
    """
    cfg = cfg or NewtonConfig()
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    d = q.size
    s = cfg.fd_step
    if h_guess is None:
        h_guess = (q, q.copy())

    def F(z):
        qq, pp = z[:d], z[d:]
        guess = (qq, h_guess[1] + (qq - q))
        h = invert_legendre_minus(L, Momentum(qq, pp), guess, cfg)
        return np.concatenate([h[1], legendre_plus(L, h, s, cfg.exact).coords])

    z0 = np.concatenate([q, p])
    DF = np.empty((2 * d, 2 * d))
    for k in range(2 * d):
        dz = np.zeros(2 * d)
        dz[k] = s
        DF[:, k] = (F(z0 + dz) - F(z0 - dz)) / (2 * s)
    J = np.block([[np.zeros((d, d)), np.eye(d)], [-np.eye(d), np.zeros((d, d))]])
    return float(np.max(np.abs(DF.T @ J @ DF - J)))


# --------------------------------------------------------------- reduction


@dataclass(frozen=True)
class GroupoidMorphism:
    """A groupoid morphism with its base map and induced algebroid map.

    ``fiber_map(x, v)`` sends fiber coordinates at x upstairs to fiber
    coordinates at base_map(x) downstairs.
    """

    source: Groupoid
    target: Groupoid
    element_map: Callable
    base_map: Callable
    fiber_map: Callable = lambda x, v: np.asarray(v, dtype=float)

    def __call__(self, g):
        return self.element_map(g)


def identity_morphism(G: Groupoid) -> GroupoidMorphism:
    return GroupoidMorphism(G, G, lambda g: g, lambda x: x)


def trajectory_discrepancy(phi: GroupoidMorphism, upstairs: Sequence, downstairs: Sequence) -> float:
    if len(upstairs) != len(downstairs):
        raise ValueError("trajectories have different lengths")
    H = phi.target
    worst = 0.0
    for a, b in zip(upstairs, downstairs):
        worst = max(worst, float(np.max(np.abs(H.to_chart(phi(a)) - H.to_chart(b)), initial=0.0)))
    return worst


def pairing_discrepancy(phi: GroupoidMorphism, L_up: DiscreteLagrangian, L_down: DiscreteLagrangian,
                        pairs: Sequence, vectors: Sequence, delta: float = 1e-5) -> float:
    """max |D_DEL L_up(g, h)(v) - D_DEL L_down(phi g, phi h)(A phi v)| over samples."""
    worst = 0.0
    for (g, h), v in zip(pairs, vectors):
        up = left_derivative(L_up, g, v, delta) - right_derivative(L_up, h, v, delta)
        x = L_up.groupoid.target(g)
        w = phi.fiber_map(x, v)
        pg, ph = phi(g), phi(h)
        down = left_derivative(L_down, pg, w, delta) - right_derivative(L_down, ph, w, delta)
        worst = max(worst, abs(up - down))
    return worst


def lagrangian_mismatch(phi: GroupoidMorphism, L_up: DiscreteLagrangian, L_down: DiscreteLagrangian,
                        samples: Sequence) -> float:
    return max((abs(L_up(g) - L_down(phi(g))) for g in samples), default=0.0)


def reduction_check(phi: GroupoidMorphism, L_up: DiscreteLagrangian, L_down: DiscreteLagrangian,
                    upstairs: Sequence = (), downstairs: Sequence = (), pairs: Sequence = (),
                    vectors: Sequence = (), delta: float = 1e-5) -> float:
    """Largest of the projected-trajectory and DEL-pairing discrepancies.

    ``pairs`` are composable upstairs pairs (g, h), ``vectors`` fiber
    vectors at beta(g). Raises ValueError if L_up differs from L_down o phi
    by more than 1e-12 on the sampled elements.
    """
    samples = [g for pair in pairs for g in pair] + list(upstairs)
    mismatch = lagrangian_mismatch(phi, L_up, L_down, samples)
    if mismatch > 1e-12 * max(1.0, max((abs(L_up(g)) for g in samples), default=1.0)):
        raise ValueError(f"L_up is not L_down o phi (mismatch {mismatch:.2e})")
    worst = 0.0
    if len(upstairs) or len(downstairs):
        worst = trajectory_discrepancy(phi, upstairs, downstairs)
    if len(pairs):
        worst = max(worst, pairing_discrepancy(phi, L_up, L_down, pairs, vectors, delta))
    return worst

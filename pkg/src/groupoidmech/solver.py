"""Newton iteration for the discrete flow and the inverse Legendre transform.

The unknown h is kept in the source fiber of the guess: each accepted
update is h <- h . retract(beta(h), sum theta_i e_i, 1), so composability with
g never degrades. Because left and right invariant fields commute, the
Jacobian of the residual in these re-centred coordinates is minus the
regularity matrix at the current iterate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .groupoid import (
    DEFAULT_FD_STEP,
    CompositionError,
    DiscreteLagrangian,
    Momentum,
    fd_noise_floor,
    legendre_minus,
    legendre_plus,
    singular_values_condition,
)

log = logging.getLogger(__name__)

JACOBIAN_MODES = ("finite-difference", "model-analytic")
MAX_CONDITION = 1e12
_MAX_HALVINGS = 6
_STALL_LIMIT = 4


class SolverError(RuntimeError):
    """Base class for solver failures; ``step`` is set by run_trajectory."""

    def __init__(self, message: str, step: int | None = None, report: "StepReport | None" = None):
        super().__init__(message)
        self.step = step
        self.report = report
        self.partial = None

    def __str__(self):
        msg = super().__str__()
        return msg if self.step is None else f"step {self.step}: {msg}"


class MaxItersExceeded(SolverError):
    pass


class SingularJacobian(SolverError):
    pass


@dataclass(frozen=True)
class NewtonConfig:
    max_iters: int = 50
    residual_tol: float = 1e-11
    fd_step: float = DEFAULT_FD_STEP
    jacobian_mode: str = "finite-difference"

    def __post_init__(self):
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")
        if self.jacobian_mode not in JACOBIAN_MODES:
            raise ValueError(f"jacobian_mode must be one of {JACOBIAN_MODES}")

    @property
    def exact(self) -> bool:
        return self.jacobian_mode == "model-analytic"


@dataclass(frozen=True)
class StepReport:
    iterations: int
    residual_norm: float
    condition: float
    residual_history: tuple = ()


@dataclass
class Trajectory:
    elements: list
    residual_norms: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    reports: list = field(default_factory=list)

    def __len__(self):
        return len(self.elements)


def _shift(G, h, theta, basis):
    return G.compose(h, G.retract(G.target(h), theta @ basis, 1.0))


def _newton(L: DiscreteLagrangian, target: np.ndarray, h, cfg: NewtonConfig):
    """Solve legendre_minus(L, h) = target over the source fiber of h."""
    G = L.groupoid
    n = G.fiber_dim()
    delta, exact = cfg.fd_step, cfg.exact

    def residual(el):
        return target - legendre_minus(L, el, delta, exact).coords

    if n == 0:
        return h, StepReport(0, 0.0, 1.0, (0.0,))

    r = residual(h)
    rn = float(np.max(np.abs(r)))
    history = [rn]
    if not np.isfinite(rn):
        raise SolverError("non-finite residual at the initial guess", report=StepReport(0, rn, float("nan"), (rn,)))
    cond = float("nan")
    best = rn
    stalls = 0
    for it in range(1, cfg.max_iters + 1):
        if rn <= cfg.residual_tol:
            return h, StepReport(it - 1, rn, cond, tuple(history))
        basis = G.fiber_basis(G.target(h))
        J = np.empty((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = delta
            J[:, j] = (residual(_shift(G, h, e, basis)) - residual(_shift(G, h, -e, basis))) / (2 * delta)
        scale = float(np.max(np.abs(target), initial=0.0)) + float(np.max(np.abs(r)))
        noise = fd_noise_floor(scale, delta, 1) if exact else fd_noise_floor(L(h), delta, 2)
        if not np.all(np.isfinite(J)):
            raise SolverError(f"non-finite Jacobian at iteration {it}", report=StepReport(it, rn, cond, tuple(history)))
        cond = singular_values_condition(J, noise)
        if not cond < MAX_CONDITION:
            raise SingularJacobian(
                f"Jacobian is singular (condition {cond:.3e}) at iteration {it}",
                report=StepReport(it, rn, cond, tuple(history)))
        dtheta = np.linalg.solve(J, -r)
        step = 1.0
        for _ in range(_MAX_HALVINGS):
            h_new = _shift(G, h, step * dtheta, basis)
            r_new = residual(h_new)
            rn_new = float(np.max(np.abs(r_new)))
            if rn_new <= rn or rn_new <= cfg.residual_tol:
                break
            step *= 0.5
        if not np.isfinite(rn_new):
            raise SolverError(f"non-finite residual at iteration {it}", report=StepReport(it, rn_new, cond, tuple(history)))
        h, r, rn = h_new, r_new, rn_new
        history.append(rn)
        log.debug("newton it=%d residual=%.3e cond=%.3e damping=%g", it, rn, cond, step)
        if rn < best:
            best, stalls = rn, 0
        else:
            stalls += 1
            if stalls >= _STALL_LIMIT and rn > cfg.residual_tol:
                raise MaxItersExceeded(
                    f"residual stagnated at {rn:.3e} > tol {cfg.residual_tol:.1e} "
                    "(finite-difference noise floor? try model-analytic mode or a looser tol)",
                    report=StepReport(it, rn, cond, tuple(history)))
    if rn <= cfg.residual_tol:
        return h, StepReport(cfg.max_iters, rn, cond, tuple(history))
    raise MaxItersExceeded(f"no convergence in {cfg.max_iters} iterations, residual {rn:.3e}",
                           report=StepReport(cfg.max_iters, rn, cond, tuple(history)))


def evolve_step(L: DiscreteLagrangian, g, h_guess, cfg: NewtonConfig | None = None):
    """Find h composable with g solving the discrete Euler-Lagrange equations.

    Returns ``(h, StepReport)``.
    """
    cfg = cfg or NewtonConfig()
    G = L.groupoid
    if not G.composable(g, h_guess):
        raise CompositionError("evolve_step: h_guess is not composable with g")
    target = legendre_plus(L, g, cfg.fd_step, cfg.exact).coords
    return _newton(L, target, h_guess, cfg)


def invert_legendre_minus(L: DiscreteLagrangian, mu: Momentum, h_guess,
                          cfg: NewtonConfig | None = None, return_report: bool = False):
    """Element h over base(mu) with legendre_minus(L, h) = mu."""
    cfg = cfg or NewtonConfig()
    G = L.groupoid
    a = G.base_coords(G.source(h_guess))
    b = G.base_coords(mu.base)
    if a.shape != b.shape or (a.size and np.max(np.abs(a - b)) > 1e-9 * max(1.0, np.max(np.abs(a)))):
        raise CompositionError("invert_legendre_minus: source of h_guess differs from base(mu)")
    h, report = _newton(L, np.asarray(mu.coords, dtype=float), h_guess, cfg)
    return (h, report) if return_report else h


def hamiltonian_step(L: DiscreteLagrangian, mu: Momentum, h_guess,
                     cfg: NewtonConfig | None = None) -> Momentum:
    """Discrete Hamiltonian flow mu -> F+L((F-L)^-1(mu))."""
    cfg = cfg or NewtonConfig()
    h = invert_legendre_minus(L, mu, h_guess, cfg)
    return legendre_plus(L, h, cfg.fd_step, cfg.exact)


def run_trajectory(L: DiscreteLagrangian, g0, N: int, cfg: NewtonConfig | None = None,
                   h_guess: Any = None) -> Trajectory:
    """Elements g_0..g_N with (g_k, g_k+1) solving the discrete equations.

    ``h_guess`` seeds the first step; later steps use the groupoid's
    constant-velocity continuation of the previous element. Failures are
    re-raised with ``step`` set to the index of the step being computed and
    ``partial`` holding the trajectory up to the previous step.
    """
    if N < 0:
        raise ValueError("N must be non-negative")
    cfg = cfg or NewtonConfig()
    G = L.groupoid
    traj = Trajectory([g0], [float("nan")], [0], [None])
    g = g0
    for k in range(1, N + 1):
        guess = h_guess if (k == 1 and h_guess is not None) else G.continue_guess(g)
        try:
            h, report = evolve_step(L, g, guess, cfg)
        except SolverError as exc:
            exc.step = k
            exc.partial = traj
            raise
        traj.elements.append(h)
        traj.residual_norms.append(report.residual_norm)
        traj.iterations.append(report.iterations)
        traj.reports.append(report)
        g = h
    return traj

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose

from groupoidmech.groupoid import (
    CompositionError,
    DiscreteLagrangian,
    Momentum,
    del_residual,
    groupoid_axiom_defects,
    left_derivative,
    legendre_minus,
    legendre_plus,
    omega_L,
    omega_matrix,
    regularity_matrix,
    right_derivative,
)
from groupoidmech.models import (
    BeanieGroupoid,
    BeanieLagrangian,
    HarmonicOscillatorLagrangian,
    HeavyTopGroupoid,
    HeavyTopLagrangian,
    LieGroupSO3,
    PairGroupoid,
    ParametrizedSO3PairGroupoid,
    PointActionGroupoid,
    RigidBodyLagrangian,
    SO3PairGroupoid,
    free_particle_lagrangian,
)

import oracles

ALL_GROUPOIDS = [PairGroupoid(3), LieGroupSO3(), HeavyTopGroupoid(), BeanieGroupoid(1.0, 0.5),
                 SO3PairGroupoid(), ParametrizedSO3PairGroupoid(), PointActionGroupoid()]
INERTIA = (2.0, 3.0, 4.0)


@pytest.mark.parametrize("G", ALL_GROUPOIDS, ids=repr)
def test_groupoid_axioms(G, rng):
    defects = groupoid_axiom_defects(G, rng, samples=100)
    assert max(defects.values()) <= 1e-12, defects


@pytest.mark.parametrize("G", ALL_GROUPOIDS, ids=repr)
def test_chart_round_trip(G, rng):
    g = G.random_element(rng)
    assert_allclose(G.to_chart(G.from_chart(G.to_chart(g))), G.to_chart(g), atol=1e-14)
    assert G.chart_dim() == G.to_chart(g).size


@pytest.mark.parametrize("G", ALL_GROUPOIDS, ids=repr)
def test_constant_lagrangian_has_no_momentum(G, rng):
    L = DiscreteLagrangian(G, lambda g: 3.5)
    g = G.random_element(rng)
    h = G.random_element(rng, source=G.target(g))
    v = rng.standard_normal(G.fiber_dim())
    assert left_derivative(L, g, v) == 0.0
    assert right_derivative(L, h, v) == 0.0
    assert_allclose(del_residual(L, g, h).coords, 0.0, atol=0)
    M, cond = regularity_matrix(L, g)
    assert_allclose(M, 0.0, atol=0)
    assert cond == np.inf


def test_momentum_length_and_base(rng):
    L = HeavyTopLagrangian(INERTIA, 0.1, 1.3)
    g = L.groupoid.random_element(rng)
    mp, mm = legendre_plus(L, g), legendre_minus(L, g)
    assert mp.coords.shape == mm.coords.shape == (3,)
    assert_allclose(mp.base, L.groupoid.target(g))
    assert_allclose(mm.base, L.groupoid.source(g))


def test_momentum_pairing():
    mu = Momentum(None, np.array([1.0, 2.0, 3.0]))
    assert mu.pair([1.0, 0.0, -1.0]) == -2.0


# ------------------------------------------------------------- pair groupoid


def _ho(d=2, m=1.3, w=0.7, h=0.1):
    return HarmonicOscillatorLagrangian(PairGroupoid(d), m, w, h), (m, w, h)


def test_pair_left_derivative_is_second_slot_gradient(rng):
    L, (m, w, h) = _ho()
    x, y, v = rng.standard_normal((3, 2))
    _, dy = oracles.ho_grad(x, y, m, w, h)
    assert left_derivative(L, (x, y), v) == pytest.approx(dy @ v, abs=1e-9)


def test_pair_right_derivative_is_minus_first_slot_gradient(rng):
    L, (m, w, h) = _ho()
    x, y, v = rng.standard_normal((3, 2))
    dx, _ = oracles.ho_grad(x, y, m, w, h)
    assert right_derivative(L, (x, y), v) == pytest.approx(-dx @ v, abs=1e-9)


def test_free_particle_del_residual(rng):
    L = free_particle_lagrangian(3)
    x0, x1, x2 = rng.standard_normal((3, 3))
    r = del_residual(L, (x0, x1), (x1, x2))
    assert_allclose(r.coords, (x1 - x0) - (x2 - x1), atol=1e-9)


def test_harmonic_oscillator_del_residual_matches_gradient_oracle(rng):
    L, (m, w, h) = _ho(d=3)
    x0, x1, x2 = rng.standard_normal((3, 3))
    _, dy = oracles.ho_grad(x0, x1, m, w, h)
    dx, _ = oracles.ho_grad(x1, x2, m, w, h)
    assert_allclose(del_residual(L, (x0, x1), (x1, x2)).coords, dy + dx, atol=1e-8)
    assert_allclose(del_residual(L, (x0, x1), (x1, x2), exact=True).coords, dy + dx, atol=1e-12)


def test_pair_regularity_is_mixed_partial(rng):
    L, (m, w, h) = _ho(d=2)
    g = L.groupoid.random_element(rng)
    M, cond = regularity_matrix(L, g)
    assert_allclose(M, oracles.ho_mixed(m, w, h, 2), atol=1e-5)
    assert cond < 1.0 + 1e-5


def test_degenerate_lagrangian_is_singular(rng):
    G = PairGroupoid(2)
    L = DiscreteLagrangian(G, lambda g: np.sin(g[0]) @ g[0] + np.cos(g[1]).sum())
    for _ in range(10):
        _, cond = regularity_matrix(L, G.random_element(rng))
        assert cond == np.inf


def test_non_composable_pair_raises():
    L, _ = _ho()
    with pytest.raises(CompositionError):
        del_residual(L, (np.zeros(2), np.ones(2)), (np.zeros(2), np.ones(2)))


# --------------------------------------------------------------- heavy top


@pytest.fixture
def heavy_top():
    mgl, e = 1.7, np.array([0.0, 0.6, 0.8])
    return HeavyTopLagrangian(INERTIA, 0.1, mgl, e), mgl, e


def test_heavy_top_left_derivative_matches_trace_oracle(heavy_top, rng):
    L, _, _ = heavy_top
    for _ in range(5):
        G, W = L.groupoid.random_element(rng)
        K = rng.standard_normal(3)
        assert left_derivative(L, (G, W), K) == pytest.approx(
            oracles.heavy_top_left(G, W, K, L.II, L.h), abs=1e-8)


def test_heavy_top_right_derivative_matches_trace_oracle(heavy_top, rng):
    L, mgl, e = heavy_top
    for _ in range(5):
        G, W = L.groupoid.random_element(rng)
        K = rng.standard_normal(3)
        assert right_derivative(L, (G, W), K) == pytest.approx(
            oracles.heavy_top_right(G, W, K, L.II, L.h, mgl, e), abs=1e-8)


def test_heavy_top_exact_legendre_matches_oracle(heavy_top, rng):
    L, mgl, e = heavy_top
    G, W = L.groupoid.random_element(rng)
    plus = [oracles.heavy_top_left(G, W, k, L.II, L.h) for k in np.eye(3)]
    minus = [oracles.heavy_top_right(G, W, k, L.II, L.h, mgl, e) for k in np.eye(3)]
    assert_allclose(legendre_plus(L, (G, W), exact=True).coords, plus, atol=1e-12)
    assert_allclose(legendre_minus(L, (G, W), exact=True).coords, minus, atol=1e-12)


def test_heavy_top_regularity_matches_second_derivative_oracle(heavy_top, rng):
    L, _, _ = heavy_top
    g = L.groupoid.random_element(rng)
    expected = oracles.heavy_top_mixed(g[1], L.II, L.h)
    M, cond = regularity_matrix(L, g)
    # nested differences of an O(10) function: rounding noise ~ eps |L| / delta^2
    assert_allclose(M, expected, atol=1e-4)
    assert np.isfinite(cond)
    M_exact, _ = regularity_matrix(L, g, exact=True)
    assert_allclose(M_exact, expected, atol=1e-12)
    M_semi, _ = regularity_matrix(L, (g[0], g[1]), exact=True)
    assert_allclose(M_semi, expected, atol=1e-12)


def test_rigid_body_right_derivative_matches_trace_oracle(rng):
    L = RigidBodyLagrangian(INERTIA, h=1.0)
    for _ in range(5):
        W = L.groupoid.random_element(rng)
        K = rng.standard_normal(3)
        assert right_derivative(L, W, K) == pytest.approx(oracles.rigid_body_right(W, K, L.II), abs=1e-9)


def test_beanie_exact_legendre_matches_finite_differences(rng):
    L = BeanieLagrangian()
    for _ in range(5):
        q = L.groupoid.random_element(rng)
        assert_allclose(legendre_plus(L, q, exact=True).coords, legendre_plus(L, q).coords, atol=1e-8)
        assert_allclose(legendre_minus(L, q, exact=True).coords, legendre_minus(L, q).coords, atol=1e-8)


@pytest.mark.parametrize("make", [
    lambda: HarmonicOscillatorLagrangian(PairGroupoid(3), 1.0, 0.8, 0.1),
    lambda: RigidBodyLagrangian(INERTIA, 0.1),
    lambda: HeavyTopLagrangian(INERTIA, 0.1, 1.0),
    lambda: BeanieLagrangian(),
])
def test_del_residual_is_difference_of_legendre_transforms(make, rng):
    L = make()
    G = L.groupoid
    for _ in range(20):
        g = G.random_element(rng)
        h = G.random_element(rng, source=G.target(g))
        diff = legendre_plus(L, g).coords - legendre_minus(L, h).coords
        assert np.max(np.abs(del_residual(L, g, h).coords - diff)) <= 1e-13


# --------------------------------------------------------------- omega_L


def test_omega_matrix_block_form():
    M = np.arange(9.0).reshape(3, 3)
    O = omega_matrix(M)
    assert_allclose(O[:3, :3], 0)
    assert_allclose(O[3:, 3:], 0)
    assert_allclose(O[:3, 3:], -M)
    assert_allclose(O[3:, :3], M.T)
    assert_allclose(O, -O.T)


coords3 = arrays(np.float64, 3, elements=st.floats(-3, 3))


@given(coords3, coords3, coords3, coords3)
def test_omega_L_antisymmetric(X, Y, Xp, Yp):
    L = HeavyTopLagrangian(INERTIA, 0.1, 1.0)
    g = L.groupoid.random_element(np.random.default_rng(3))
    a = omega_L(L, g, (X, Y), (Xp, Yp), exact=True)
    b = omega_L(L, g, (Xp, Yp), (X, Y), exact=True)
    assert a == pytest.approx(-b, abs=1e-10)
    assert omega_L(L, g, (X, Y), (X, Y), exact=True) == pytest.approx(0.0, abs=1e-10)


@given(coords3, coords3, coords3, coords3, st.floats(-2, 2))
def test_omega_L_bilinear(X, Y, Xp, Yp, c):
    L = HeavyTopLagrangian(INERTIA, 0.1, 1.0)
    g = L.groupoid.random_element(np.random.default_rng(4))
    w = (Xp, Yp)
    lhs = omega_L(L, g, (c * X + Xp, c * Y + Yp), w, exact=True)
    rhs = c * omega_L(L, g, (X, Y), w, exact=True) + omega_L(L, g, (Xp, Yp), w, exact=True)
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_omega_L_vanishes_on_pure_right_lifts(rng):
    L = HeavyTopLagrangian(INERTIA, 0.1, 1.0)
    g = L.groupoid.random_element(rng)
    X, Xp = rng.standard_normal((2, 3))
    assert omega_L(L, g, (X, np.zeros(3)), (Xp, np.zeros(3))) == 0.0
    assert omega_L(L, g, (np.zeros(3), X), (np.zeros(3), Xp)) == 0.0


def test_omega_L_mixed_pair_matches_oracle(rng):
    L = HeavyTopLagrangian(INERTIA, 0.1, 1.0)
    g = L.groupoid.random_element(rng)
    X, Yp = rng.standard_normal((2, 3))
    M = oracles.heavy_top_mixed(g[1], L.II, L.h)
    expected = -X @ M @ Yp
    assert omega_L(L, g, (X, np.zeros(3)), (np.zeros(3), Yp)) == pytest.approx(expected, abs=1e-3)
    assert omega_L(L, g, (X, np.zeros(3)), (np.zeros(3), Yp), exact=True) == pytest.approx(expected, abs=1e-11)


# ----------------------------------------------------- convergence order


def _ratio(err_fn, d=1e-2):
    return err_fn(d) / err_fn(d / 2)


def test_left_right_derivatives_converge_at_second_order(rng):
    L = HeavyTopLagrangian(INERTIA, 0.5, 1.0)
    G, W = L.groupoid.random_element(rng)
    K = np.array([0.3, -0.8, 0.5])
    exact_l = oracles.heavy_top_left(G, W, K, L.II, L.h)
    exact_r = oracles.heavy_top_right(G, W, K, L.II, L.h, 1.0, L.e)
    rl = _ratio(lambda d: abs(left_derivative(L, (G, W), K, d) - exact_l))
    rr = _ratio(lambda d: abs(right_derivative(L, (G, W), K, d) - exact_r))
    assert 3.5 <= rl <= 4.5
    assert 3.5 <= rr <= 4.5

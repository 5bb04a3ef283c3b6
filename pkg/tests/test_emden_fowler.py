import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from pucci_singular.constants import classify_regime, constants_for, explicit_K, RegimeKind
from pucci_singular.emden_fowler import (
    EFState,
    EFTrajectory,
    Fate,
    Termination,
    asymptotic_rate,
    backward_fate,
    ef_rhs,
    eigendirection_start,
    equilibria,
    from_ef,
    integrate,
    to_ef,
)
from pucci_singular.errors import InsufficientTail, NegativeX
from pucci_singular.radial_pucci import LogGrid, RadialFunction


def power(grid, coef, gamma):
    r = grid.nodes
    return RadialFunction(grid, coef * r**-gamma, -gamma * coef * r ** (-gamma - 1),
                          gamma * (gamma + 1) * coef * r ** (-gamma - 2))


@pytest.fixture
def c2():
    return constants_for(1, 2, 5, 0.25, 2.0)


def test_to_ef_of_exact_solution_is_constant(c2):
    grid = LogGrid.build(1e-8, 1.0, 200)
    ef = to_ef(power(grid, 4.25, 2.0), 2.0)
    np.testing.assert_allclose(ef.x, 4.25, rtol=1e-14)
    assert np.max(np.abs(ef.xp)) <= 1e-13


def test_to_ef_of_tau_plus_power(c2):
    grid = LogGrid.build(1e-6, 1.0, 100)
    ef = to_ef(power(grid, 1.0, c2.tau_plus), 2.0)
    np.testing.assert_allclose(ef.x, np.exp(c2.lambda1 * ef.t), rtol=1e-13)
    np.testing.assert_allclose(ef.xp, c2.lambda1 * ef.x, rtol=1e-12)


def test_round_trip(c2):
    grid = LogGrid.build(1e-6, 1.0, 300)
    r = grid.nodes
    u = RadialFunction(grid, r**-0.4 * (2 - r), -0.4 * r**-1.4 * (2 - r) - r**-0.4,
                       0.56 * r**-2.4 * (2 - r) + 0.8 * r**-1.4)
    back = from_ef(to_ef(u, 2.0))
    np.testing.assert_allclose(back.u, u.u, rtol=4e-16 * 8)
    np.testing.assert_allclose(back.du, u.du, rtol=1e-13)


def test_from_ef_with_constants_uses_ode(c2):
    grid = LogGrid.build(1e-4, 1.0, 50)
    back = from_ef(to_ef(power(grid, 4.25, 2.0), 2.0), c2)
    np.testing.assert_allclose(back.ddu, 6 * 4.25 * grid.nodes**-4.0, rtol=1e-12)


def test_ef_rhs_examples(c2):
    assert ef_rhs(EFState(0, 4.25, 0), 2.0, c2) == 0.0
    assert ef_rhs(EFState(0, 0.0, 0.0), 2.0, c2) == 0.0
    assert ef_rhs(EFState(0, 1.0, 0.0), 2.0, c2) == pytest.approx(-1.625, abs=1e-14)
    with pytest.raises(NegativeX):
        ef_rhs(EFState(0, -1e-3, 0.0), 2.0, c2)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 16.0, 25.0])
def test_ef_rhs_zero_at_K(p):
    c = constants_for(1, 2, 5, 0.25, p)
    K = explicit_K(p, c)
    assert abs(ef_rhs(EFState(0, K, 0.0), p, c)) <= 1e-13 * abs(c.lambda1 * c.lambda2) * K


@given(st.floats(1e-3, 10.0), st.sampled_from([1.5, 2.0, 3.0, 16.0, 30.0]))
def test_ef_rhs_sign_at_rest(x, p):
    c = constants_for(1, 2, 5, 0.25, p)
    K = explicit_K(p, c)
    val = ef_rhs(EFState(0, x, 0.0), p, c)
    if abs(x / K - 1) > 1e-9:
        assert np.sign(val) == np.sign(x ** (p - 1) - K ** (p - 1))


def test_origin_eigenvalues(c2):
    origin = equilibria(2.0, c2)[0]
    assert origin.x == 0.0
    l1, l2 = origin.eigenvalues
    assert l1 == pytest.approx(2 - c2.tau_plus, abs=1e-12)
    assert l2 == pytest.approx(2 - c2.tau_minus, abs=1e-12)
    assert l1 == pytest.approx(1.1464466094, abs=1e-9)
    assert l2 == pytest.approx(1.8535533906, abs=1e-9)


@pytest.mark.parametrize("p, signs", [(2.0, (1, 1)), (5.0, (-1, 1)), (16.0, (-1, -1))])
def test_origin_signs_encode_regime(p, signs):
    c = constants_for(1, 2, 5, 0.25, p)
    l1, l2 = equilibria(p, c)[0].eigenvalues
    assert (np.sign(l1), np.sign(l2)) == signs
    kind = classify_regime(p, c).kind
    expect = {(1, 1): RegimeKind.SUBCRITICAL, (-1, 1): RegimeKind.INTERMEDIATE,
              (-1, -1): RegimeKind.SUPERCRITICAL}[signs]
    assert kind is expect


def test_no_K_equilibrium_in_gap():
    c = constants_for(1, 2, 5, 0.25, 5.0)
    assert len(equilibria(5.0, c)) == 1


@pytest.mark.parametrize("p", [2.0, 16.0])
def test_K_equilibrium_is_saddle_matching_fd_jacobian(p):
    c = constants_for(1, 2, 5, 0.25, p)
    eq = equilibria(p, c)[1]
    assert eq.is_saddle
    K, h = eq.x, 1e-6 * eq.x
    d_x = (ef_rhs(EFState(0, K + h, 0), p, c) - ef_rhs(EFState(0, K - h, 0), p, c)) / (2 * h)
    d_xp = (ef_rhs(EFState(0, K, h), p, c) - ef_rhs(EFState(0, K, -h), p, c)) / (2 * h)
    # Jacobian [[0, 1], [d_x, d_xp]]
    fd = np.sort(np.linalg.eigvals(np.array([[0.0, 1.0], [d_x, d_xp]])).real)
    np.testing.assert_allclose(np.sort(np.real(eq.eigenvalues)), fd, rtol=1e-6)
    l1, l2 = c.lambda1, c.lambda2
    assert np.prod(eq.eigenvalues) == pytest.approx(l1 * l2 * (1 - p), rel=1e-12)


def test_equilibrium_trajectory_is_constant(c2):
    tr = integrate(EFState(0.0, 4.25, 0.0), 2.0, c2, 40.0, rel_tol=1e-10)
    assert tr.termination is Termination.SPAN_REACHED
    assert np.max(np.abs(tr.x - 4.25)) <= 10 * 1e-10 * 4.25
    assert np.all(np.diff(tr.t) > 0)


def test_lambda2_growth_rate(c2):
    start = eigendirection_start(2.0, c2, "lambda2", amplitude=1e-10)
    span = math.log(1e-2 / 1e-10) / c2.lambda2
    tr = integrate(start, 2.0, c2, span, rel_tol=1e-12, abs_tol=1e-24)
    assert tr.x[-1] == pytest.approx(1e-2, rel=1e-2)
    fit = asymptotic_rate(tr, tail_fraction=1.0)
    assert fit.slope == pytest.approx(c2.lambda2, abs=1e-3)


def _mp_reference(p, c, x0, t_end):
    l1, l2 = c.lambda1, c.lambda2
    with mp.workdps(30):
        f = mp.odefun(lambda t, y: [y[1], (l1 + l2) * y[1] - l1 * l2 * y[0] + y[0] ** p / c.Lam],
                      0, [mp.mpf(x0), mp.mpf(0)])
        return float(f(t_end)[0])


def test_integrator_order(c2):
    x0 = 4.25 * 1.01
    ref = _mp_reference(2.0, c2, x0, 1.0)
    errs, nfev = [], []
    for tol in (1e-5, 1e-6, 1e-7, 1e-8, 1e-9):
        tr = integrate(EFState(0.0, x0, 0.0), 2.0, c2, 1.0, rel_tol=tol, abs_tol=tol * 1e-3)
        errs.append(abs(tr.x[-1] - ref))
        nfev.append(tr.nfev)
    order = -np.polyfit(np.log(nfev), np.log(errs), 1)[0]
    assert order >= 4.5


def test_integrate_validation(c2):
    with pytest.raises(ValueError):
        integrate(EFState(0, 1, 0), 2.0, c2, 1.0, rel_tol=0)
    with pytest.raises(ValueError):
        integrate(EFState(0, 1, 0), 2.0, c2, 1.0, direction="sideways")


def test_blow_up_and_underflow(c2):
    up = integrate(EFState(0, 5.0, 1.0), 2.0, c2, 100.0)
    assert up.termination is Termination.BLOW_UP
    down = integrate(EFState(0, 1.0, -5.0), 2.0, c2, 100.0, x_min=0.0)
    assert down.termination is Termination.UNDERFLOW


def test_supercritical_backward_exit_from_half_K():
    c0 = constants_for(1, 2, 5, 0.25)
    p = c0.p_star_star + 2.0
    c = constants_for(1, 2, 5, 0.25, p)
    K = explicit_K(p, c)
    for xp in (-0.3 * K, 0.0, 0.17 * K, 0.5 * K):
        rep = backward_fate(EFState(0.0, 0.5 * K, xp), p, c)
        assert rep.fate in (Fate.EXIT_ABOVE, Fate.EXIT_BELOW)
        assert rep.trajectory.t[-1] > -2000.0


def test_backward_fate_at_K():
    c = constants_for(1, 2, 5, 0.25, 16.0)
    K = explicit_K(16.0, c)
    assert backward_fate(EFState(0.0, K, 0.0), 16.0, c).fate is Fate.CONVERGES_TO_K


def test_backward_fate_subcritical_origin_decay(c2):
    # p < p*: the origin is a source forward, so the backward flow decays to 0
    rep = backward_fate(eigendirection_start(2.0, c2, "lambda1", amplitude=1e-3), 2.0, c2,
                        t_span=200.0)
    assert rep.fate is Fate.CONVERGES_TO_ZERO
    assert rep.decay_rate == pytest.approx(c2.lambda1, rel=1e-3)
    assert rep.to_dict()["fate"] == "ConvergesToZero"


def _traj(t, x):
    t = np.asarray(t, float)
    return EFTrajectory(t, np.asarray(x, float), np.zeros_like(t), "backward",
                        Termination.SPAN_REACHED)


def test_rate_exact_exponential(c2):
    t = np.linspace(0, -30, 400)
    fit = asymptotic_rate(_traj(t, 3 * np.exp(c2.lambda1 * t)))
    assert fit.slope == pytest.approx(c2.lambda1, abs=1e-10)
    assert fit.kind == "exponential"


def test_rate_smaller_exponent_dominates_backward(c2):
    t = np.linspace(0, -60, 2000)
    x = np.exp(c2.lambda2 * t) + 0.01 * np.exp(c2.lambda1 * t)
    assert asymptotic_rate(_traj(t, x)).slope == pytest.approx(c2.lambda1, abs=1e-10)


def test_rate_constant_and_algebraic():
    t = np.linspace(-1, -1000, 3000)
    assert asymptotic_rate(_traj(t, np.full_like(t, 2.0))).slope == pytest.approx(0, abs=1e-14)
    fit = asymptotic_rate(_traj(t, 0.8 * (-t) ** -0.0732))
    assert fit.kind == "algebraic"
    assert fit.algebraic_exponent == pytest.approx(-0.0732, abs=1e-10)


def test_rate_insufficient_tail():
    t = np.linspace(0, -1, 10)
    with pytest.raises(InsufficientTail):
        asymptotic_rate(_traj(t, np.ones(10)))

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracle import constants_oracle, significant_digits
from pucci_singular.constants import (
    ProblemParams,
    RegimeKind,
    classify_regime,
    constants_for,
    critical_exponents,
    explicit_K,
    log_critical_Kbar,
    principal_eigenpair,
)
from pucci_singular.errors import (
    DegenerateTau,
    InvalidEllipticity,
    KUndefined,
    MuAboveEigenvalue,
    SublinearExponent,
)
from pucci_singular.radial_pucci import LogGrid, RadialFunction, residual_linear, residual_main

ULP = np.finfo(float).eps


def test_reference_set_values(ref):
    assert ref.Ntilde_plus == 3
    assert ref.tau == 0.5
    assert ref.lambda_bar == 0.5
    assert ref.tau_plus == pytest.approx(0.8535533906, abs=1e-10)
    assert ref.tau_minus == pytest.approx(0.1464466094, abs=1e-10)
    assert ref.p_star == pytest.approx(3.3431457506, abs=1e-10)
    assert ref.p_star_star == pytest.approx(14.6568542494, abs=1e-10)


def test_laplacian_like_set():
    c = constants_for(1, 1, 4, 0.5)
    assert c.Ntilde_plus == c.Ntilde_minus == 4
    assert c.tau == 1 and c.lambda_bar == 1
    assert c.tau_plus == pytest.approx(1 + math.sqrt(0.5), rel=1e-15)
    assert c.tau_minus == pytest.approx(1 - math.sqrt(0.5), rel=1e-15)


@pytest.mark.parametrize("params", [(1, 2, 5, 0.25, 2.0), (1, 1, 4, 0.5, 16.0),
                                    (0.5, 2, 9, 0.3, 3.0)])
def test_all_fields_match_oracle(params):
    c = constants_for(*params)
    ref = constants_oracle(*params)
    for name, val in ref.items():
        assert significant_digits(getattr(c, name), val) >= 12, name


def test_K_at_p2_is_exact(ref):
    assert explicit_K(2.0, ref) == 4.25


def test_Kbar_reference(ref):
    # 50-digit value of [Lambda tau-(tau - tau-)]^(tau-/2)
    assert log_critical_Kbar(ref) == pytest.approx(0.84700715141840399317, rel=1e-14)


def test_Kbar_equals_one_when_base_is_one():
    # tau = 2, tau- = 1, Lambda = 1: Lambda tau-(tau - tau-) = 1
    c = constants_for(1, 1, 6, 3.0)
    assert c.tau_minus == pytest.approx(1.0, rel=1e-15)
    assert log_critical_Kbar(c) == pytest.approx(1.0, rel=1e-15)


def test_Kbar_vanishes_towards_lambda_bar():
    c = constants_for(1, 2, 5, 0.5 * (1 - 1e-12))
    assert log_critical_Kbar(c) < 0.5


def test_mu_above_eigenvalue():
    with pytest.raises(MuAboveEigenvalue):
        constants_for(1, 2, 5, 0.6)


@pytest.mark.parametrize("lam, Lam, N", [(0, 1, 3), (2, 1, 3), (1, 1, 1), (1, 1, 2.5)])
def test_invalid_ellipticity(lam, Lam, N):
    with pytest.raises(InvalidEllipticity):
        ProblemParams(lam, Lam, N, 0.1)


def test_degenerate_cases():
    with pytest.raises(DegenerateTau):
        critical_exponents(constants_for(1, 2, 5, 0.0))
    c = constants_for(1, 2, 5, 0.5)
    assert c.degenerate and c.tau_plus == c.tau_minus == c.tau
    with pytest.raises(DegenerateTau):
        critical_exponents(c)


def test_critical_exponents_merge_near_lambda_bar():
    c = constants_for(1, 2, 5, 0.5 * (1 - 1e-10))
    ps, pss = critical_exponents(c)
    assert ps < pss
    assert ps == pytest.approx(1 + 2 / c.tau, rel=1e-4)
    assert pss == pytest.approx(1 + 2 / c.tau, rel=1e-4)


def test_classify_regime_examples(ref):
    assert classify_regime(2.0, ref).kind is RegimeKind.SUBCRITICAL
    assert classify_regime(ref.p_star_star, ref).kind is RegimeKind.LOG_CRITICAL
    with pytest.raises(SublinearExponent):
        classify_regime(1.0, ref)


def test_K_limits(ref):
    ks = [explicit_K(ref.p_star * (1 - d), ref) for d in (1e-2, 1e-4, 1e-8, 1e-12)]
    assert all(a > b for a, b in zip(ks, ks[1:]))
    assert ks[-1] < 1e-5
    with pytest.raises(KUndefined):
        explicit_K(0.5 * (ref.p_star + ref.p_star_star), ref)


def test_eigenpair_value(ref):
    lb, phi = principal_eigenpair(ref.params)
    assert lb == ref.lambda_bar
    assert phi(1.0) == 0.0
    r = np.linspace(0.01, 0.99, 50)
    assert np.all(phi(r) > 0)


def test_eigenpair_residual_vs_symbolic_oracle():
    import mpmath as mp

    params = ProblemParams(1.0, 2.0, 5, 0.5)
    lb, phi = principal_eigenpair(params)
    r = 0.3
    with mp.workdps(40):
        e = mp.mpf(0.5)
        f = lambda x: -mp.log(x) * x ** (-e)
        d1, d2 = mp.diff(f, r, 1), mp.diff(f, r, 2)
    val, a1, a2 = phi.derivatives(np.array([r]))
    assert a1[0] == pytest.approx(float(d1), rel=1e-13)
    assert a2[0] == pytest.approx(float(d2), rel=1e-13)
    grid = LogGrid.from_nodes([0.29, r, 0.31])
    u = RadialFunction.from_callable(grid, phi.derivatives)
    res = residual_linear(u, params, mu=lb)
    scale = lb * u.u / u.r**2
    assert abs(res[1] / scale[1]) < 1e-12


# ---------------------------------------------------------------- properties

valid_sets = st.tuples(
    st.floats(0.2, 2.0), st.floats(1.0, 3.0), st.integers(3, 10), st.floats(0.05, 0.95),
).filter(lambda t: (t[2] - 1) / t[1] + 1 > 2.05)


def _make(t):
    lam, ratio, N, frac = t
    Lam = lam * ratio
    tau = ((lam / Lam) * (N - 1) - 1) / 2
    return constants_for(lam, Lam, N, frac * Lam * tau * tau)


@given(valid_sets)
def test_vieta_identities(t):
    c = _make(t)
    assert abs(c.tau_plus + c.tau_minus - 2 * c.tau) <= 4 * ULP * 2 * c.tau
    assert abs(c.tau_plus * c.tau_minus - c.mu / c.Lam) <= 4 * ULP * c.mu / c.Lam
    assert 0 < c.tau_minus <= c.tau <= c.tau_plus
    assert 1 < c.p_star < c.p_star_star
    assert c.Ntilde_plus <= c.N <= c.Ntilde_minus


@given(valid_sets, st.lists(st.floats(1.01, 60.0), min_size=2, max_size=12))
def test_regime_monotone_in_p(t, ps):
    c = _make(t)
    kinds = [classify_regime(p, c).kind for p in sorted(ps)]
    assert kinds == sorted(kinds)


@given(valid_sets, st.floats(1.01, 60.0))
def test_eigenvalue_signs(t, p):
    c0 = _make(t)
    c = constants_for(c0.lam, c0.Lam, c0.N, c0.mu, p)
    assert c.K_opt is None or c.K_opt > 0
    assert (c.lambda1 > 0) == (p < c.p_star)
    assert (c.lambda2 > 0) == (p < c.p_star_star)
    assert c.lambda2 - c.lambda1 == pytest.approx(c.tau_plus - c.tau_minus, rel=1e-12)


@given(valid_sets, st.floats(0.02, 0.98), st.booleans())
def test_explicit_solution_residual(t, frac, sub):
    c0 = _make(t)
    p = 1 + (0.05 + 0.9 * frac) * (c0.p_star - 1) if sub else c0.p_star_star * (1.05 + frac)
    c = constants_for(c0.lam, c0.Lam, c0.N, c0.mu, p)
    K = explicit_K(p, c)
    assert K ** (p - 1) == pytest.approx(c.Lam * c.lambda1 * c.lambda2, rel=1e-12)
    g = 2 / (p - 1)
    # keep u^p and u/r^2 inside binary64 range
    depth = min(6.0, (250 - p * max(math.log10(K), 0)) / (g * p + 2))
    grid = LogGrid.build(10.0**-depth, 1.0, 64)
    r = grid.nodes
    u = RadialFunction(grid, K * r**-g, -g * K * r ** (-g - 1), g * (g + 1) * K * r ** (-g - 2))
    res = residual_main(u, c, p)
    assert np.max(np.abs(res) / (u.u**p + c.mu * u.u / r**2)) <= 1e-12

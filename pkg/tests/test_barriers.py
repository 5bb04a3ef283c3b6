import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import PARAM_SETS, regime_exponents
from pucci_singular.barriers import (
    KINDS,
    SUB,
    SUPER,
    certify_sign,
    default_grid,
    eval_barrier,
    kinds_for_regime,
    make_barrier,
    sample_parameters,
    vlog_bracket,
)
from pucci_singular.constants import classify_regime, constants_for, explicit_K
from pucci_singular.errors import (
    CertificationFailure,
    ConstraintViolation,
    OutOfValidity,
    RegimeMismatch,
)
from pucci_singular.radial_pucci import LogGrid, RadialFunction, residual_main


def _cases():
    for params in PARAM_SETS:
        c = constants_for(*params)
        for regime, p in regime_exponents(c).items():
            cp = constants_for(*params, p)
            for kind in kinds_for_regime(classify_regime(p, cp).kind):
                yield pytest.param(params, p, kind, id=f"{params}-{regime}-{kind}")


@pytest.mark.parametrize("params, p, kind", list(_cases()))
def test_default_barrier_certifies(params, p, kind):
    b = make_barrier(kind, constants_for(*params, p))
    assert all(m >= -1e-12 for _, m in b.constraint_certificate)
    cert = certify_sign(b, default_grid(b))
    assert cert.holds and cert.n_violations == 0


def test_every_kind_has_a_regime(ref):
    seen = set()
    for p in regime_exponents(ref).values():
        seen.update(kinds_for_regime(classify_regime(p, constants_for(1, 2, 5, 0.25, p)).kind))
    assert seen == set(KINDS)


@pytest.mark.parametrize("params", PARAM_SETS)
def test_random_instances_certify(params):
    rng = np.random.default_rng(1)
    c0 = constants_for(*params)
    for p in regime_exponents(c0).values():
        c = constants_for(*params, p)
        for kind in kinds_for_regime(classify_regime(p, c).kind):
            for _ in range(3):
                b = make_barrier(kind, c, p, **sample_parameters(kind, c, p, rng))
                assert certify_sign(b, default_grid(b, n=512)).holds


def test_tau_plus_sub_equality_defaults():
    c = constants_for(1, 2, 5, 0.25, 2.0)
    b = make_barrier("TauPlusSub", c)
    bound = min(c.tau_plus, 2 - c.tau_plus, 2 * (c.tau_plus - c.tau))
    assert b.params["delta"] == pytest.approx(0.5 * bound, rel=1e-15)
    d = b.params["delta"]
    assert b.params["eps"] ** 1.0 == pytest.approx(c.Lam * d * (2 * (c.tau_plus - c.tau) - d), rel=1e-14)
    assert b.direction == SUB
    assert b(1.0) == 0.0


def test_power_k_at_K_is_both_directions():
    c = constants_for(1, 2, 5, 0.25, 2.0)
    K = explicit_K(2.0, c)
    for direction in (SUB, SUPER):
        b = make_barrier("PowerK", c, c=K, direction=direction)
        assert certify_sign(b, default_grid(b)).holds


def test_power_k_wrong_direction():
    c = constants_for(1, 2, 5, 0.25, 2.0)
    with pytest.raises(CertificationFailure):
        b = make_barrier("PowerK", c, c=1.01 * explicit_K(2.0, c), direction=SUB)
        certify_sign(b, default_grid(b))


def test_log_sub_constraint_violation():
    c0 = constants_for(1, 2, 5, 0.25)
    p = c0.p_star_star
    c = constants_for(1, 2, 5, 0.25, p)
    a = (2 * c.K_bar ** (p - 1)) ** (1 / (p - 1))
    with pytest.raises(ConstraintViolation, match=r"a\^\{p-1\}"):
        make_barrier("LogSub", c, a=a)


def test_regime_mismatch():
    with pytest.raises(RegimeMismatch):
        make_barrier("LogSub", constants_for(1, 2, 5, 0.25, 2.0))


def test_power_super_values():
    c = constants_for(1, 2, 5, 0.25, 2.0)
    b = make_barrier("PowerSuper", c, c=1.0, gamma=c.tau)
    t = c.tau
    val = eval_barrier(b, 0.5)
    assert val == pytest.approx((0.5**-t, -t * 0.5 ** (-t - 1), t * (t + 1) * 0.5 ** (-t - 2)), rel=1e-15)


def test_log_sub_value_at_inverse_e():
    c0 = constants_for(1, 2, 5, 0.25)
    p = c0.p_star_star
    c = constants_for(1, 2, 5, 0.25, p)
    b = make_barrier("LogSub", c, a=c.K_bar, c=2.0)
    tm = c.tau_minus
    expected = c.K_bar * math.exp(tm) * 3 ** (-tm / 2)
    assert b(math.exp(-1)) == pytest.approx(expected, rel=1e-15)


def test_out_of_validity():
    c = constants_for(1, 2, 5, 0.25, 2.0)
    b = make_barrier("PowerSuper", c)
    with pytest.raises(OutOfValidity):
        eval_barrier(b, 0.0)
    with pytest.raises(OutOfValidity):
        eval_barrier(b, 2 * b.validity_radius)


@settings(max_examples=200)
@given(st.floats(1.0001, 20.0), st.floats(0.05, 5.0), st.floats(1.0001, 50.0), st.booleans())
def test_log_super_certifies_inside_radius(b_ratio, delta, cc, pairing):
    c0 = constants_for(1, 2, 5, 0.25)
    p = c0.p_star_star
    c = constants_for(1, 2, 5, 0.25, p)
    try:
        b = make_barrier("LogSuper", c, b=b_ratio * c.K_bar, delta=delta,
                         c=None if pairing else cc, pairing=pairing)
    except ConstraintViolation:
        return
    r0 = b.validity_radius
    assert certify_sign(b, LogGrid.build(1e-40 * r0, r0, 512)).holds


def test_log_super_radius_shrinks_near_K_bar():
    # b barely above K_bar with delta > 1: the 1/s term wins on a band of radii
    c0 = constants_for(1, 2, 5, 0.25)
    p = c0.p_star_star
    c = constants_for(1, 2, 5, 0.25, p)
    b = make_barrier("LogSuper", c, b=1.002 * c.K_bar, delta=2.0, c=2.0, pairing=False)
    assert 0 < b.validity_radius < 1e-20
    assert certify_sign(b, LogGrid.build(1e-80, b.validity_radius, 512)).holds
    r = np.geomspace(1e-12, 1e-9, 64)
    wide = dataclasses.replace(b, validity_radius=1.0)
    u = RadialFunction(LogGrid.from_nodes(r), *eval_barrier(wide, r))
    assert np.any(residual_main(u, c, p) > 0)
    assert make_barrier("LogSuper", c).validity_radius == 1.0


def test_log_super_pairing_constraint():
    c0 = constants_for(1, 2, 5, 0.25)
    p = c0.p_star_star
    c = constants_for(1, 2, 5, 0.25, p)
    with pytest.raises(ConstraintViolation):
        make_barrier("LogSuper", c, b=1.1 * c.K_bar, delta=1.0, c=1.5)


def test_default_scheme_pairs_are_ordered():
    c = constants_for(1, 2, 5, 0.25, 2.0)
    grid = LogGrid.build(1e-8, 1.0, 512)
    sub, sup = make_barrier("TauPlusSub", c), make_barrier("PowerSuper", c, c=1.0, gamma=c.tau_plus)
    assert np.all(sub.radial(grid).u <= sup.radial(grid).u)

    c = constants_for(1, 2, 5, 0.25, 5.0)
    sub = make_barrier("TauMinusSub", c)
    sup = make_barrier("PowerSuper", c, c=2 * sub.params["eps"], gamma=c.tau_minus)
    assert np.all(sub.radial(grid).u <= sup.radial(grid).u)

    p = c.p_star_star
    c = constants_for(1, 2, 5, 0.25, p)
    sub = make_barrier("LogSub", c, a=c.K_bar, c=2.0)
    sup = make_barrier("LogSuper", c, b=2 * c.K_bar, delta=1.0, c=2.0)
    g = LogGrid.build(1e-12, min(sub.validity_radius, sup.validity_radius), 512)
    assert np.all(sub.radial(g).u <= sup.radial(g).u)


@pytest.mark.parametrize("params", PARAM_SETS)
def test_barriers_decrease(params):
    c0 = constants_for(*params)
    for p in regime_exponents(c0).values():
        c = constants_for(*params, p)
        for kind in kinds_for_regime(classify_regime(p, c).kind):
            b = make_barrier(kind, c)
            f = b.radial(default_grid(b, n=256))
            if b.equation == "v":
                assert np.all(f.du >= 0)  # v = r^tau- u increases
            else:
                assert np.all(f.du <= 0), kind


def test_vlog_bracket_matches_data():
    c0 = constants_for(1, 2, 5, 0.25)
    p = c0.p_star_star
    c = constants_for(1, 2, 5, 0.25, p)
    lo, up = vlog_bracket(c, p, 0.5, 0.6 * c.K_bar)
    assert lo(0.5) <= 0.6 * c.K_bar
    assert up(0.5) == pytest.approx(0.6 * c.K_bar, rel=1e-13)
    for b in (lo, up):
        assert certify_sign(b, default_grid(b, r_min=1e-12)).holds

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pucci_singular.barriers import make_barrier
from pucci_singular.classifier import classify
from pucci_singular.constants import constants_for
from pucci_singular.errors import DegenerateTau, RegimeMismatch
from pucci_singular.monotone_scheme import (
    AnnulusProblem,
    Case,
    default_radii,
    discrete_relative_residual,
    run_scheme,
    solve_annulus_bvp,
)
from pucci_singular.radial_pucci import LogGrid, pucci_radial


@pytest.fixture(scope="module")
def c2():
    return constants_for(1, 2, 5, 0.25, 2.0)


@pytest.fixture(scope="module")
def tau_plus_run(c2):
    return run_scheme("tau-plus", c2, 2.0, n_max=16, nodes=2048)


def test_zero_data_gives_zero(c2):
    grid = LogGrid.build(1e-2, 1.0, 200)
    sol = solve_annulus_bvp(AnnulusProblem(grid, np.zeros(200), (0.0, 0.0), c2), 2.0)
    assert np.all(sol.u == 0)


def _manufactured(c, n):
    t = c.tau
    grid = LogGrid.build(1e-2, 1.0, n)
    r = grid.nodes
    w = (1 - r) * r**-t
    dw = -t * r ** (-t - 1) * (1 - r) - r**-t
    ddw = t * (t + 1) * r ** (-t - 2) * (1 - r) + 2 * t * r ** (-t - 1)
    f = -pucci_radial(ddw, dw / r, c.params) + w**2
    return grid, w, f


def test_manufactured_second_order(c2):
    errs = []
    for n in (129, 257, 513, 1025):
        grid, w, f = _manufactured(c2, n)
        sol = solve_annulus_bvp(AnnulusProblem(grid, f, (w[0], 0.0), c2), 2.0)
        assert discrete_relative_residual(sol, f, c2, 2.0) <= 1e-10
        errs.append(np.max(np.abs(sol.u - w)) / w.max())
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert orders.min() >= 1.9


def test_problem_validation(c2):
    grid = LogGrid.build(1e-2, 1.0, 20)
    with pytest.raises(ValueError):
        AnnulusProblem(grid, -np.ones(20), (0.0, 0.0), c2)
    with pytest.raises(ValueError):
        AnnulusProblem(grid, np.ones(20), (-1.0, 0.0), c2)
    with pytest.raises(ValueError):
        AnnulusProblem(grid, np.ones(19), (0.0, 0.0), c2)


def test_bvp_with_tau_plus_sub_source_is_bracketed(c2):
    sub = make_barrier("TauPlusSub", c2)
    grid = LogGrid.build(1e-3, 1.0, 1024)
    r = grid.nodes
    low = sub.radial(grid).u
    sol = solve_annulus_bvp(AnnulusProblem(grid, c2.mu * low / r**2, (low[0], 0.0), c2), 2.0)
    assert np.all(sol.u >= low * (1 - 1e-12))
    assert np.all(sol.u <= r**-c2.tau_plus)


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_discrete_comparison(seed):
    c = constants_for(1, 2, 5, 0.25, 2.0)
    rng = np.random.default_rng(seed)
    grid = LogGrid.build(1e-2, 1.0, 129)
    f1 = rng.uniform(0, 50, 129)
    f2 = f1 + rng.uniform(0, 10, 129)
    b1 = rng.uniform(0, 3, 2)
    b2 = b1 + rng.uniform(0, 1, 2)
    v1 = solve_annulus_bvp(AnnulusProblem(grid, f1, tuple(b1), c), 2.0).u
    v2 = solve_annulus_bvp(AnnulusProblem(grid, f2, tuple(b2), c), 2.0).u
    assert np.all(v1 <= v2 + 1e-12 * np.abs(v2).max())


def test_tau_plus_run_certified(tau_plus_run, c2):
    cert = tau_plus_run.certificate
    assert cert.monotone and cert.bracketed
    assert cert.iterations == 16
    assert tau_plus_run.radii == pytest.approx(default_radii(16))
    u = tau_plus_run.trusted_limit()
    cls = classify(u, c2, 2.0, tail_decades=1.0)
    assert cls.variant == "TauPlus"
    assert abs(-cls.diagnostics["slope"] - c2.tau_plus) <= 1e-2
    assert cls.constant > 0


def test_iterates_are_monotone_and_bracketed(tau_plus_run):
    sub, sup = tau_plus_run.sub, tau_plus_run.super
    for prev, nxt in zip(tau_plus_run.iterates, tau_plus_run.iterates[1:]):
        k = prev.grid.n
        assert np.all(nxt.u[-k:] >= prev.u - 1e-10 * np.abs(prev.u))
    for it in tau_plus_run.iterates:
        assert np.all(it.u >= sub.radial(it.grid).u * (1 - 1e-8))
        assert np.all(it.u <= sup.radial(it.grid).u * (1 + 1e-8))


def test_tau_minus_run():
    c = constants_for(1, 2, 5, 0.25, 5.0)
    res = run_scheme(Case.TAU_MINUS, c, 5.0, n_max=16, nodes=2048)
    assert res.certificate.monotone and res.certificate.bracketed
    cls = classify(res.trusted_limit(), c, 5.0, tail_decades=1.0)
    assert cls.variant == "TauMinus"
    assert abs(-cls.diagnostics["slope"] - c.tau_minus) <= 1e-2


def test_log_critical_run_bracketed():
    c0 = constants_for(1, 2, 5, 0.25)
    p = c0.p_star_star
    c = constants_for(1, 2, 5, 0.25, p)
    res = run_scheme("log-critical", c, p, n_max=16, nodes=2048)
    assert res.certificate.bracketed and res.certificate.monotone
    lo = make_barrier("LogSub", c, a=c.K_bar, c=2.0)
    hi = make_barrier("LogSuper", c, b=2 * c.K_bar, delta=1.0, c=2.0)
    u = res.limit
    assert np.all(u.u >= lo.radial(u.grid).u * (1 - 1e-8))
    assert np.all(u.u <= hi.radial(u.grid).u * (1 + 1e-8))


def test_limit_stability_under_refinement(c2):
    limits = [run_scheme("tau-plus", c2, 2.0, n_max=16, nodes=n).limit for n in (512, 1024, 2048)]
    diffs = []
    for a, b in zip(limits, limits[1:]):
        # nested grids: every coarse node is a fine node
        idx = np.searchsorted(b.r, a.r)
        np.testing.assert_allclose(b.r[idx], a.r, rtol=1e-12)
        diffs.append(np.max(np.abs(b.u[idx] - a.u)[:-1] / a.u[:-1]))
    # halving h divides the change by about 4; allow a factor 4 slack on that estimate
    assert diffs[1] <= 4 * diffs[0] / 4
    assert diffs[0] / diffs[1] >= 3.0


def test_case_admissibility(c2):
    with pytest.raises(RegimeMismatch):
        run_scheme("tau-plus", constants_for(1, 2, 5, 0.25, 5.0), 5.0, n_max=4)
    with pytest.raises(RegimeMismatch):
        run_scheme("log-critical", c2, 2.0, n_max=4)
    with pytest.raises(DegenerateTau):
        run_scheme("tau-plus", constants_for(1, 2, 5, 0.0, 2.0), 2.0, n_max=4)
    with pytest.raises(ValueError):
        run_scheme("tau-plus", c2, 2.0, radii=[0.5, 0.6])
    with pytest.raises(ValueError):
        Case.parse("sideways")
    assert Case.parse("tau_minus") is Case.TAU_MINUS


def test_result_serializes(tau_plus_run):
    d = tau_plus_run.to_dict()
    assert d["case"] == "TauPlus"
    assert d["certificate"]["monotone"] is True
    assert d["sub"]["kind"] == "TauPlusSub"

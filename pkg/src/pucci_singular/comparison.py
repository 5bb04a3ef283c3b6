"""Numerical harnesses for the two comparison principles.

``check_annulus`` tests ``u <= v`` on an annulus given ordered boundary data;
``check_ball`` tests it on a punctured ball given ``u(r0) <= v(r0)`` and
two-sided growth bounds of order ``r^(-2/(p-1))`` near the origin.
Hypotheses are verified first; a verdict is only issued when they hold.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .barriers import ABS_FLOOR, SUB, SUPER, make_barrier, sample_parameters
from .constants import ConstantSet, RegimeKind, classify_regime, constants_for
from .errors import (
    GrowthHypothesisViolation,
    HypothesisViolation,
    PucciSingularError,
    RegimeMismatch,
)
from .radial_pucci import LogGrid, RadialFunction, residual_main, residual_scale

RATIO_TOL = 1e-8


@dataclass(frozen=True)
class ComparisonReport:
    sup_ratio: float
    boundary_ratio: float
    worst_node: int
    worst_r: float
    hypothesis_check: dict = field(default_factory=dict)
    ratio_tol: float = RATIO_TOL

    @property
    def verdict(self):
        bound = max(1.0, self.boundary_ratio) * (1 + self.ratio_tol)
        return "pass" if self.sup_ratio <= bound else "fail"

    def to_dict(self):
        out = dict(self.__dict__)
        out["verdict"] = self.verdict
        return out


def _resolve(constants, p):
    p = constants.p if p is None else p
    if constants.p != p:
        constants = constants_for(constants.lam, constants.Lam, constants.N, constants.mu, p)
    return constants, p


def _sign_margins(u, v, c, p, abs_floor):
    """Scaled residual margins: >= -abs_floor means the sign hypothesis holds."""
    out = {}
    for name, f, sgn in (("sub", u, 1.0), ("super", v, -1.0)):
        res = residual_main(f, c, p, allow_zero=name == "sub")
        scale = residual_scale(f, c, p)
        fallback = c.Lam * (np.abs(f.ddu) + (c.N - 1) * np.abs(f.du) / f.r)
        scale = np.where(scale > 0, scale, np.where(fallback > 0, fallback, 1.0))
        margin = sgn * res / scale
        out[name] = (float(margin.min()), int(np.argmin(margin)))
    for name, (m, node) in out.items():
        if m < -abs_floor:
            raise HypothesisViolation(
                f"{name}-solution residual has the wrong sign at node {node} "
                f"(r={u.r[node]:.6g}, scaled margin {m:.3e})",
                hypothesis=f"{name}_sign", node=node, margin=m,
            )
    return {f"{k}_sign_margin": m for k, (m, _) in out.items()}


def _common(u: RadialFunction, v: RadialFunction):
    if u.grid.n != v.grid.n or not np.allclose(u.r, v.r, rtol=1e-13, atol=0):
        raise ValueError("u and v must be sampled on the same grid")
    if np.any(u.u < 0):
        raise HypothesisViolation("u must be non-negative", hypothesis="positivity")
    if np.any(v.u <= 0):
        raise HypothesisViolation("v must be positive", hypothesis="positivity")


def _ratio(u, v):
    q = u.u / v.u
    k = int(np.argmax(q))
    return float(q[k]), k


def check_annulus(u: RadialFunction, v: RadialFunction, constants: ConstantSet, p=None,
                  abs_floor=ABS_FLOOR, ratio_tol=RATIO_TOL) -> ComparisonReport:
    """Sub-solution ``u`` against super-solution ``v`` on ``[a, b]``."""
    c, p = _resolve(constants, p)
    _common(u, v)
    hyp = _sign_margins(u, v, c, p, abs_floor)
    ends = [0, u.grid.n - 1]
    for k in ends:
        if u.u[k] > v.u[k] * (1 + ratio_tol):
            raise HypothesisViolation(
                f"boundary ordering fails at r={u.r[k]:.6g}: u={u.u[k]:.6g} > v={v.u[k]:.6g}",
                hypothesis="boundary_order", node=k,
            )
    b_ratio = float(max(u.u[k] / v.u[k] for k in ends))
    hyp["boundary_ordered"] = True
    sup, k = _ratio(u, v)
    return ComparisonReport(sup, b_ratio, k, float(u.r[k]), hyp, ratio_tol)


def tightest_growth_constants(u: RadialFunction, v: RadialFunction, p):
    """Largest ``c1g`` and smallest ``c2g`` valid on the samples."""
    w = u.r ** (2.0 / (p - 1))
    return float((v.u * w).min()), float(max((u.u * w).max(), (v.u * w).max()))


def _tail_slope(r, q, decades=1.0):
    m = r <= r[0] * 10**decades
    if m.sum() < 3:
        m = slice(0, 3)
    A = np.vstack([np.log(r[m]), np.ones(np.size(r[m]))]).T
    coef, *_ = np.linalg.lstsq(A, np.log(q[m]), rcond=None)
    return float(coef[0])


def check_ball(u: RadialFunction, v: RadialFunction, constants: ConstantSet, p=None,
               c1g: Optional[float] = None, c2g: Optional[float] = None,
               abs_floor=ABS_FLOOR, ratio_tol=RATIO_TOL, growth_tol=0.05) -> ComparisonReport:
    """Sub-solution ``u`` against super-solution ``v`` on ``(0, r0]``.

    With explicit ``c1g``/``c2g`` the growth hypotheses are checked nodewise.
    When they are omitted the tightest sampled values are used; since any
    finite sample set is bounded, ``u r^(2/(p-1))`` and ``v r^(2/(p-1))`` must
    also not grow like a power of ``1/r`` over the innermost decade
    (log-slope above ``-growth_tol``).
    """
    c, p = _resolve(constants, p)
    _common(u, v)
    g = 2.0 / (p - 1)
    w = u.r**g
    qu, qv = u.u * w, v.u * w
    if c1g is None or c2g is None:
        t1, t2 = tightest_growth_constants(u, v, p)
        c1g = t1 if c1g is None else c1g
        c2g = t2 if c2g is None else c2g
        for who, q in (("u", qu), ("v", qv)):
            slope = _tail_slope(u.r, np.maximum(q, 1e-300))
            if slope < -growth_tol:
                raise GrowthHypothesisViolation(
                    f"{who} r^(2/(p-1)) grows like r^({slope:.3g}) near 0",
                    hypothesis=f"{who} <= c2g r^(-2/(p-1))", node=0, slope=slope,
                )
    checks = [("c1g r^(-2/(p-1)) <= v", c1g - qv), ("u <= c2g r^(-2/(p-1))", qu - c2g),
              ("v <= c2g r^(-2/(p-1))", qv - c2g)]
    for name, excess in checks:
        bad = excess > ratio_tol * max(c2g, 1e-300)
        if bad.any():
            k = int(np.argmax(excess))
            raise GrowthHypothesisViolation(
                f"growth hypothesis '{name}' fails at r={u.r[k]:.6g}", hypothesis=name, node=k,
            )
    if not c1g > 0:
        raise GrowthHypothesisViolation("c1g must be positive", hypothesis="c1g > 0", node=-1)
    hyp = _sign_margins(u, v, c, p, abs_floor)
    hyp.update({"c1g": float(c1g), "c2g": float(c2g)})
    k = u.grid.n - 1
    if u.u[k] > v.u[k] * (1 + ratio_tol):
        raise HypothesisViolation(
            f"u(r0)={u.u[k]:.6g} exceeds v(r0)={v.u[k]:.6g}", hypothesis="boundary_order", node=k,
        )
    sup, kk = _ratio(u, v)
    return ComparisonReport(sup, float(u.u[k] / v.u[k]), kk, float(u.r[kk]), hyp, ratio_tol)


# ------------------------------------------------------------ pair generation

_SUB_KINDS = ("PowerK", "TauPlusSub", "TauPlusSubGeneral", "TauMinusSub", "LogSub", "KShiftSub")
_SUPER_KINDS = ("PowerSuper", "PowerK", "LogSuper", "KShiftSuper", "EpsSuper", "LogHalfSuper")
# kinds whose growth is exactly of order r^(-2/(p-1))
_BALL_SUPER = ("PowerK", "KShiftSuper")


def _scaled(barrier, grid, factor):
    f = barrier.radial(grid)
    return RadialFunction(grid, factor * f.u, factor * f.du, factor * f.ddu)


def _random_barrier(kinds, direction, c, p, rng, tries=50):
    regime = classify_regime(p, c).kind
    for _ in range(tries):
        kind = kinds[int(rng.integers(len(kinds)))]
        try:
            free = sample_parameters(kind, c, p, rng)
            if free.get("direction", direction) != direction:
                continue
            b = make_barrier(kind, c, p, **free)
        except PucciSingularError:
            continue
        if b.direction == direction:
            return b
    raise RuntimeError(f"no {direction} barrier found for regime {regime.name}")


def random_pair(c: ConstantSet, p, rng, mode="annulus", n=512):
    """A random (Sub, Super) pair with ordered boundary data on a common grid.

    A sub-solution times ``t <= 1`` is still a sub-solution and a
    super-solution times ``T >= 1`` is still a super-solution, so the sub is
    scaled down until the boundary data are ordered.
    """
    c, p = _resolve(c, p)
    regime = classify_regime(p, c)
    if mode == "ball" and regime.kind not in (RegimeKind.SUBCRITICAL, RegimeKind.SUPERCRITICAL):
        raise RegimeMismatch(f"ball pairs need K, which is undefined in the {regime.name} regime",
                             regime=regime.name)
    sup_kinds = _BALL_SUPER if mode == "ball" else _SUPER_KINDS
    sub = _random_barrier(_SUB_KINDS, SUB, c, p, rng)
    sup = _random_barrier(sup_kinds, SUPER, c, p, rng)
    r0 = min(sub.validity_radius, sup.validity_radius)
    if mode == "ball":
        grid = LogGrid.build(1e-8 * r0, r0, n)
    else:
        a = r0 * 10 ** -float(rng.uniform(0.5, 4))
        grid = LogGrid.build(a, r0, n)
    us, vs = sub.radial(grid), sup.radial(grid)
    ends = [grid.n - 1] if mode == "ball" else [0, grid.n - 1]
    t = min([1.0] + [vs.u[k] / us.u[k] for k in ends if us.u[k] > 0])
    t *= float(rng.uniform(0.5, 1.0))
    return sub, sup, _scaled(sub, grid, t), vs

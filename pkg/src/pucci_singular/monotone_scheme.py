"""Monotone construction of singular solutions on shrinking annuli.

Iterate ``n`` solves the Dirichlet problem

    -M+(D^2 v_n) + |v_n|^(p-1) v_n = mu w_n / r^2   on [r_n, 1]

where ``w_n`` is the previous iterate on ``[r_(n-1), 1]`` and the sub-solution
on the new annulus ``[r_n, r_(n-1)]``. The sequence is non-decreasing and
stays between the sub- and super-solution.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import _kernels
from .barriers import Barrier, eval_barrier, make_barrier
from .constants import ConstantSet, RegimeKind, classify_regime, constants_for
from .errors import (
    BracketViolation,
    MonotonicityViolation,
    NewtonDivergence,
    NonMonotoneOperator,
    RegimeMismatch,
    TailTooShort,
)
from .radial_pucci import LogGrid, RadialFunction

# the centred second difference has a rounding floor near eps / h^2
NEWTON_TOL = 1e-10
SCHEME_TOL = 1e-8
MONO_TOL = 1e-10
BRACKET_TOL = 1e-8
N_MAX = 24
MAX_HALVINGS = 30


class Case(enum.Enum):
    TAU_PLUS = "TauPlus"
    TAU_MINUS = "TauMinus"
    LOG_CRITICAL = "LogCritical"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).replace("-", "").replace("_", "").lower()
        for case in cls:
            if case.value.lower() == key:
                return case
        raise ValueError(f"unknown case {value!r}; choose tau-plus, tau-minus or log-critical")


@dataclass(frozen=True)
class AnnulusProblem:
    """Dirichlet data on a log grid over ``[a, b]``.

    ``lower``/``upper`` optionally bracket the solution; they are used only by
    the Picard fallback.
    """

    grid: LogGrid
    f: np.ndarray
    boundary: tuple
    constants: ConstantSet
    lower: Optional[np.ndarray] = field(default=None, repr=False)
    upper: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        if f.shape != (self.grid.n,):
            raise ValueError("f must have one value per grid node")
        if np.any(f < 0):
            raise ValueError("the source f must be non-negative")
        if min(self.boundary) < 0:
            raise ValueError("boundary values must be non-negative")
        if not self.grid.is_geometric():
            raise ValueError("the annulus grid must be log-uniform")
        object.__setattr__(self, "f", f)

    @property
    def a(self):
        return self.grid.r_min


def _row_scale(v, r2f, r2, h, c, p):
    """Per-row magnitude used for the relative Newton residual."""
    vm, vc, vp = v[:-2], v[1:-1], v[2:]
    d1 = np.abs(vp - vm) / (2 * h)
    d2 = np.abs(vp - 2 * vc + vm) / h**2 + d1
    out = np.zeros_like(v)
    out[1:-1] = c.Lam * (d2 + (c.N - 1) * d1) + r2[1:-1] * np.abs(vc) ** p + np.abs(r2f[1:-1])
    out[0] = out[-1] = 1.0
    return np.where(out > 0, out, 1.0)


def _relative_residual(v, r2f, r2, h, c, p):
    G, *_ = _kernels.scheme_system(v, h, c.lam, c.Lam, int(c.N), p, r2f, r2)
    return G, float(np.max(np.abs(G) / _row_scale(v, r2f, r2, h, c, p)))


def solve_annulus_bvp(prob: AnnulusProblem, p, v0=None, newton_tol=NEWTON_TOL,
                      max_iter=200, max_halvings=MAX_HALVINGS) -> RadialFunction:
    """Discrete solution of ``-M+(D^2 v) + |v|^(p-1) v = f`` with Dirichlet data.

    Centred second-order differences in ``s = log r``; rows are scaled by
    ``r^2``. Semismooth Newton with step halving; when halving is exhausted a
    full step clipped to the bracket (or to ``v >= 0``) is taken instead.
    """
    c = prob.constants
    grid = prob.grid
    h = grid.log_step
    r2 = grid.nodes**2
    r2f = r2 * prob.f
    n = grid.n
    if v0 is None:
        v = np.linspace(prob.boundary[0], prob.boundary[1], n)
    else:
        v = np.array(v0, dtype=float)
    v[0], v[-1] = prob.boundary
    lower = np.zeros(n) if prob.lower is None else prob.lower
    upper = prob.upper

    G, res = _relative_residual(v, r2f, r2, h, c, p)
    for it in range(max_iter):
        if res <= newton_tol:
            break
        G, lo, di, up, min_off = _kernels.scheme_system(
            v, h, c.lam, c.Lam, int(c.N), p, r2f, r2)
        if min_off < 0:
            raise NonMonotoneOperator(
                f"negative off-diagonal {min_off:.3e}; refine the grid (h = {h:.3g})",
                min_offdiag=min_off, h=h,
            )
        step = np.zeros(n)
        step[1:-1] = _kernels.tridiag_solve(
            np.ascontiguousarray(lo[1:-1]), np.ascontiguousarray(di[1:-1]),
            np.ascontiguousarray(up[1:-1]), np.ascontiguousarray(-G[1:-1]))
        alpha = 1.0
        for _ in range(max_halvings + 1):
            trial = v + alpha * step
            G_t, res_t = _relative_residual(trial, r2f, r2, h, c, p)
            if res_t < res or res_t <= newton_tol:
                break
            alpha *= 0.5
        else:
            # Picard fallback: full step projected onto the bracket
            trial = np.maximum(v + step, lower)
            if upper is not None:
                trial = np.minimum(trial, upper)
            trial[0], trial[-1] = prob.boundary
            G_t, res_t = _relative_residual(trial, r2f, r2, h, c, p)
        if not np.all(np.isfinite(trial)):
            raise NewtonDivergence("non-finite Newton iterate", iteration=it)
        moved = float(np.max(np.abs(trial - v) / np.abs(trial).clip(min=1e-300)))
        v, G, res = trial, G_t, res_t
        if moved < 1e-15:
            break
    if not res <= newton_tol:
        raise NewtonDivergence(
            f"relative residual {res:.3e} above {newton_tol:.1e} after {max_iter} iterations",
            residual=res,
        )
    return RadialFunction.from_samples(grid, v)


def discrete_relative_residual(v: RadialFunction, f, constants: ConstantSet, p):
    """``max_i |G_i| / scale_i`` of the discrete equation at interior nodes."""
    r2 = v.r**2
    _, res = _relative_residual(np.array(v.u), r2 * np.asarray(f), r2, v.grid.log_step,
                                constants, p)
    return res


@dataclass(frozen=True)
class SchemeCertificate:
    monotone: bool
    bracketed: bool
    residual_norm: float
    increment_norm: float
    increment_radius: float
    min_monotone_margin: float
    min_bracket_margin: float
    iterations: int
    stopped_by: str

    def to_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class SchemeResult:
    case: Case
    iterates: List[RadialFunction] = field(repr=False)
    limit: RadialFunction = field(repr=False)
    certificate: SchemeCertificate
    sub: Barrier = field(repr=False)
    super: Barrier = field(repr=False)
    radii: tuple
    p: float

    def converged_radius(self, slope_tol=1e-3):
        """Smallest radius above which the last two iterates have matching log-slopes.

        Below it the limit still carries the boundary layer of the inner
        Dirichlet condition.
        """
        if len(self.iterates) < 2:
            return float(self.limit.r[0])
        a, b = self.iterates[-1], self.iterates[-2]
        k = b.grid.n
        with np.errstate(divide="ignore", invalid="ignore"):
            sa = (a.r * a.du / a.u)[-k:]
            sb = b.r * b.du / b.u
            gap = np.abs(sa - sb)[:-1]
        bad = np.nonzero(~(gap <= slope_tol))[0]
        return float(b.r[bad.max() + 1 if bad.size else 0])

    def trusted_limit(self, slope_tol=1e-3) -> RadialFunction:
        """The limit restricted to the converged range, without a zero outer node."""
        r_conv = self.converged_radius(slope_tol)
        r = self.limit.r
        keep = (r >= r_conv) & (self.limit.u > 0)
        if np.count_nonzero(keep) < 3:
            raise TailTooShort("fewer than three converged nodes; raise n_max or nodes",
                               converged_radius=float(r_conv))
        u = self.limit.restrict(r_conv)
        if u.u[-1] <= 0:
            u = u.restrict(0.0, float(u.r[-2]))
        return u

    def to_dict(self):
        return {
            "case": self.case.value,
            "p": self.p,
            "radii": list(self.radii),
            "sub": self.sub.to_dict(),
            "super": self.super.to_dict(),
            "certificate": self.certificate.to_dict(),
        }


def default_pair(case: Case, c: ConstantSet, p):
    """Sub- and super-solution bracketing the iterates of each case."""
    if case is Case.TAU_PLUS:
        sub = make_barrier("TauPlusSub", c, p)
        sup = make_barrier("PowerSuper", c, p, c=max(1.0, sub.params["eps"]), gamma=c.tau_plus)
    elif case is Case.TAU_MINUS:
        sub = make_barrier("TauMinusSub", c, p)
        sup = make_barrier("PowerSuper", c, p, c=2 * sub.params["eps"], gamma=c.tau_minus)
    else:
        sub = make_barrier("LogSub", c, p, a=c.K_bar, c=2.0)
        sup = make_barrier("LogSuper", c, p, b=2 * c.K_bar, delta=1.0, c=2.0)
    return sub, sup


_ADMISSIBLE = {
    Case.TAU_PLUS: {RegimeKind.SUBCRITICAL},
    Case.TAU_MINUS: {RegimeKind.SUBCRITICAL, RegimeKind.INTERMEDIATE},
    Case.LOG_CRITICAL: {RegimeKind.LOG_CRITICAL},
}


def default_radii(n_max):
    return tuple(2.0 ** (-n) for n in range(1, n_max + 1))


def _scheme_grid(radii, nodes):
    """Log-uniform grid on ``[r_min, 1]`` with every radius snapped to a node."""
    depth = -math.log(radii[-1])
    intervals = int(math.ceil((nodes - 1) / len(radii))) * len(radii)
    h = depth / intervals
    index = [int(round(-math.log(r) / h)) for r in radii]
    if any(b <= a for a, b in zip(index, index[1:])) or index[0] < 2:
        raise ValueError("radii too close together for the requested resolution")
    s = np.linspace(-depth, 0.0, intervals + 1)
    nodes_r = np.exp(s)
    nodes_r[-1] = 1.0
    # position of r_n counted from the outer radius
    return nodes_r, [intervals - k for k in index]


def run_scheme(case, constants: ConstantSet, p=None, radii: Optional[Sequence[float]] = None,
               nodes=2048, mono_tol=MONO_TOL, bracket_tol=BRACKET_TOL, scheme_tol=SCHEME_TOL,
               n_max=N_MAX, sub: Optional[Barrier] = None, super_: Optional[Barrier] = None,
               newton_tol=NEWTON_TOL, eq_tol=1e-12, strict=True) -> SchemeResult:
    """Run the annulus iteration and certify monotonicity and bracketing.

    ``nodes`` is the resolution of the final grid on ``[r_N, 1]``; it is
    rounded up so that every radius is a grid node. The outer boundary value
    is the sub-solution's value at ``r = 1`` (zero for TauPlusSub).
    Stops when the relative change between consecutive iterates on the
    fixed outer domain ``[r_(n//2), 1]`` drops below ``scheme_tol``, or
    after the last radius.
    """
    case = Case.parse(case)
    p = constants.p if p is None else p
    c = constants if constants.p == p else constants_for(
        constants.lam, constants.Lam, constants.N, constants.mu, p)
    regime = classify_regime(p, c, eq_tol)
    if regime.kind not in _ADMISSIBLE[case]:
        raise RegimeMismatch(f"case {case.value} is not admissible in the {regime.name} regime",
                             case=case.value, regime=regime.name)
    if not c.mu > 0:
        raise RegimeMismatch("the monotone scheme needs mu > 0", mu=c.mu)
    radii = default_radii(n_max) if radii is None else tuple(float(r) for r in radii)[:n_max]
    if any(not 0 < r < 1 for r in radii) or any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing in (0, 1)")
    if sub is None or super_ is None:
        d_sub, d_sup = default_pair(case, c, p)
        sub = d_sub if sub is None else sub
        super_ = d_sup if super_ is None else super_

    r_all, starts = _scheme_grid(radii, nodes)
    sub_all = eval_barrier(sub, r_all)[0]
    sup_all = eval_barrier(super_, r_all)[0]
    outer = float(sub_all[-1])
    iterates: List[RadialFunction] = []
    prev = None
    min_mono = math.inf
    min_brk = math.inf
    increment = math.inf
    inc_radius = 1.0
    stopped_by = "radii"
    for n, start in enumerate(starts):
        sl = slice(start, None)
        grid = LogGrid.from_nodes(r_all[sl])
        w = sub_all[sl].copy()
        v0 = w.copy()
        if prev is not None:
            k = prev.size
            w[-k:] = prev
            v0[-k:] = prev
        f = c.mu * w / grid.nodes**2
        prob = AnnulusProblem(grid, f, (float(sub_all[start]), outer), c,
                              lower=sub_all[sl], upper=sup_all[sl])
        sol = solve_annulus_bvp(prob, p, v0=v0, newton_tol=newton_tol)
        v = np.array(sol.u)

        lo_m = (v - sub_all[sl]) / np.maximum(np.abs(sub_all[sl]), np.abs(v)).clip(min=1e-300)
        hi_m = (sup_all[sl] - v) / np.abs(sup_all[sl]).clip(min=1e-300)
        brk = float(min(lo_m.min(), hi_m.min()))
        min_brk = min(min_brk, brk)
        if strict and brk < -bracket_tol:
            side = "below the sub-solution" if lo_m.min() < hi_m.min() else "above the super-solution"
            node = int(np.argmin(np.minimum(lo_m, hi_m)))
            raise BracketViolation(
                f"iterate {n + 1} is {side} at r={grid.nodes[node]:.6g} (margin {brk:.3e})",
                iteration=n + 1, r=float(grid.nodes[node]), margin=brk,
            )
        if prev is not None:
            k = prev.size
            rel = (v[-k:] - prev) / np.abs(prev).clip(min=1e-300)
            # the outer boundary node is fixed and may be zero
            rel = rel[:-1] if prev[-1] == 0 else rel
            mono = float(rel.min())
            min_mono = min(min_mono, mono)
            if strict and mono < -mono_tol:
                node = int(np.argmin(rel))
                raise MonotonicityViolation(
                    f"iterate {n + 1} drops below iterate {n} at r={grid.nodes[-k + node]:.6g} "
                    f"(relative {mono:.3e})",
                    iteration=n + 1, r=float(grid.nodes[-k + node]), margin=mono,
                )
            half = starts[n // 2]
            m = r_all.size - half
            inc_radius = float(r_all[half])
            a, b = v[-m:-1], prev[-m:-1]
            increment = float(np.max(np.abs(a - b) / np.abs(b).clip(min=1e-300)))
        iterates.append(sol)
        prev = v
        if increment < scheme_tol:
            stopped_by = "increment"
            break

    limit = iterates[-1]
    # frozen source of the last Dirichlet problem
    w = sub_all[starts[len(iterates) - 1]:].copy()
    if len(iterates) > 1:
        k = iterates[-2].grid.n
        w[-k:] = iterates[-2].u
    res = discrete_relative_residual(limit, c.mu * w / limit.r**2, c, p)
    cert = SchemeCertificate(
        monotone=min_mono >= -mono_tol,
        bracketed=min_brk >= -bracket_tol,
        residual_norm=res,
        increment_norm=increment,
        increment_radius=inc_radius,
        min_monotone_margin=min_mono if math.isfinite(min_mono) else 0.0,
        min_bracket_margin=min_brk,
        iterations=len(iterates),
        stopped_by=stopped_by,
    )
    return SchemeResult(case, iterates, limit, cert, sub, super_,
                        tuple(float(r_all[s]) for s in starts[:len(iterates)]), float(p))

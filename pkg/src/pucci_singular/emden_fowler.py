"""Emden-Fowler variables ``t = log r``, ``x(t) = e^(2t/(p-1)) u(e^t)``.

For convex decreasing solutions the radial equation becomes the autonomous ODE

    x'' = (l1 + l2) x' - l1 l2 x + x^p / Lambda

with ``l1 = 2/(p-1) - tau_plus`` and ``l2 = 2/(p-1) - tau_minus``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .constants import ConstantSet, explicit_K
from .errors import InsufficientTail, KUndefined, NegativeX, StepFailure
from .radial_pucci import LogGrid, Provenance, RadialFunction

X_MAX = 1e12
X_MIN = 1e-300


class Termination(enum.Enum):
    SPAN_REACHED = "SpanReached"
    BLOW_UP = "BlowUp"
    UNDERFLOW = "Underflow"
    STEP_FAILURE = "StepFailure"


_STATUS = {
    _kernels.SPAN_REACHED: Termination.SPAN_REACHED,
    _kernels.BLOW_UP: Termination.BLOW_UP,
    _kernels.UNDERFLOW: Termination.UNDERFLOW,
    _kernels.STEP_FAILURE: Termination.STEP_FAILURE,
}


@dataclass(frozen=True)
class EFState:
    t: float
    x: float
    xp: float


@dataclass(frozen=True)
class EFSamples:
    """Transformed samples; ``r`` is kept so the inverse map is exact."""

    t: np.ndarray
    x: np.ndarray
    xp: np.ndarray
    r: np.ndarray
    p: float


@dataclass(frozen=True)
class EFTrajectory:
    t: np.ndarray
    x: np.ndarray
    xp: np.ndarray
    direction: str
    termination: Termination
    nfev: int = 0

    def __len__(self):
        return self.t.size

    @property
    def states(self):
        return [EFState(float(a), float(b), float(c)) for a, b, c in zip(self.t, self.x, self.xp)]

    @property
    def final(self):
        return EFState(float(self.t[-1]), float(self.x[-1]), float(self.xp[-1]))


def _g(p):
    return 2.0 / (p - 1)


def to_ef(u: RadialFunction, p) -> EFSamples:
    g = _g(p)
    r = u.r
    rg = r**g
    x = rg * u.u
    xp = g * x + rg * r * u.du
    return EFSamples(np.log(r), x, xp, np.array(r), p)


def from_ef(samples: EFSamples, c: Optional[ConstantSet] = None) -> RadialFunction:
    """Invert :func:`to_ef`.

    The second derivative comes from the ODE when constants are given
    (valid on solutions only) and from finite differences otherwise.
    """
    p = samples.p
    g = _g(p)
    r = samples.r
    rmg = r ** (-g)
    u = rmg * samples.x
    du = rmg / r * (samples.xp - g * samples.x)
    grid = LogGrid.from_nodes(r)
    if c is not None:
        xpp = np.array([ef_rhs(EFState(0.0, a, b), p, c) for a, b in zip(samples.x, samples.xp)])
        # u'' r^(g+2) = x'' - (2g+1) x' + g(g+1) x
        ddu = rmg / r**2 * (xpp - (2 * g + 1) * samples.xp + g * (g + 1) * samples.x)
        return RadialFunction(grid, u, du, ddu, Provenance.ANALYTIC)
    from .radial_pucci import fd_derivatives

    _, ddu = fd_derivatives(grid, u)
    return RadialFunction(grid, u, du, ddu, Provenance.FINITE_DIFFERENCE)


def _coefficients(p, c: ConstantSet):
    g = _g(p)
    l1 = g - c.tau_plus
    l2 = g - c.tau_minus
    return l1, l2


def _linear_coefficient(p, c: ConstantSet):
    """``l1 l2``, taken as ``K^(p-1) / Lambda`` when K exists.

    Both are equal in exact arithmetic; the second makes ``x = K`` a fixed
    point of the floating-point right-hand side, so the equilibrium does not
    drift along its unstable direction.
    """
    l1, l2 = _coefficients(p, c)
    try:
        K = explicit_K(p, c)
    except KUndefined:
        return l1 * l2
    return (1.0 / c.Lam) * abs(K) ** (p - 1)


def ef_rhs(state: EFState, p, c: ConstantSet):
    """``x''`` of the autonomous equation at ``(x, x')``."""
    if state.x < 0:
        raise NegativeX(f"x = {state.x} < 0", x=state.x)
    l1, l2 = _coefficients(p, c)
    a0 = _linear_coefficient(p, c)
    x = state.x
    return (l1 + l2) * state.xp + x * ((1.0 / c.Lam) * abs(x) ** (p - 1) - a0)


@dataclass(frozen=True)
class Equilibrium:
    x: float
    eigenvalues: tuple

    @property
    def is_saddle(self):
        a, b = self.eigenvalues
        return np.isreal(a) and np.isreal(b) and np.real(a) * np.real(b) < 0


def _quadratic_roots(b, c0):
    # roots of s^2 - b s + c0
    disc = b * b - 4 * c0
    if disc >= 0:
        q = 0.5 * (b + math.copysign(math.sqrt(disc), b)) if b != 0 else 0.5 * math.sqrt(disc)
        if q == 0:
            return (0.0, 0.0)
        other = c0 / q
        return tuple(sorted((q, other)))
    root = math.sqrt(-disc)
    return (complex(b / 2, -root / 2), complex(b / 2, root / 2))


def equilibria(p, c: ConstantSet):
    """Origin with eigenvalues ``(l1, l2)``, plus ``K`` when it is defined."""
    l1, l2 = _coefficients(p, c)
    out = [Equilibrium(0.0, (l1, l2))]
    try:
        K = explicit_K(p, c)
    except KUndefined:
        return out
    out.append(Equilibrium(K, _quadratic_roots(l1 + l2, l1 * l2 * (1 - p))))
    return out


def integrate(start: EFState, p, c: ConstantSet, t_span, direction="forward",
              rel_tol=1e-10, abs_tol=1e-12, x_max=X_MAX, x_min=X_MIN,
              h0=0.0, max_steps=2_000_000, raise_on_failure=False) -> EFTrajectory:
    """Adaptive Dormand-Prince 5(4) integration over ``t_span`` time units.

    Stops early with ``BlowUp`` once ``x > x_max`` and ``Underflow`` once
    ``x < x_min`` (which includes crossing zero).
    """
    if not (rel_tol > 0 and abs_tol > 0):
        raise ValueError("tolerances must be positive")
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    sign = 1.0 if direction == "forward" else -1.0
    l1, l2 = _coefficients(p, c)
    t, x, xp, status, nfev = _kernels.dopri5_ef(
        float(start.t), float(start.x), float(start.xp), float(start.t + sign * abs(t_span)),
        l1 + l2, _linear_coefficient(p, c), 1.0 / c.Lam, float(p), rel_tol, abs_tol, h0,
        x_max, x_min,
        int(max_steps),
    )
    term = _STATUS[status]
    if term is Termination.STEP_FAILURE and raise_on_failure:
        raise StepFailure(f"step size underflow at t={t[-1]}", t=float(t[-1]))
    return EFTrajectory(np.asarray(t), np.asarray(x), np.asarray(xp), direction, term, int(nfev))


def eigendirection_start(p, c: ConstantSet, which="lambda2", amplitude=None, t0=0.0):
    """State on a linear eigendirection of the origin.

    Default amplitude is ``1e-8 K`` (or ``1e-8`` when K is undefined).
    """
    l1, l2 = _coefficients(p, c)
    rate = l2 if which == "lambda2" else l1
    if amplitude is None:
        try:
            amplitude = 1e-8 * explicit_K(p, c)
        except KUndefined:
            amplitude = 1e-8
    return EFState(t0, amplitude, rate * amplitude)


@dataclass(frozen=True)
class RateFit:
    slope: float
    stderr: float
    intercept: float
    n_points: int
    algebraic_exponent: Optional[float] = None
    algebraic_stderr: Optional[float] = None

    @property
    def kind(self):
        return "algebraic" if self.algebraic_exponent is not None else "exponential"


def _linfit(xv, yv):
    A = np.vstack([xv, np.ones_like(xv)]).T
    coef, *_ = np.linalg.lstsq(A, yv, rcond=None)
    n = xv.size
    resid = yv - A @ coef
    dof = max(n - 2, 1)
    s2 = float(resid @ resid) / dof
    sxx = float(((xv - xv.mean()) ** 2).sum())
    stderr = math.sqrt(s2 / sxx) if sxx > 0 else math.inf
    return float(coef[0]), float(coef[1]), stderr


def asymptotic_rate(traj: EFTrajectory, tail_fraction=0.25, min_points=20,
                    flat_slope=1e-3) -> RateFit:
    """Least-squares slope of ``log x`` against ``t`` over the trailing tail.

    "Trailing" follows the integration order. When the exponential slope is
    flatter than ``flat_slope`` and the tail lies in ``t < 0``, ``log x`` is
    also fitted against ``log(-t)`` to expose algebraic decay.
    """
    t, x = np.asarray(traj.t), np.asarray(traj.x)
    span = abs(t[-1] - t[0])
    if span == 0:
        raise InsufficientTail("trajectory has zero time span")
    cut = t[-1] - np.sign(t[-1] - t[0]) * tail_fraction * span
    mask = (np.abs(t - t[-1]) <= abs(t[-1] - cut)) & (x > 0)
    if mask.sum() < min_points:
        raise InsufficientTail(
            f"only {int(mask.sum())} positive samples in the tail (need {min_points})",
            n=int(mask.sum()),
        )
    tt, lx = t[mask], np.log(x[mask])
    slope, intercept, stderr = _linfit(tt, lx)
    alg = alg_err = None
    if abs(slope) < flat_slope and np.all(tt < 0):
        alg, _, alg_err = _linfit(np.log(-tt), lx)
    return RateFit(slope, stderr, intercept, int(mask.sum()), alg, alg_err)


def trajectory_to_radial(traj: EFTrajectory, p, c: Optional[ConstantSet] = None):
    """Sorted ``(r, u)`` samples of a trajectory, restricted to ``x > 0``."""
    order = np.argsort(traj.t)
    t, x, xp = traj.t[order], traj.x[order], traj.xp[order]
    keep = x > 0
    t, x, xp = t[keep], x[keep], xp[keep]
    r = np.exp(t)
    return r, r ** (-_g(p)) * x


def shoot_vanishing_orbit(p, c: ConstantSet, x0, t_end=-40.0, rel_tol=1e-11,
                          abs_tol=1e-14, max_iter=200, probe_factor=4.0):
    """Backward orbit from ``x(0) = x0`` that stays positive and bounded down to ``t_end``.

    Bisects on ``x'(0)``: slopes that are too large cross zero backward,
    slopes that are too small blow up. Returns the trajectory truncated at the
    last event-free time together with the bracketing slopes.
    """
    probe_span = abs(t_end) * probe_factor
    x_max = max(1e6, 1e6 * x0)

    def outcome(slope):
        traj = integrate(EFState(0.0, x0, slope), p, c, probe_span, "backward",
                         rel_tol, abs_tol, x_max=x_max, x_min=0.0)
        if traj.termination is Termination.UNDERFLOW:
            return 1, traj
        if traj.termination is Termination.BLOW_UP:
            return -1, traj
        # no event: decide by the trend at the far end
        return (1 if traj.xp[-1] > 0 else -1), traj

    hi, lo = 1.0, -1.0
    while outcome(hi)[0] != 1:
        hi *= 2
        if hi > 1e12:
            raise StepFailure("no upper slope bracket found")
    while outcome(lo)[0] != -1:
        lo *= 2
        if lo < -1e12:
            raise StepFailure("no lower slope bracket found")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if outcome(mid)[0] == 1:
            hi = mid
        else:
            lo = mid
    # pick the bracket end whose orbit survives longest in the positive range
    best = None
    for slope in (lo, hi):
        traj = integrate(EFState(0.0, x0, slope), p, c, abs(t_end), "backward",
                         rel_tol, abs_tol, x_max=x_max, x_min=0.0)
        if best is None or traj.t[-1] < best[1].t[-1]:
            best = (slope, traj)
    return best[1], (lo, hi)


class Fate(enum.Enum):
    EXIT_ABOVE = "ExitAbove"
    EXIT_BELOW = "ExitBelow"
    CONVERGES_TO_K = "ConvergesToK"
    CONVERGES_TO_ZERO = "ConvergesToZero"
    UNDECIDED = "Undecided"


@dataclass(frozen=True)
class FateReport:
    fate: Fate
    trajectory: EFTrajectory
    decay_rate: Optional[float] = None

    def to_dict(self):
        tr = self.trajectory
        return {"fate": self.fate.value, "t_end": float(tr.t[-1]), "x_end": float(tr.x[-1]),
                "xp_end": float(tr.xp[-1]), "termination": tr.termination.value,
                "decay_rate": self.decay_rate}


def backward_fate(start: EFState, p, c: ConstantSet, t_span=2000.0, rel_tol=1e-10,
                  abs_tol=1e-300, k_tol=1e-6, zero_tol=1e-8) -> FateReport:
    """Follow ``start`` backward and report whether it leaves ``[0, 2K]``.

    Orbits that stay inside for the whole span are sorted by their final
    state: close to ``(K, 0)``, close to the origin with a fitted positive
    backward decay rate, or undecided. The default ``abs_tol`` makes the error
    control purely relative, so decaying orbits do not drift through zero.
    """
    K = explicit_K(p, c)
    traj = integrate(start, p, c, t_span, "backward", rel_tol, abs_tol,
                     x_max=2.0 * K, x_min=0.0)
    if traj.termination is Termination.BLOW_UP:
        return FateReport(Fate.EXIT_ABOVE, traj)
    if traj.termination is Termination.UNDERFLOW:
        return FateReport(Fate.EXIT_BELOW, traj)
    if traj.termination is Termination.STEP_FAILURE:
        return FateReport(Fate.UNDECIDED, traj)
    end = traj.final
    if abs(end.x - K) <= k_tol * K and abs(end.xp) <= k_tol * K:
        return FateReport(Fate.CONVERGES_TO_K, traj)
    if end.x <= zero_tol * K:
        try:
            fit = asymptotic_rate(traj)
        except InsufficientTail:
            return FateReport(Fate.UNDECIDED, traj)
        # going backward, decay towards 0 means log x increases with t
        if fit.slope > 0:
            return FateReport(Fate.CONVERGES_TO_ZERO, traj, fit.slope)
    return FateReport(Fate.UNDECIDED, traj)

"""Pucci extremal operators on radial functions and pointwise residuals.

For a radial C^2 function the Hessian has eigenvalues u'' (simple) and u'/r
(multiplicity N-1), so M+ only needs the two scalars ``ddu`` and ``du/r``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .constants import ConstantSet, ProblemParams
from .errors import GridTooSmall, NonPositiveSample

# relative dead-zone for the sign split of the Pucci formula
DEAD_ZONE = 1e-14


class Provenance(enum.Enum):
    ANALYTIC = "Analytic"
    FINITE_DIFFERENCE = "FiniteDifference"


@dataclass(frozen=True)
class LogGrid:
    """Geometrically spaced radii ``r_min = nodes[0] < ... < nodes[-1] = r_max``."""

    r_min: float
    r_max: float
    n: int
    nodes: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def build(cls, r_min, r_max, n):
        if not 0 < r_min < r_max:
            raise ValueError(f"need 0 < r_min < r_max, got {r_min}, {r_max}")
        if n < 3:
            raise GridTooSmall(f"a LogGrid needs n >= 3, got {n}", n=n)
        s = np.linspace(np.log(r_min), np.log(r_max), n)
        nodes = np.exp(s)
        nodes[0], nodes[-1] = r_min, r_max
        nodes.setflags(write=False)
        return cls(float(r_min), float(r_max), int(n), nodes)

    @classmethod
    def from_nodes(cls, nodes):
        nodes = np.array(nodes, dtype=float)
        if nodes.size < 3 or np.any(np.diff(nodes) <= 0) or nodes[0] <= 0:
            raise ValueError("nodes must be positive and strictly increasing (n >= 3)")
        nodes.setflags(write=False)
        return cls(float(nodes[0]), float(nodes[-1]), nodes.size, nodes)

    @property
    def log_step(self):
        return (np.log(self.r_max) - np.log(self.r_min)) / (self.n - 1)

    def is_geometric(self, rtol=1e-9):
        ratios = self.nodes[1:] / self.nodes[:-1]
        return bool(np.allclose(ratios, ratios[0], rtol=rtol, atol=0))


@dataclass(frozen=True)
class RadialFunction:
    grid: LogGrid
    u: np.ndarray
    du: np.ndarray
    ddu: np.ndarray
    provenance: Provenance = Provenance.ANALYTIC

    def __post_init__(self):
        for name in ("u", "du", "ddu"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (self.grid.n,):
                raise ValueError(f"{name} has shape {arr.shape}, grid has {self.grid.n} nodes")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def r(self):
        return self.grid.nodes

    @classmethod
    def from_callable(cls, grid, fn):
        """``fn(r) -> (value, d/dr, d2/dr2)`` evaluated on every node."""
        u, du, ddu = fn(grid.nodes)
        return cls(grid, u, du, ddu, Provenance.ANALYTIC)

    @classmethod
    def from_samples(cls, grid, u, order=4):
        u = np.asarray(u, dtype=float)
        du, ddu = fd_derivatives(grid, u, order=order)
        return cls(grid, u, du, ddu, Provenance.FINITE_DIFFERENCE)

    def restrict(self, r_lo, r_hi=np.inf):
        mask = (self.r >= r_lo) & (self.r <= r_hi)
        grid = LogGrid.from_nodes(self.r[mask])
        return RadialFunction(grid, self.u[mask], self.du[mask], self.ddu[mask], self.provenance)


def _split(x, hi, lo, scale):
    # Lambda * x+ - lambda * x-, with |x| <= DEAD_ZONE * scale treated as 0
    x = np.where(np.abs(x) <= DEAD_ZONE * scale, 0.0, x)
    return np.where(x > 0, hi * x, lo * x)


def pucci_radial(ddu, du_over_r, params, sign="plus"):
    """Evaluate M+ (``sign='plus'``) or M- on the radial Hessian spectrum.

    ``params`` may be a :class:`ProblemParams` or a :class:`ConstantSet`.
    """
    ddu = np.asarray(ddu, dtype=float)
    du_over_r = np.asarray(du_over_r, dtype=float)
    lam, Lam, N = params.lam, params.Lam, params.N
    scale = np.maximum(np.abs(ddu), np.abs(du_over_r))
    if sign == "plus":
        hi, lo = Lam, lam
    elif sign == "minus":
        hi, lo = lam, Lam
    else:
        raise ValueError(f"sign must be 'plus' or 'minus', got {sign!r}")
    return _split(ddu, hi, lo, scale) + (N - 1) * _split(du_over_r, hi, lo, scale)


def _check_positive(u, allow_zero=False):
    bad = (u < 0) if allow_zero else (u <= 0)
    if np.any(bad) or not np.all(np.isfinite(u)):
        i = int(np.argmax(bad | ~np.isfinite(u)))
        raise NonPositiveSample(f"u[{i}] = {u[i]} is not positive", node=i, value=float(u[i]))


def residual_linear(u: RadialFunction, params, mu=None):
    """``M+(D^2u) + mu u / r^2`` at every node."""
    mu = params.mu if mu is None else mu
    r = u.r
    return pucci_radial(u.ddu, u.du / r, params) + mu * u.u / r**2


def residual_main(u: RadialFunction, params, p=None, allow_zero=False):
    """``M+(D^2u) + mu u / r^2 - u^p``; >= 0 for sub-, <= 0 for super-solutions."""
    p = params.p if p is None else p
    _check_positive(u.u, allow_zero)
    return residual_linear(u, params) - u.u**p


def residual_scale(u: RadialFunction, params, p=None):
    """Per-node magnitude ``u^p + mu u / r^2`` used to report relative residuals."""
    p = params.p if p is None else p
    return np.abs(u.u) ** p + abs(params.mu) * np.abs(u.u) / u.r**2


def relative_residual(u: RadialFunction, params, p=None, allow_zero=False):
    res = residual_main(u, params, p, allow_zero=allow_zero)
    scale = residual_scale(u, params, p)
    return res / np.where(scale > 0, scale, 1.0)


def residual_v_equation(v: RadialFunction, c: ConstantSet, p=None):
    """Residual of ``v'' + (1 + 2(tau - tau_minus)) v'/r - v^p / (Lambda r^((p-1) tau_minus))``.

    ``v = r^tau_minus u`` turns the convex-decreasing form of the main equation
    into this one; sub-solutions have residual >= 0.
    """
    p = c.p if p is None else p
    _check_positive(v.u, allow_zero=True)
    r = v.r
    a = 1 + 2 * (c.tau - c.tau_minus)
    return v.ddu + a * v.du / r - v.u**p / (c.Lam * r ** ((p - 1) * c.tau_minus))


def v_equation_scale(v: RadialFunction, c: ConstantSet, p=None):
    p = c.p if p is None else p
    r = v.r
    a = 1 + 2 * (c.tau - c.tau_minus)
    return (
        np.abs(v.ddu) + a * np.abs(v.du) / r
        + np.abs(v.u) ** p / (c.Lam * r ** ((p - 1) * c.tau_minus))
    )


# one-sided stencils (numerators, denominator) for d/ds and d2/ds2 with a
# uniform step in s = log r
_L1 = {2: ([-3, 4, -1], 2), 4: ([-25, 48, -36, 16, -3], 12)}
_L2 = {2: ([2, -5, 4, -1], 1), 4: ([45, -154, 214, -156, 61, -10], 12)}
# second node, 4th order
_L1_NEXT = ([-3, -10, 18, -6, 1], 12)
_L2_NEXT = ([10, -15, -4, 14, -6, 1], 12)


def _apply(stencil, f):
    num, den = stencil
    acc = 0.0
    for w, x in zip(num, f):
        acc = acc + w * x
    return acc / den


def _log_derivatives(f, h, order):
    n = f.size
    k = order // 2
    d1 = np.empty(n)
    d2 = np.empty(n)
    c = f[k:n - k]
    p1, m1 = f[k + 1:n - k + 1], f[k - 1:n - k - 1]
    if order == 2:
        d1[k:n - k] = (p1 - m1) / 2
        d2[k:n - k] = (p1 + m1) - 2 * c
    else:
        # symmetric pairing makes both stencils vanish exactly on constants
        p2, m2 = f[k + 2:], f[:n - k - 2]
        d1[k:n - k] = (8 * (p1 - m1) - (p2 - m2)) / 12
        d2[k:n - k] = ((16 * (p1 + m1) - (p2 + m2)) - 30 * c) / 12
    rev = f[::-1]
    d1[0] = _apply(_L1[order], f)
    d1[-1] = -_apply(_L1[order], rev)
    d2[0] = _apply(_L2[order], f)
    d2[-1] = _apply(_L2[order], rev)
    if order == 4:
        d1[1] = _apply(_L1_NEXT, f)
        d1[-2] = -_apply(_L1_NEXT, rev)
        d2[1] = _apply(_L2_NEXT, f)
        d2[-2] = _apply(_L2_NEXT, rev)
    return d1 / h, d2 / (h * h)


def fd_derivatives(grid: LogGrid, u, order=4):
    """``(du/dr, d2u/dr2)`` from samples via finite differences in ``s = log r``.

    Derivatives in ``s`` are converted with ``u' = u_s / r`` and
    ``u'' = (u_ss - u_s) / r^2``.
    """
    u = np.asarray(u, dtype=float)
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    if grid.n < 5 or (order == 4 and grid.n < 7):
        raise GridTooSmall(f"need at least {5 if order == 2 else 7} nodes, got {grid.n}", n=grid.n)
    if not grid.is_geometric():
        raise ValueError("fd_derivatives requires a geometric grid")
    us, uss = _log_derivatives(u, grid.log_step, order)
    r = grid.nodes
    return us / r, (uss - us) / r**2

"""Closed-form constants of the radial problem

    M+(D^2 u) + mu u / r^2 = u^p   in B_1 minus the origin.

All quantities are explicit functions of the ellipticity pair (lambda, Lambda),
the dimension N, the potential strength mu and the exponent p.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from .errors import (
    DegenerateTau,
    InvalidEllipticity,
    KUndefined,
    MuAboveEigenvalue,
    SublinearExponent,
)

DEFAULT_EQ_TOL = 1e-12
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class ProblemParams:
    lam: float
    Lam: float
    N: int
    mu: float
    p: Optional[float] = None

    def __post_init__(self):
        if not (self.lam > 0 and self.lam <= self.Lam) or not math.isfinite(self.Lam):
            raise InvalidEllipticity(
                f"need 0 < lambda <= Lambda, got lambda={self.lam}, Lambda={self.Lam}"
            )
        if int(self.N) != self.N or self.N < 2:
            raise InvalidEllipticity(f"N must be an integer >= 2, got {self.N}")
        object.__setattr__(self, "N", int(self.N))

    def with_p(self, p):
        return ProblemParams(self.lam, self.Lam, self.N, self.mu, p)

    def with_mu(self, mu):
        return ProblemParams(self.lam, self.Lam, self.N, mu, self.p)


@dataclass(frozen=True)
class ConstantSet:
    """Every derived scalar for one parameter set.

    ``p_star``/``p_star_star``/``K_bar`` are ``None`` when tau_minus == 0 or
    tau_plus == tau_minus; ``lambda1``/``lambda2``/``K_opt`` are ``None`` when
    no exponent was supplied or K is undefined for it.
    """

    params: ProblemParams
    Ntilde_plus: float
    Ntilde_minus: float
    tau: float
    lambda_bar: float
    tau_plus: float
    tau_minus: float
    p_star: Optional[float]
    p_star_star: Optional[float]
    lambda1: Optional[float]
    lambda2: Optional[float]
    K_opt: Optional[float]
    K_bar: Optional[float]
    # analogues for the inf-operator M-
    tau_minus_operator: float
    lambda_bar_minus_operator: float
    degenerate: bool
    in_regime: bool

    @property
    def lam(self):
        return self.params.lam

    @property
    def Lam(self):
        return self.params.Lam

    @property
    def N(self):
        return self.params.N

    @property
    def mu(self):
        return self.params.mu

    @property
    def p(self):
        return self.params.p

    def as_dict(self):
        d = asdict(self)
        d.pop("params")
        d.update(
            lambda_=self.lam, Lambda=self.Lam, N=self.N, mu=self.mu, p=self.p,
        )
        d["lambda"] = d.pop("lambda_")
        return d


class RegimeKind(enum.IntEnum):
    # ordered by increasing p
    SUBCRITICAL = 0
    INTERMEDIATE = 1
    LOG_CRITICAL = 2
    SUPERCRITICAL = 3


@dataclass(frozen=True)
class Regime:
    kind: RegimeKind
    eq_tol: float

    @property
    def name(self):
        return {
            RegimeKind.SUBCRITICAL: "Subcritical",
            RegimeKind.INTERMEDIATE: "Intermediate",
            RegimeKind.LOG_CRITICAL: "LogCritical",
            RegimeKind.SUPERCRITICAL: "Supercritical",
        }[self.kind]


def _tau_roots(tau, mu_over_Lam):
    """Roots of x^2 - 2 tau x + mu/Lambda, computed without cancellation."""
    disc = tau * tau - mu_over_Lam
    if disc < 0:
        if -disc <= 8 * _EPS * tau * tau:
            disc = 0.0
        else:
            return None
    root = math.sqrt(disc)
    if disc == 0.0:
        return tau, tau
    q = tau + math.copysign(root, tau) if tau != 0 else root
    other = mu_over_Lam / q
    return max(q, other), min(q, other)


def _root(prod, p):
    """``prod^(1/(p-1))``, saturating to inf for p close to 1."""
    try:
        return prod ** (1 / (p - 1))
    except OverflowError:
        return math.inf


def derive_constants(params: ProblemParams) -> ConstantSet:
    lam, Lam, N, mu, p = params.lam, params.Lam, params.N, params.mu, params.p
    Np = (lam / Lam) * (N - 1) + 1
    Nm = (Lam / lam) * (N - 1) + 1
    tau = (Np - 2) / 2
    lambda_bar = Lam * tau * tau
    roots = _tau_roots(tau, mu / Lam)
    if roots is None:
        raise MuAboveEigenvalue(
            f"mu={mu} exceeds the principal eigenvalue {lambda_bar}",
            mu=mu, lambda_bar=lambda_bar,
        )
    tau_p, tau_m = roots
    degenerate = tau_p == tau_m
    if tau_m > 0 and not degenerate:
        p_star = 1 + 2 / tau_p
        p_star_star = 1 + 2 / tau_m
        K_bar = (Lam * tau_m * (tau - tau_m)) ** (tau_m / 2)
    else:
        p_star = p_star_star = K_bar = None
    in_regime = tau > 0 and 0 < mu < lambda_bar and not degenerate
    if p is not None:
        in_regime = in_regime and p > 1

    lambda1 = lambda2 = K_opt = None
    if p is not None and p > 1:
        g = 2 / (p - 1)
        lambda1 = g - tau_p
        lambda2 = g - tau_m
        prod = Lam * lambda1 * lambda2
        if prod > 0:
            K_opt = _root(prod, p)

    tau_mo = (Nm - 2) / 2
    return ConstantSet(
        params=params,
        Ntilde_plus=Np,
        Ntilde_minus=Nm,
        tau=tau,
        lambda_bar=lambda_bar,
        tau_plus=tau_p,
        tau_minus=tau_m,
        p_star=p_star,
        p_star_star=p_star_star,
        lambda1=lambda1,
        lambda2=lambda2,
        K_opt=K_opt,
        K_bar=K_bar,
        tau_minus_operator=tau_mo,
        lambda_bar_minus_operator=lam * tau_mo * tau_mo,
        degenerate=degenerate,
        in_regime=in_regime,
    )


def constants_for(lam, Lam, N, mu, p=None) -> ConstantSet:
    """Shorthand for ``derive_constants(ProblemParams(...))``."""
    return derive_constants(ProblemParams(lam, Lam, N, mu, p))


def _require_nondegenerate(c: ConstantSet):
    if c.tau_minus <= 0 or c.tau_plus == c.tau_minus:
        raise DegenerateTau(
            "need 0 < tau_minus < tau_plus", tau_plus=c.tau_plus, tau_minus=c.tau_minus
        )


def critical_exponents(c: ConstantSet):
    """Return ``(p*, p**) = (1 + 2/tau_plus, 1 + 2/tau_minus)``."""
    _require_nondegenerate(c)
    return c.p_star, c.p_star_star


def classify_regime(p, c: ConstantSet, eq_tol=DEFAULT_EQ_TOL) -> Regime:
    if not p > 1:
        raise SublinearExponent(f"p must exceed 1, got {p}", p=p)
    p_s, p_ss = critical_exponents(c)
    if abs(p - p_ss) <= eq_tol * p_ss:
        kind = RegimeKind.LOG_CRITICAL
    elif p < p_s:
        kind = RegimeKind.SUBCRITICAL
    elif p < p_ss:
        kind = RegimeKind.INTERMEDIATE
    else:
        kind = RegimeKind.SUPERCRITICAL
    return Regime(kind, eq_tol)


def exponent_gap_product(p, c: ConstantSet):
    """``(2/(p-1) - tau_plus) * (2/(p-1) - tau_minus)``."""
    g = 2 / (p - 1)
    return (g - c.tau_plus) * (g - c.tau_minus)


def explicit_K(p, c: ConstantSet):
    """Amplitude of the explicit solution ``K r^(-2/(p-1))``."""
    if not p > 1:
        raise SublinearExponent(f"p must exceed 1, got {p}", p=p)
    prod = c.Lam * exponent_gap_product(p, c)
    if not prod > 0:
        raise KUndefined(f"K is undefined at p={p}: Lambda*lambda1*lambda2={prod}", p=p)
    return _root(prod, p)


def log_critical_Kbar(c: ConstantSet):
    _require_nondegenerate(c)
    return c.K_bar


@dataclass(frozen=True)
class Eigenfunction:
    """``Phi(r) = -log r / r^e`` with ``e = (Ntilde - 2)/2``."""

    exponent: float

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return -np.log(r) * r ** (-self.exponent)

    def derivatives(self, r):
        r = np.asarray(r, dtype=float)
        e = self.exponent
        L = -np.log(r)
        val = L * r ** (-e)
        d1 = -(1 + e * L) * r ** (-e - 1)
        d2 = (e * (e + 1) * L + 2 * e + 1) * r ** (-e - 2)
        return val, d1, d2


def principal_eigenpair(params: ProblemParams, sign="plus"):
    """Return ``(lambda_bar, Phi)`` for M+ (``sign='plus'``) or M-."""
    lam, Lam, N = params.lam, params.Lam, params.N
    if sign == "plus":
        e = ((lam / Lam) * (N - 1) + 1 - 2) / 2
        return Lam * e * e, Eigenfunction(e)
    if sign == "minus":
        e = ((Lam / lam) * (N - 1) + 1 - 2) / 2
        return lam * e * e, Eigenfunction(e)
    raise ValueError(f"sign must be 'plus' or 'minus', got {sign!r}")

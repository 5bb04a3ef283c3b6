"""Asymptotic classification of positive radial solutions near the origin.

A positive solution behaves like one of

    PowerK       K r^(-2/(p-1))
    TauPlus      c1 r^(-tau_plus)
    TauMinus     c2 r^(-tau_minus)
    LogCritical  K_bar r^(-tau_minus) (-log r)^(-tau_minus/2)     (p = p**)

and the class is read off from the log-log slope over the innermost decades.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import ConstantSet, RegimeKind, classify_regime, constants_for, explicit_K
from .errors import AmbiguousClass, BoundViolation, KUndefined, NonPositiveSample, TailTooShort
from .radial_pucci import RadialFunction

POWER_K = "PowerK"
TAU_PLUS = "TauPlus"
TAU_MINUS = "TauMinus"
LOG_CRITICAL = "LogCritical"

# classes allowed by the regime
ADMISSIBLE = {
    RegimeKind.SUBCRITICAL: {POWER_K, TAU_PLUS, TAU_MINUS},
    RegimeKind.INTERMEDIATE: {TAU_MINUS},
    RegimeKind.LOG_CRITICAL: {LOG_CRITICAL},
    RegimeKind.SUPERCRITICAL: {POWER_K},
}
CONSTANT_DECADES = 0.1


@dataclass(frozen=True)
class AsymptoticClass:
    variant: str
    constant: float
    exponent: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {"variant": self.variant, "constant": self.constant,
                "exponent": self.exponent, "diagnostics": dict(self.diagnostics)}


def _linfit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid**2)))


def _resolve(constants, p):
    p = constants.p if p is None else p
    if p is None:
        raise ValueError("an exponent p is required")
    if constants.p != p:
        constants = constants_for(constants.lam, constants.Lam, constants.N, constants.mu, p)
    return constants, p


def candidate_exponents(c: ConstantSet, p, eq_tol=1e-12):
    """Candidate decay exponents and the slope tolerance separating them."""
    regime = classify_regime(p, c, eq_tol)
    g = 2.0 / (p - 1)
    if regime.kind is RegimeKind.LOG_CRITICAL:
        cands = {TAU_PLUS: c.tau_plus, LOG_CRITICAL: c.tau_minus}
        gaps = [c.tau_plus - c.tau_minus]
    else:
        cands = {POWER_K: g, TAU_PLUS: c.tau_plus, TAU_MINUS: c.tau_minus}
        gaps = [abs(c.tau_plus - c.tau_minus), abs(g - c.tau_plus), abs(g - c.tau_minus)]
    slope_tol = float(np.clip(0.25 * min(gaps), 1e-4, 0.1))
    return regime, cands, slope_tol


def _tail_window(u: RadialFunction, tail_decades, skip_decades):
    r = u.r
    lo = r[0] * 10**skip_decades
    hi = lo * 10**tail_decades
    if hi > r[-1] * (1 + 1e-12):
        raise TailTooShort(
            f"samples span {math.log10(r[-1] / r[0]):.3g} decades; need "
            f"{skip_decades + tail_decades:.3g} (skip {skip_decades}, tail {tail_decades})",
            span_decades=math.log10(r[-1] / r[0]),
        )
    return (r >= lo * (1 - 1e-12)) & (r <= hi * (1 + 1e-12)), lo, hi


def _inner_mean(r, q, lo):
    m = r <= lo * 10**CONSTANT_DECADES
    return float(np.mean(q[m]))


def classify(u: RadialFunction, constants: ConstantSet, p=None, tail_decades=3.0,
             skip_decades=0.0, eq_tol=1e-12, slope_tol=None, check_regime=True) -> AsymptoticClass:
    """Match the tail slope of ``log u`` against the candidate exponents.

    The fit uses ``tail_decades`` of radius starting ``skip_decades`` above
    the smallest sample. The fitted constant is the mean of ``r^e u`` (or its
    log-corrected form) over the innermost tenth of a decade of the window.
    """
    c, p = _resolve(constants, p)
    if np.any(u.u <= 0):
        bad = int(np.argmin(u.u))
        raise NonPositiveSample(f"u[{bad}] = {u.u[bad]} is not positive", node=bad)
    regime, cands, auto_tol = candidate_exponents(c, p, eq_tol)
    tol = auto_tol if slope_tol is None else slope_tol
    mask, lo, hi = _tail_window(u, tail_decades, skip_decades)
    r, uu = u.r[mask], u.u[mask]
    lr, lu = np.log(r), np.log(uu)
    slope, _, rms = _linfit(lr, lu)
    dist = {name: abs(-slope - e) for name, e in cands.items()}
    diag = {
        "slope": slope, "slope_tol": tol, "fit_rms": rms, "window": [float(lo), float(hi)],
        "distances": dist, "regime": regime.name, "n_points": int(mask.sum()),
    }
    within = sorted((d, name) for name, d in dist.items() if d <= tol)
    if not within:
        raise AmbiguousClass(
            f"slope {slope:.6g} is not within {tol:.3g} of any candidate exponent",
            **diag)
    close = [name for d, name in within if d <= tol / 2]
    if len(close) > 1:
        raise AmbiguousClass(f"slope {slope:.6g} matches {', '.join(close)}", **diag)
    variant = within[0][1]
    e = cands[variant]

    if variant == LOG_CRITICAL:
        # fit log(r^tau- u) against log(-log r): slope -tau-/2 for the log class
        if np.any(r >= 1):
            raise TailTooShort("the log-corrected fit needs r < 1")
        ll = np.log(-lr)
        beta, _, rms_log = _linfit(ll, lu + c.tau_minus * lr)
        diag["log_slope"] = beta
        diag["log_fit_rms"] = rms_log
        if abs(beta + c.tau_minus / 2) > abs(beta):
            variant = TAU_MINUS
            q = uu * r**e
        else:
            q = uu * r**e * (-lr) ** (c.tau_minus / 2)
    else:
        q = uu * r**e
    constant = _inner_mean(r, q, lo)
    # relative drift of the scaled quantity across the window
    diag["secondary_correction"] = float((q[-1] - q[0]) / q[0])

    if check_regime and variant not in ADMISSIBLE[regime.kind]:
        raise AmbiguousClass(
            f"tail looks like {variant}, which the {regime.name} regime excludes", **diag)
    if variant == POWER_K:
        try:
            diag["K_expected"] = explicit_K(p, c)
        except KUndefined:
            pass
    if not constant > 0:
        raise AmbiguousClass(f"fitted constant {constant} is not positive", **diag)
    return AsymptoticClass(variant, constant, float(e), diag)


@dataclass(frozen=True)
class BoundCheck:
    name: str
    applies: bool
    passed: bool
    value: float
    node: int = -1
    detail: str = ""


@dataclass(frozen=True)
class BoundsReport:
    checks: tuple

    @property
    def passed(self):
        return all(ch.passed for ch in self.checks if ch.applies)

    def __getitem__(self, name):
        for ch in self.checks:
            if ch.name == name:
                return ch
        raise KeyError(name)

    def to_dict(self):
        return {"passed": self.passed, "checks": [dict(ch.__dict__) for ch in self.checks]}


def _not_growing(r, q, tail_mask, tol):
    """``q`` does not grow like a power of ``1/r`` over the tail."""
    slope, _, _ = _linfit(np.log(r[tail_mask]), np.log(q[tail_mask]))
    return slope >= -tol, slope


def check_asymptotic_bounds(u: RadialFunction, constants: ConstantSet, p=None,
                            tail_decades=3.0, mono_tol=1e-10, eq_tol=1e-12,
                            strict=True) -> BoundsReport:
    """Check the a-priori bounds of positive solutions on the sample range.

    (i) ``u r^(2/(p-1))`` bounded, (ii) ``u`` large near the origin (reported
    only), (iii) ``r^tau_minus u`` non-decreasing for ``p* <= p <= p**``,
    (iv) at ``p = p**`` the log-half bound ``u <= C [(-log r)^(1/2) r]^(-tau_minus)``.
    """
    c, p = _resolve(constants, p)
    r, uu = u.r, u.u
    if np.any(uu <= 0):
        bad = int(np.argmin(uu))
        raise NonPositiveSample(f"u[{bad}] = {uu[bad]} is not positive", node=bad)
    regime, _, tol = candidate_exponents(c, p, eq_tol)
    tail = r <= r[0] * 10 ** min(tail_decades, math.log10(r[-1] / r[0]))
    g = 2.0 / (p - 1)
    checks = []

    q = uu * r**g
    ok, slope = _not_growing(r, q, tail, tol)
    checks.append(BoundCheck("bounded_scaled", True, ok, float(q.max()), int(np.argmax(q)),
                             f"tail log-slope of u r^(2/(p-1)) is {slope:.3e}"))

    head = float(uu[-1])
    checks.append(BoundCheck("unbounded", True, True, float(uu.max() / head), int(np.argmax(uu)),
                             "max u / u(r_max), reported only"))

    between = regime.kind in (RegimeKind.INTERMEDIATE, RegimeKind.LOG_CRITICAL)
    v = r**c.tau_minus * uu
    step = np.diff(v) / np.abs(v[:-1])
    worst = int(np.argmin(step))
    checks.append(BoundCheck("monotone_v", between,
                             bool(step[worst] >= -mono_tol) or not between,
                             float(step[worst]), worst,
                             "min relative step of r^tau_minus u between neighbours"))

    log_case = regime.kind is RegimeKind.LOG_CRITICAL
    if log_case and np.any(r < math.exp(-0.5)):
        m = r < math.exp(-0.5)
        w = uu[m] * ((-np.log(r[m])) ** 0.5 * r[m]) ** c.tau_minus
        ok, slope = _not_growing(r[m], w, tail[m], tol)
        C_min = (0.5 * c.Lam * c.tau_minus * (c.tau_minus + c.Ntilde_plus + 1)) ** (1 / (p - 1))
        checks.append(BoundCheck("log_half", True, ok, float(w.max()), int(np.argmax(w)),
                                 f"fitted C; tail log-slope {slope:.3e}; admissible C > {C_min:.6g}"))
    else:
        checks.append(BoundCheck("log_half", False, True, math.nan))

    report = BoundsReport(tuple(checks))
    if strict:
        for ch in report.checks:
            if ch.applies and not ch.passed:
                r_node = float(r[ch.node]) if ch.node >= 0 else math.nan
                raise BoundViolation(
                    f"bound '{ch.name}' fails at node {ch.node} (r={r_node:.6g}): "
                    f"{ch.detail} (value {ch.value:.6g})",
                    check=ch.name, node=ch.node, r=r_node, value=ch.value,
                )
    return report

"""Explicit sub- and super-solutions with constraint certificates.

Each kind is a closed form with analytic first and second derivatives. The
constraints that make it a barrier are checked when it is built
(:func:`make_barrier`); :func:`certify_sign` then checks the residual sign
numerically with the full sign-split Pucci operator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Tuple

import numpy as np

from .constants import ConstantSet, RegimeKind, classify_regime, constants_for, explicit_K
from .errors import CertificationFailure, ConstraintViolation, OutOfValidity, RegimeMismatch
from .radial_pucci import (
    LogGrid,
    RadialFunction,
    residual_main,
    residual_scale,
    residual_v_equation,
    v_equation_scale,
)

SUB = "Sub"
SUPER = "Super"
ABS_FLOOR = 1e-12
# slack for closed constraints met with equality by the defaults
CONSTRAINT_ATOL = 1e-12

_SUBCRIT = {RegimeKind.SUBCRITICAL}
_OUTSIDE = {RegimeKind.SUBCRITICAL, RegimeKind.SUPERCRITICAL}
_BELOW_PSS = {RegimeKind.SUBCRITICAL, RegimeKind.INTERMEDIATE}
_BETWEEN = {RegimeKind.INTERMEDIATE, RegimeKind.LOG_CRITICAL}
_LOG = {RegimeKind.LOG_CRITICAL}
_ANY = set(RegimeKind)


@dataclass(frozen=True)
class Barrier:
    kind: str
    params: Dict[str, float]
    direction: str
    validity_radius: float
    constraint_certificate: Tuple[Tuple[str, float], ...]
    constants: ConstantSet = field(repr=False)
    p: float
    equation: str = "main"

    def __call__(self, r):
        return eval_barrier(self, r)[0]

    def radial(self, grid: LogGrid) -> RadialFunction:
        return RadialFunction.from_callable(grid, lambda r: eval_barrier(self, r))

    def to_dict(self):
        return {
            "kind": self.kind,
            "params": dict(self.params),
            "direction": self.direction,
            "equation": self.equation,
            "p": self.p,
            "validity_radius": self.validity_radius,
            "constraint_certificate": [list(x) for x in self.constraint_certificate],
        }


# ---------------------------------------------------------------- closed forms

def _power(r, coef, gamma):
    """``coef r^-gamma`` and its two derivatives."""
    v = coef * r ** (-gamma)
    return v, -gamma * v / r, gamma * (gamma + 1) * v / r**2


def _power_log(r, coef, beta, kappa, shift_r=0.0, shift_c=0.0):
    """``coef r^-beta s^-kappa`` with ``s = -log(r + shift_r) + shift_c``."""
    rr = r + shift_r
    s = -np.log(rr) + shift_c
    s1 = -1.0 / rr
    s2 = 1.0 / rr**2
    A = r ** (-beta)
    A1 = -beta * A / r
    A2 = beta * (beta + 1) * A / r**2
    B = s ** (-kappa)
    B1 = -kappa * B / s * s1
    B2 = kappa * (kappa + 1) * B / s**2 * s1**2 - kappa * B / s * s2
    return coef * A * B, coef * (A1 * B + A * B1), coef * (A2 * B + 2 * A1 * B1 + A * B2)


def _sum(*terms):
    return tuple(sum(t[i] for t in terms) for i in range(3))


def _neg(t):
    return tuple(-x for x in t)


def _g(p):
    return 2.0 / (p - 1)


# ------------------------------------------------------------------- the kinds

@dataclass(frozen=True)
class _Kind:
    name: str
    regimes: set
    build: Callable
    evaluate: Callable
    equation: str = "main"


_KINDS: Dict[str, _Kind] = {}


def _register(name, regimes, equation="main"):
    def deco(build):
        def wrap(evaluate):
            _KINDS[name] = _Kind(name, regimes, build, evaluate, equation)
            return evaluate
        return wrap
    return deco


def _check(constraints, kind):
    """Raise on the first violated constraint; return the certificate tuple."""
    out = []
    for name, margin, *strict in constraints:
        ok = margin > 0 if strict else margin >= -CONSTRAINT_ATOL
        if not ok:
            raise ConstraintViolation(
                f"{kind}: constraint '{name}' violated (margin {margin:.6g})",
                kind=kind, constraint=name, margin=float(margin),
            )
        out.append((name, float(margin)))
    return tuple(out)


def largest_radius(pred, hi=1.0, lo=1e-300, iters=200):
    """Largest ``r0 <= hi`` with ``pred(r0)`` true, by bisection in ``log r``.

    ``pred`` must hold on an interval ``(0, r*]``.
    """
    if pred(hi):
        return hi
    if not pred(lo):
        return 0.0
    a, b = math.log(lo), math.log(hi)
    for _ in range(iters):
        m = 0.5 * (a + b)
        if pred(math.exp(m)):
            a = m
        else:
            b = m
        if b - a < 1e-15 * max(1.0, abs(a)):
            break
    return math.exp(a)


# PowerSuper: c r^-gamma, gamma in [tau-, tau+]
def _b_power_super(c, p, c_=1.0, gamma=None):
    gamma = c.tau if gamma is None else gamma
    cert = _check(
        [("c > 0", c_), ("gamma >= tau_minus", gamma - c.tau_minus),
         ("gamma <= tau_plus", c.tau_plus - gamma)],
        "PowerSuper",
    )
    return {"c": c_, "gamma": gamma}, SUPER, 1.0, cert


@_register("PowerSuper", _ANY)(_b_power_super)
def _e_power_super(b, r):
    return _power(r, b.params["c"], b.params["gamma"])


# PowerK: c r^(-2/(p-1)), sub iff c <= K, super iff c >= K
def _b_power_k(c, p, c_=None, direction=SUB):
    K = explicit_K(p, c)
    c_ = K if c_ is None else c_
    if direction not in (SUB, SUPER):
        raise ValueError(f"direction must be Sub or Super, got {direction!r}")
    cert = _check(_strict([("c > 0", c_)]), "PowerK")
    # the residual is r^(-2p/(p-1)) c (K^(p-1) - c^(p-1)) at every r, so the
    # declared direction is certified (or refuted) in closed form
    sign_margin = c_ * (K ** (p - 1) - c_ ** (p - 1))
    if direction == SUPER:
        sign_margin = -sign_margin
    scaled = sign_margin / c_**p
    if scaled < -ABS_FLOOR:
        raise CertificationFailure(
            f"PowerK with c={c_:.6g}, K={K:.6g} is not a {direction}-solution "
            f"(scaled margin {scaled:.3e} at every r)",
            kind="PowerK", direction=direction, worst_margin=float(scaled),
        )
    name = "c <= K" if direction == SUB else "c >= K"
    cert += ((name, float(K - c_ if direction == SUB else c_ - K)),)
    return {"c": c_, "K": K}, direction, 1.0, cert


@_register("PowerK", _OUTSIDE)(_b_power_k)
def _e_power_k(b, r):
    return _power(r, b.params["c"], _g(b.p))


def _tau_plus_delta_bound(c, p):
    return min(c.tau_plus, 2 - (p - 1) * c.tau_plus, 2 * (c.tau_plus - c.tau))


def _delta_constraints(c, p, delta, which="plus"):
    if which == "plus":
        return [
            ("delta > 0", delta),
            ("delta < tau_plus", c.tau_plus - delta),
            ("delta < 2-(p-1)tau_plus", 2 - (p - 1) * c.tau_plus - delta),
            ("delta < 2(tau_plus-tau)", 2 * (c.tau_plus - c.tau) - delta),
        ]
    return [
        ("delta > 0", delta),
        ("delta < tau_minus", c.tau_minus - delta),
        ("delta < 2-(p-1)tau_minus", 2 - (p - 1) * c.tau_minus - delta),
    ]


def _strict(cons):
    """Mark constraints as open: a zero margin violates them."""
    return [(n, m, True) for n, m in cons]


# TauPlusSub: eps (r^-tau+ - r^(-tau+ + delta))
def _b_tau_plus_sub(c, p, delta=None, eps=None):
    delta = 0.5 * _tau_plus_delta_bound(c, p) if delta is None else delta
    bound = c.Lam * delta * (2 * (c.tau_plus - c.tau) - delta)
    if eps is None and bound > 0:
        eps = bound ** (1 / (p - 1))
    if eps is None:
        eps = -1.0
    cons = _strict(_delta_constraints(c, p, delta) + [("eps > 0", eps)]) + [
        ("eps^(p-1) <= Lambda delta (2(tau_plus-tau)-delta)", bound - max(eps, 0) ** (p - 1)),
    ]
    return {"delta": delta, "eps": eps}, SUB, 1.0, _check(cons, "TauPlusSub")


@_register("TauPlusSub", _SUBCRIT)(_b_tau_plus_sub)
def _e_tau_plus_sub(b, r):
    tp, d, e = b.constants.tau_plus, b.params["delta"], b.params["eps"]
    return _sum(_power(r, e, tp), _neg(_power(r, e, tp - d)))


# TauPlusSubGeneral: a r^-tau+ - a^p / (Lambda delta (2(tau+-tau)-delta)) r^(-tau+ + delta)
def _b_tau_plus_general(c, p, delta=None, a=1.0, r0=None):
    delta = 0.5 * _tau_plus_delta_bound(c, p) if delta is None else delta
    bound = c.Lam * delta * (2 * (c.tau_plus - c.tau) - delta)
    if r0 is None:
        r0 = min(1.0, (bound / a ** (p - 1)) ** (1 / delta)) if bound > 0 and a > 0 else 1.0
    cons = _strict(_delta_constraints(c, p, delta) + [("a > 0", a)]) + [
        ("r0 <= 1", 1 - r0),
        ("r0^delta <= Lambda delta (2(tau_plus-tau)-delta) / a^(p-1)",
         bound / a ** (p - 1) - r0**delta if a > 0 else -1.0),
    ]
    coef2 = a**p / bound if bound > 0 else math.nan
    return {"delta": delta, "a": a, "coef2": coef2, "r0": r0}, SUB, r0, _check(
        cons, "TauPlusSubGeneral")


@_register("TauPlusSubGeneral", _SUBCRIT)(_b_tau_plus_general)
def _e_tau_plus_general(b, r):
    tp, d = b.constants.tau_plus, b.params["delta"]
    lead = _power(r, b.params["a"], tp)
    v, d1, d2 = _sum(lead, _neg(_power(r, b.params["coef2"], tp - d)))
    # the closed form vanishes at r0; drop round-off of either sign there
    v = np.where(np.abs(v) <= 1e-12 * lead[0], 0.0, v)
    return v, d1, d2


# TauMinusSub: eps (r^-tau- + r^(-tau- + delta))
def _b_tau_minus_sub(c, p, delta=None, eps=None, r0=1.0):
    dmax = min(c.tau_minus, 2 - (p - 1) * c.tau_minus)
    delta = 0.5 * dmax if delta is None else delta
    e = 2 - (p - 1) * c.tau_minus - delta
    bound = c.Lam * delta * (2 * (c.tau - c.tau_minus) + delta) / 2**p
    if eps is None:
        eps = (bound / r0**e) ** (1 / (p - 1)) if bound > 0 else -1.0
    cons = _strict(_delta_constraints(c, p, delta, "minus") + [("eps > 0", eps)]) + [
        ("r0 <= 1", 1 - r0),
        ("r0^(2-(p-1)tau_minus-delta) 2^p eps^(p-1) <= Lambda delta (2(tau-tau_minus)+delta)",
         bound - r0**e * max(eps, 0) ** (p - 1)),
    ]
    return {"delta": delta, "eps": eps, "r0": r0}, SUB, r0, _check(cons, "TauMinusSub")


@_register("TauMinusSub", _BELOW_PSS)(_b_tau_minus_sub)
def _e_tau_minus_sub(b, r):
    tm, d, e = b.constants.tau_minus, b.params["delta"], b.params["eps"]
    return _sum(_power(r, e, tm), _power(r, e, tm - d))


# LogSub (p = p**): a r^-tau- (-log r + c)^(-tau-/2)
def _b_log_sub(c, p, a=None, c_=2.0):
    Kb = c.K_bar
    a = Kb if a is None else a
    cons = _strict([("a > 0", a), ("c > 1", c_ - 1)]) + [
        ("a^{p-1} <= K_bar^{p-1}", Kb ** (p - 1) - a ** (p - 1) if a > 0 else -1.0),
    ]
    return {"a": a, "c": c_}, SUB, 1.0, _check(cons, "LogSub")


@_register("LogSub", _LOG)(_b_log_sub)
def _e_log_sub(b, r):
    tm = b.constants.tau_minus
    return _power_log(r, b.params["a"], tm, tm / 2, shift_c=b.params["c"])


# LogSuper (p = p**): b [r^-tau- s^(-tau-/2) - r^-tau- s^(-tau-/2 - delta)], s = -log r + c
_LOG_SUPER_CHECK = 4096


def _b_log_super(c, p, b=None, delta=1.0, c_=None, pairing=True):
    Kb = c.K_bar
    b = 2 * Kb if b is None else b
    if c_ is None:
        c_ = max(2.0, (b / (b - Kb)) ** (1 / delta)) if b > Kb else 2.0
    cons = _strict([("b > 0", b), ("delta > 0", delta), ("c > 1", c_ - 1),
                    ("b > K_bar", b - Kb)])
    if pairing:
        cons.append(("c^delta >= b/(b-K_bar)",
                     c_**delta - b / (b - Kb) if b > Kb else -1.0))
    _check(cons, "LogSuper")
    tm, k = c.tau_minus, 0.5 * c.tau_minus

    def fn(r):
        return _sum(_power_log(r, b, tm, k, shift_c=c_),
                    _neg(_power_log(r, b, tm, k + delta, shift_c=c_)))

    # Where u is convex and decreasing the scaled residual is at most
    #   Lambda k (k+1)/s + K_bar^{p-1} - b^{p-1} (1 - s^-delta)^p,  k = tau-/2,
    # which decreases in s; this covers a tail (0, r_tail].
    def tail_ok(r):
        s = c_ - math.log(r)
        _, du, ddu = fn(np.array([r]))
        return (c.Lam * k * (k + 1) / s + Kb ** (p - 1) <= b ** (p - 1) * (1 - s**-delta) ** p
                and du[0] <= 0 and ddu[0] >= 0)

    r_tail = largest_radius(tail_ok, lo=1e-100)
    r0 = r_tail
    if 0 < r_tail < 1:
        # exact residual on the remaining band [r_tail, 1]
        s = np.linspace(c_, c_ - math.log(r_tail), _LOG_SUPER_CHECK)
        r = np.exp(c_ - s)
        u = RadialFunction(LogGrid.from_nodes(r[::-1]), *(x[::-1] for x in fn(r)))
        if np.all(residual_main(u, c, p) <= 0):
            r0 = 1.0
    cons.append(("sign condition holds on (0, r0]", r0, True))
    return ({"b": b, "delta": delta, "c": c_, "r0": r0}, SUPER, r0,
            _check(cons, "LogSuper"))


@_register("LogSuper", _LOG)(_b_log_super)
def _e_log_super(b, r):
    tm = b.constants.tau_minus
    bb, d, cc = b.params["b"], b.params["delta"], b.params["c"]
    return _sum(_power_log(r, bb, tm, tm / 2, shift_c=cc),
                _neg(_power_log(r, bb, tm, tm / 2 + d, shift_c=cc)))


_A_REF_RADIUS = 0.5


def _kshift_common(c, p, gamma):
    g = _g(p)
    if gamma is None:
        gamma = 0.5 * (g + c.tau_plus) if g > c.tau_plus else 0.5 * g
    prod = (gamma - c.tau_minus) * (gamma - c.tau_plus)
    cons = _strict([("gamma > 0", gamma), ("gamma < 2/(p-1)", g - gamma),
                    ("gamma outside [tau_minus, tau_plus]", prod)])
    return g, gamma, prod, cons


# KShiftSub: K1 r^(-2/(p-1)) - a r^-gamma
def _b_kshift_sub(c, p, K1=None, gamma=None, a=None, r0=None):
    K = explicit_K(p, c)
    K1 = 0.9 * K if K1 is None else K1
    g, gamma, prod, cons = _kshift_common(c, p, gamma)
    room = K1 * (K ** (p - 1) - K1 ** (p - 1))
    if a is None:
        # equality in the tighter bound at r = 1/2
        a = min(room / (c.Lam * prod), K1) * _A_REF_RADIUS ** (gamma - g) if prod > 0 else 1.0

    def ok(r):
        w = a * r ** (g - gamma)
        return c.Lam * prod * w <= room and w < K1

    if r0 is None:
        r0 = largest_radius(ok) if prod > 0 and a > 0 else 1.0
    w0 = a * r0 ** (g - gamma)
    cons += _strict([("K1 > 0", K1), ("K1 < K", K - K1), ("a > 0", a)]) + [
        ("r0 <= 1", 1 - r0),
        ("a Lambda (gamma-tau-)(gamma-tau+) r0^(2/(p-1)-gamma) <= K1 (K^{p-1}-K1^{p-1})",
         room - c.Lam * prod * w0),
    ] + _strict([("a r0^(2/(p-1)-gamma) < K1", K1 - w0)])
    params = {"K1": K1, "gamma": gamma, "a": a, "r0": r0, "K": K}
    return params, SUB, r0, _check(cons, "KShiftSub")


@_register("KShiftSub", _OUTSIDE)(_b_kshift_sub)
def _e_kshift_sub(b, r):
    P = b.params
    return _sum(_power(r, P["K1"], _g(b.p)), _neg(_power(r, P["a"], P["gamma"])))


# KShiftSuper: K2 r^(-2/(p-1)) + a r^-gamma
def _b_kshift_super(c, p, K2=None, gamma=None, a=None, r0=None):
    K = explicit_K(p, c)
    K2 = 1.1 * K if K2 is None else K2
    g, gamma, prod, cons = _kshift_common(c, p, gamma)
    room = K2 * (K2 ** (p - 1) - K ** (p - 1))
    if a is None:
        a = room / (c.Lam * prod) * _A_REF_RADIUS ** (gamma - g) if prod > 0 else 1.0

    def ok(r):
        return a * c.Lam * prod * r ** (g - gamma) <= room

    if r0 is None:
        r0 = largest_radius(ok) if prod > 0 and a > 0 else 1.0
    cons += _strict([("K2 > K", K2 - K), ("a > 0", a)]) + [
        ("r0 <= 1", 1 - r0),
        ("a Lambda (gamma-tau-)(gamma-tau+) r0^(2/(p-1)-gamma) <= K2 (K2^{p-1}-K^{p-1})",
         room - a * c.Lam * prod * r0 ** (g - gamma)),
    ]
    params = {"K2": K2, "gamma": gamma, "a": a, "r0": r0, "K": K}
    return params, SUPER, r0, _check(cons, "KShiftSuper")


@_register("KShiftSuper", _OUTSIDE)(_b_kshift_super)
def _e_kshift_super(b, r):
    P = b.params
    return _sum(_power(r, P["K2"], _g(b.p)), _power(r, P["a"], P["gamma"]))


# EpsSuper: eps r^(-2/(p-1)) + c_eps r^-tau-, matched to u(r0)
def _b_eps_super(c, p, r0=0.5, u_r0=1.0, eps=None):
    g = _g(p)
    top = u_r0 * r0**g
    eps = 0.5 * top if eps is None else eps
    c_eps = (top - eps) / r0 ** (g - c.tau_minus)
    cons = _strict([("eps > 0", eps), ("r0 > 0", r0), ("eps < u(r0) r0^(2/(p-1))", top - eps)])
    cons.append(("r0 <= 1", 1 - r0))
    return {"eps": eps, "r0": r0, "u_r0": u_r0, "c_eps": c_eps}, SUPER, r0, _check(
        cons, "EpsSuper")


@_register("EpsSuper", _BETWEEN)(_b_eps_super)
def _e_eps_super(b, r):
    P = b.params
    return _sum(_power(r, P["eps"], _g(b.p)), _power(r, P["c_eps"], b.constants.tau_minus))


# LogHalfSuper (p = p**): C / [(-log(eps + r))^(1/2) r]^tau-
def _log_half_eval(c, C, eps, r):
    tm = c.tau_minus
    return _power_log(r, C, tm, tm / 2, shift_r=eps)


def _b_log_half_super(c, p, C=None, eps=1e-3, r0=None):
    tm = c.tau_minus
    lower = 0.5 * c.Lam * tm * (tm + c.Ntilde_plus + 1)
    C = 1.5 * lower ** (1 / (p - 1)) if C is None else C

    def ok(r):
        if not -math.log(r + eps) >= 0.5:
            return False
        rr = np.geomspace(1e-12 * r, r, 400)
        _, d1, d2 = _log_half_eval(c, C, eps, rr)
        return bool(np.all(d1 <= 0) and np.all(d2 >= 0))

    if r0 is None:
        r0 = largest_radius(ok, lo=1e-100)
    cons = _strict([("eps > 0", eps), ("r0 > 0", r0),
                    ("C^{p-1} > (Lambda/2) tau-(tau- + Ntilde+ + 1)", C ** (p - 1) - lower)]) + [
        ("-log(r0+eps) >= 1/2", -math.log(r0 + eps) - 0.5 if r0 + eps < 1 else -1.0),
        ("convex decreasing on (0, r0]", 1.0 if r0 > 0 and ok(r0) else -1.0),
    ]
    return {"C": C, "eps": eps, "r0": r0}, SUPER, r0, _check(cons, "LogHalfSuper")


@_register("LogHalfSuper", _LOG)(_b_log_half_super)
def _e_log_half_super(b, r):
    P = b.params
    return _log_half_eval(b.constants, P["C"], P["eps"], r)


# VLogSub (v-equation, p = p**): K_bar (-log r + c1)^(-tau-/2)
def _b_vlog_sub(c, p, c1=1.0, r0=1.0, a=None):
    a = c.K_bar if a is None else a
    cons = _strict([("r0 > 0", r0), ("-log r0 + c1 > 0", -math.log(r0) + c1)]) + [
        ("c1 >= 0", c1),
        ("a^{p-1} <= K_bar^{p-1}", c.K_bar ** (p - 1) - a ** (p - 1)),
    ]
    return {"a": a, "c1": c1, "r0": r0}, SUB, r0, _check(cons, "VLogSub")


@_register("VLogSub", _LOG, "v")(_b_vlog_sub)
def _e_vlog_sub(b, r):
    P = b.params
    return _power_log(r, P["a"], 0.0, b.constants.tau_minus / 2, shift_c=P["c1"])


# VLogSuper (v-equation, p = p**): b (-log r - c2)^(-tau-/2)
def _b_vlog_super(c, p, b=None, c2=0.0, r0=None):
    Kb, tm = c.K_bar, c.tau_minus
    b = 2 * Kb if b is None else b
    gap = b ** (p - 1) - Kb ** (p - 1)

    def ok(r):
        s = -math.log(r) - c2
        return s > 0 and gap * 4 * s >= c.Lam * tm * (tm + 2)

    if r0 is None:
        r0 = largest_radius(ok) if gap > 0 else 1.0
    s0 = -math.log(r0) - c2
    cons = _strict([("b > K_bar", b - Kb), ("-log r0 - c2 > 0", s0)]) + [
        ("b^{p-1} - K_bar^{p-1} >= Lambda tau-(tau-+2) / (4(-log r0 - c2))",
         gap - c.Lam * tm * (tm + 2) / (4 * s0) if s0 > 0 else -1.0),
    ]
    return {"b": b, "c2": c2, "r0": r0}, SUPER, r0, _check(cons, "VLogSuper")


@_register("VLogSuper", _LOG, "v")(_b_vlog_super)
def _e_vlog_super(b, r):
    P = b.params
    return _power_log(r, P["b"], 0.0, b.constants.tau_minus / 2, shift_c=-P["c2"])


KINDS = tuple(_KINDS)


def _resolve_constants(constants: ConstantSet, p):
    p = constants.p if p is None else p
    if p is None:
        raise ValueError("an exponent p is required")
    if constants.p != p:
        constants = constants_for(constants.lam, constants.Lam, constants.N, constants.mu, p)
    return constants, p


def make_barrier(kind, constants: ConstantSet, p=None, eq_tol=1e-12, **free) -> Barrier:
    """Build and constraint-check one catalogue member.

    ``free`` holds the kind's free parameters; omitted ones take their defaults
    (delta at half its bound, eps or a at equality in its bound, radii as large
    as the explicit constraints allow). ``c`` is spelled ``c_`` for kinds that
    have one, so it does not clash with the constants argument.
    """
    if kind not in _KINDS:
        raise ValueError(f"unknown barrier kind {kind!r}; choose from {', '.join(KINDS)}")
    spec = _KINDS[kind]
    c, p = _resolve_constants(constants, p)
    regime = classify_regime(p, c, eq_tol)
    if regime.kind not in spec.regimes:
        raise RegimeMismatch(
            f"{kind} is not available in the {regime.name} regime (p={p})",
            kind=kind, regime=regime.name,
        )
    if "c" in free:
        free["c_"] = free.pop("c")
    params, direction, radius, cert = spec.build(c, p, **free)
    return Barrier(kind, params, direction, float(radius), cert, c, float(p), spec.equation)


def eval_barrier(barrier: Barrier, r):
    """``(value, d/dr, d2/dr2)`` at ``r`` (scalar or array) inside the validity range."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0) or np.any(r_arr > barrier.validity_radius * (1 + 1e-12)):
        raise OutOfValidity(
            f"r must lie in (0, {barrier.validity_radius}]", validity_radius=barrier.validity_radius
        )
    vals = _KINDS[barrier.kind].evaluate(barrier, r_arr)
    if np.ndim(r) == 0:
        return tuple(float(v) for v in vals)
    return vals


@dataclass(frozen=True)
class SignCertificate:
    kind: str
    direction: str
    holds: bool
    n_nodes: int
    n_violations: int
    worst_node: int
    worst_r: float
    worst_margin: float

    def to_dict(self):
        return dict(self.__dict__)


def certify_sign(barrier: Barrier, grid: LogGrid, direction=None, abs_floor=ABS_FLOOR,
                 strict=True) -> SignCertificate:
    """Check the residual sign at every node with analytic derivatives.

    Sub needs ``residual >= -abs_floor * scale``, Super ``residual <= abs_floor * scale``,
    with ``scale = u^p + mu u / r^2`` (or the v-equation analogue) per node.
    The margin reported is the scaled residual in the favourable direction.
    """
    direction = barrier.direction if direction is None else direction
    if grid.r_max > barrier.validity_radius * (1 + 1e-12):
        raise OutOfValidity(
            f"grid reaches {grid.r_max} beyond validity radius {barrier.validity_radius}",
            validity_radius=barrier.validity_radius,
        )
    u = barrier.radial(grid)
    c, p = barrier.constants, barrier.p
    if barrier.equation == "v":
        res = residual_v_equation(u, c, p)
        scale = v_equation_scale(u, c, p)
    else:
        res = residual_main(u, c, p, allow_zero=direction == SUB)
        scale = residual_scale(u, c, p)
    # where u vanishes (closed boundary of a sub-solution) fall back to the
    # size of the derivative terms
    fallback = c.Lam * (np.abs(u.ddu) + (c.N - 1) * np.abs(u.du) / u.r)
    scale = np.where(scale > 0, scale, np.where(fallback > 0, fallback, 1.0))
    margin = (res if direction == SUB else -res) / scale
    bad = margin < -abs_floor
    worst = int(np.argmin(margin))
    cert = SignCertificate(
        barrier.kind, direction, not bool(bad.any()), grid.n, int(bad.sum()), worst,
        float(grid.nodes[worst]), float(margin[worst]),
    )
    if strict and not cert.holds:
        raise CertificationFailure(
            f"{barrier.kind} as {direction}: {cert.n_violations} violating nodes, worst at "
            f"r={cert.worst_r:.6g} with scaled margin {cert.worst_margin:.3e}",
            **cert.to_dict(),
        )
    return cert


def default_grid(barrier: Barrier, n=2048, r_min=1e-8):
    return LogGrid.build(min(r_min, 0.5 * barrier.validity_radius), barrier.validity_radius, n)


def vlog_bracket(constants: ConstantSet, p, r0, v0, b=None, eq_tol=1e-12):
    """VLogSub/VLogSuper pair matched to a solution with ``v(r0) = v0``.

    ``c1 = [(K_bar/v0)^(2/tau-) + log r0]^+`` puts the sub-solution below
    ``v0`` at ``r0``; ``c2 = -log r0 - (b/v0)^(2/tau-)`` makes the
    super-solution equal to ``v0`` there. ``b`` defaults to ``2 K_bar``.
    """
    c, p = _resolve_constants(constants, p)
    tm = c.tau_minus
    b = 2 * c.K_bar if b is None else b
    if not (v0 > 0 and 0 < r0 <= 1):
        raise ValueError("need v0 > 0 and 0 < r0 <= 1")
    c1 = max((c.K_bar / v0) ** (2 / tm) + math.log(r0), 0.0)
    c2 = -math.log(r0) - (b / v0) ** (2 / tm)
    lower = make_barrier("VLogSub", c, p, eq_tol, c1=c1, r0=r0)
    upper = make_barrier("VLogSuper", c, p, eq_tol, b=b, c2=c2, r0=r0)
    return lower, upper


def sample_parameters(kind, constants: ConstantSet, p, rng):
    """Random free parameters strictly inside the kind's constraint region."""
    c, p = _resolve_constants(constants, p)
    u = lambda lo, hi: float(rng.uniform(lo, hi))  # noqa: E731
    if kind == "PowerSuper":
        return {"c": u(0.1, 10), "gamma": u(c.tau_minus, c.tau_plus)}
    if kind == "PowerK":
        K = explicit_K(p, c)
        if rng.random() < 0.5:
            return {"c": K * u(0.05, 1.0), "direction": SUB}
        return {"c": K * u(1.0, 5.0), "direction": SUPER}
    if kind == "TauPlusSub":
        delta = _tau_plus_delta_bound(c, p) * u(0.05, 0.95)
        bound = c.Lam * delta * (2 * (c.tau_plus - c.tau) - delta)
        return {"delta": delta, "eps": bound ** (1 / (p - 1)) * u(0.05, 1.0)}
    if kind == "TauPlusSubGeneral":
        delta = _tau_plus_delta_bound(c, p) * u(0.05, 0.95)
        return {"delta": delta, "a": u(0.1, 5.0)}
    if kind == "TauMinusSub":
        delta = min(c.tau_minus, 2 - (p - 1) * c.tau_minus) * u(0.05, 0.95)
        r0 = u(0.05, 1.0)
        e = 2 - (p - 1) * c.tau_minus - delta
        bound = c.Lam * delta * (2 * (c.tau - c.tau_minus) + delta) / 2**p
        return {"delta": delta, "r0": r0, "eps": (bound / r0**e) ** (1 / (p - 1)) * u(0.05, 1.0)}
    if kind == "LogSub":
        return {"a": c.K_bar * u(0.05, 1.0), "c": u(1.01, 10)}
    if kind == "LogSuper":
        b = c.K_bar * u(1.05, 5.0)
        delta = u(0.1, 3.0)
        cmin = max(1.0, (b / (b - c.K_bar)) ** (1 / delta))
        return {"b": b, "delta": delta, "c": cmin * u(1.0, 3.0) + 1e-9}
    if kind in ("KShiftSub", "KShiftSuper"):
        K = explicit_K(p, c)
        g = _g(p)
        lo = c.tau_plus if g > c.tau_plus else 0.0
        gamma = lo + (g - lo) * u(0.1, 0.95)
        prod = (gamma - c.tau_minus) * (gamma - c.tau_plus)
        if kind == "KShiftSub":
            Kx = K * u(0.3, 0.99)
            cap = min(Kx * (K ** (p - 1) - Kx ** (p - 1)) / (c.Lam * prod), Kx)
            key = "K1"
        else:
            Kx = K * (1 + min(2.0, 2.0 / (p - 1)) * u(0.01, 1.0))
            cap = Kx * (Kx ** (p - 1) - K ** (p - 1)) / (c.Lam * prod)
            key = "K2"
        # below equality at a random reference radius, so r0 stays moderate
        a = cap * u(0.05, 1.0) * u(0.05, 1.0) ** (gamma - g)
        return {key: Kx, "gamma": gamma, "a": a}
    if kind == "EpsSuper":
        r0, ur0 = u(0.05, 1.0), u(0.1, 10.0)
        return {"r0": r0, "u_r0": ur0, "eps": ur0 * r0 ** _g(p) * u(0.01, 0.99)}
    if kind == "LogHalfSuper":
        tm = c.tau_minus
        lower = 0.5 * c.Lam * tm * (tm + c.Ntilde_plus + 1)
        return {"C": lower ** (1 / (p - 1)) * u(1.01, 3.0), "eps": 10 ** u(-6, -2)}
    if kind == "VLogSub":
        return {"c1": u(0.0, 5.0), "r0": u(0.05, 0.99), "a": c.K_bar * u(0.1, 1.0)}
    if kind == "VLogSuper":
        return {"b": c.K_bar * u(1.05, 5.0), "c2": u(-2.0, 2.0)}
    raise ValueError(f"unknown barrier kind {kind!r}")


def kinds_for_regime(regime_kind):
    return [name for name, spec in _KINDS.items() if regime_kind in spec.regimes]

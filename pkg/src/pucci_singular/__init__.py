"""Radial solutions of M+(D^2 u) + mu u / r^2 = u^p in the punctured unit ball."""
from ._kernels import BACKEND
from .constants import (
    ConstantSet,
    ProblemParams,
    Regime,
    RegimeKind,
    classify_regime,
    constants_for,
    critical_exponents,
    derive_constants,
    explicit_K,
    log_critical_Kbar,
    principal_eigenpair,
)

__version__ = "0.1.0"

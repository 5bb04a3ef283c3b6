"""Exception hierarchy.

Every error carries a short ``code`` used by the CLI when it reports a domain
failure as a one-line JSON object on stderr.
"""


class PucciSingularError(ValueError):
    code = "PucciSingularError"

    def __init__(self, message="", **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        out = {"error": self.code, "message": str(self)}
        for key, val in self.details.items():
            out[key] = val
        return out


def _make(name, doc):
    cls = type(name, (PucciSingularError,), {"code": name, "__doc__": doc})
    return cls


# constants
InvalidEllipticity = _make("InvalidEllipticity", "Ellipticity pair or dimension is invalid.")
MuAboveEigenvalue = _make("MuAboveEigenvalue", "mu exceeds the principal eigenvalue.")
DegenerateTau = _make("DegenerateTau", "tau_minus vanishes or tau_plus == tau_minus.")
SublinearExponent = _make("SublinearExponent", "The exponent p must exceed 1.")
KUndefined = _make("KUndefined", "K is undefined for p in [p*, p**].")

# radial_pucci
NonPositiveSample = _make("NonPositiveSample", "A sampled value that must be positive is not.")
GridTooSmall = _make("GridTooSmall", "Not enough nodes for the requested stencil.")

# barriers
ConstraintViolation = _make("ConstraintViolation", "A barrier parameter constraint fails.")
RegimeMismatch = _make("RegimeMismatch", "The barrier kind is not available in this regime.")
OutOfValidity = _make("OutOfValidity", "Evaluation outside the barrier's validity range.")
CertificationFailure = _make("CertificationFailure", "The numeric residual has the wrong sign.")

# emden_fowler
NegativeX = _make("NegativeX", "Emden-Fowler state with negative x.")
StepFailure = _make("StepFailure", "Adaptive step size underflowed.")
InsufficientTail = _make("InsufficientTail", "Too few positive tail samples to fit a rate.")

# monotone_scheme
NewtonDivergence = _make("NewtonDivergence", "Damped Newton and Picard fallback failed.")
NonMonotoneOperator = _make("NonMonotoneOperator", "The discrete operator lost monotonicity.")
MonotonicityViolation = _make("MonotonicityViolation", "Iterates are not non-decreasing.")
BracketViolation = _make("BracketViolation", "An iterate left the sub/super bracket.")

# classifier
AmbiguousClass = _make("AmbiguousClass", "No unique asymptotic class matches the samples.")
TailTooShort = _make("TailTooShort", "The sample grid does not cover the requested tail.")
BoundViolation = _make("BoundViolation", "An a-priori asymptotic bound fails.")

# comparison
HypothesisViolation = _make("HypothesisViolation", "Comparison hypotheses do not hold.")
GrowthHypothesisViolation = _make(
    "GrowthHypothesisViolation", "Growth bounds near the origin do not hold."
)

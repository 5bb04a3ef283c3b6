import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pucci_singular.constants import constants_for

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# (lambda, Lambda, N, mu) sets used across the suite; all satisfy 0 < mu < lambda_bar
REF = (1.0, 2.0, 5, 0.25)
PARAM_SETS = [
    (1.0, 2.0, 5, 0.25),
    (1.0, 1.0, 3, 0.2),
    (0.5, 2.0, 9, 0.3),
    (1.0, 3.0, 6, 0.2),
    (1.0, 1.0, 4, 0.5),
]


@pytest.fixture
def ref():
    return constants_for(*REF)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def regime_exponents(c):
    """One exponent inside each regime for the constant set ``c``."""
    ps, pss = c.p_star, c.p_star_star
    return {
        "Subcritical": 0.5 * (1 + ps),
        "Intermediate": 0.5 * (ps + pss),
        "LogCritical": pss,
        "Supercritical": pss + 2.0,
    }

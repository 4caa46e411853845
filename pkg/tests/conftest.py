import math

import numpy as np
import pytest

from bayesmet import estimation, probes
from bayesmet.priors import FlatPrior

CANONICAL = ("coherent", "noon", "tsv", "ses", "tsc_optimal", "tsc_intermediate")

# Summary-table reference values: Q, J, F_q (exact where analytic).
TABLE51 = {
    "coherent": (0.0, 0.0, 2.0),
    "noon": (0.0, -1.0, 4.0),
    "tsv": (3.0, 0.0, 8.0),
    "ses": (9.0, -0.1, 22.0),
    "tsc_optimal": (11.75, 0.0, 25.49),
    "tsc_intermediate": (10.00, 0.0, 22.00),
}


@pytest.fixture(scope="session")
def canonical():
    """All five canonical optical probes (six states incl. both cat variants)."""
    return {kind: probes.make_probe(kind) for kind in CANONICAL}


@pytest.fixture(scope="session")
def half_pi_prior():
    return FlatPrior(0.0, math.pi / 2)


@pytest.fixture(scope="session")
def optimal_estimators(canonical, half_pi_prior):
    """Prior moments, estimator and single-shot bound per canonical probe."""
    out = {}
    for kind, probe in canonical.items():
        mom = estimation.prior_moments_interferometer(probe, half_pi_prior)
        est = estimation.solve_estimator(mom)
        bound = estimation.single_shot_bound(mom, est, half_pi_prior)
        out[kind] = (mom, est, bound)
    return out

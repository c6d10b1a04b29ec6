import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from heraldtime.params import LinkParams, TemporalCovariance

# Fitted reference parameter sets (rho_t, tau1, tau2) and the link used
# throughout the reproduction checks.
REFERENCE_SETS = [
    TemporalCovariance(rho_t=0.9551, tau1=1.136e-9, tau2=1.312e-9),
    TemporalCovariance(rho_t=-0.1483, tau1=0.23607e-9, tau2=0.25285e-9),
    TemporalCovariance(rho_t=-0.4443, tau1=0.2146e-9, tau2=0.23130e-9),
]

REFERENCE_LINK = LinkParams(beta=-1.15e-26, length=1e4)
REFERENCE_SIGMA = 3.29e12


@pytest.fixture
def reference_sets():
    return REFERENCE_SETS


@pytest.fixture
def reference_link():
    return REFERENCE_LINK

"""Shared fixtures: couplings and (expensive) charge censuses.

Censuses are session-scoped because each one runs the full locator and
both charge integrators; several test modules assert against the same
results.
"""

import pytest

from monopole_atlas import Coupling, Region, charge_census

BOX = Region.cube(4.0)

ZEEMAN = Coupling.from_degrees(0.0, 0.0, 0.0)
ISING_ONLY = Coupling.from_degrees(1.0, 0.0, 0.0)
THETA0 = Coupling.from_degrees(1.0, 0.3, 0.0)
THETA30 = Coupling.from_degrees(1.0, 0.3, 30.0)
THETA60 = Coupling.from_degrees(1.0, 0.3, 60.0)
THETA90 = Coupling.from_degrees(1.0, 0.3, 90.0)


@pytest.fixture(scope="session")
def census_zeeman():
    return charge_census(ZEEMAN, BOX, seed=0)


@pytest.fixture(scope="session")
def census_ising():
    return charge_census(ISING_ONLY, BOX, seed=0)


@pytest.fixture(scope="session")
def census_theta0():
    return charge_census(THETA0, BOX, seed=0)


@pytest.fixture(scope="session")
def census_theta30():
    return charge_census(THETA30, BOX, seed=0)


@pytest.fixture(scope="session")
def census_theta60():
    return charge_census(THETA60, BOX, seed=0)


@pytest.fixture(scope="session")
def census_theta90():
    return charge_census(THETA90, BOX, seed=0)

"""Shared fixtures: toy domains and parameter sets small enough that every
test file runs in seconds.  Full-size experiment runs live in
test_acceptance.py behind session-scoped fixtures.
"""

import numpy as np
import pytest

from nsas import DomainSpec, FluidParams, Grid, PressureLaw


@pytest.fixture
def quad_params():
    return FluidParams(nu1=1.0, nu2=1.0, law=PressureLaw("quadratic"))


@pytest.fixture
def adia_params():
    return FluidParams(nu1=1.0, nu2=2.0, law=PressureLaw("adiabatic", 1.4))


@pytest.fixture
def mixed_grid():
    """T x R^2 toy domain (one periodic axis, two truncated open axes)."""
    return DomainSpec(1, (8, 24, 24), periodic_lengths=(2.0 * np.pi,),
                      open_lengths=(40.0, 40.0)).grid()


@pytest.fixture
def open_grid():
    """Reduced 2-d grid with no periodic axes."""
    return Grid((32, 32), (50.0, 50.0), ell=0)


@pytest.fixture
def line_grid():
    """Reduced 1-d grid."""
    return Grid((64,), (80.0,), ell=0)


@pytest.fixture
def torus_grid():
    """Fully periodic box."""
    return DomainSpec(3, (12, 12, 12), periodic_lengths=(2.0 * np.pi,) * 3).grid()

import numpy as np
import pytest

import phaseopt as po

TAU0_FS = 10.0
OMEGA12_INVCM = 12500.0


@pytest.fixture(scope="session")
def tau0():
    return po.to_atomic_time(TAU0_FS)


@pytest.fixture(scope="session")
def omega12(tau0):
    return po.wavenumber_to_angular_frequency(OMEGA12_INVCM)


@pytest.fixture(scope="session")
def small_grids(tau0, omega12):
    """Fast grids: 2^12 steps over 1000 fs, 256 frequency points."""
    return po.make_grids(po.to_atomic_time(1000.0), 2**12 + 1, omega12,
                         5.5 / tau0, 257)


@pytest.fixture(scope="session")
def medium_grids(tau0, omega12):
    """Grids for dt-sensitive checks: 2^14 steps, 512 frequency points."""
    return po.make_grids(po.to_atomic_time(1000.0), 2**14 + 1, omega12,
                         5.5 / tau0, 513)


@pytest.fixture(scope="session")
def two_level():
    return po.two_level_system()


@pytest.fixture(scope="session")
def rubidium():
    return po.rubidium_system()


def gaussian_pulse(e0, omega0, tau0, fgrid):
    return po.gaussian_amplitude(e0, omega0, 1.0 / tau0, fgrid)

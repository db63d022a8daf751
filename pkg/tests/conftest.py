"""Shared fixtures: a small synthetic dataset reused across suites."""

import pytest

from qlstma import dataio
from qlstma.dataio import SyntheticConfig


@pytest.fixture(scope="session")
def tiny_wells():
    """Eight wells (4 channel, 2 sand, 2 mud), enough spread to fit stats."""
    return dataio.generate_synthetic(SyntheticConfig(seed=11, wells_per_facies=(4, 2, 2)))


@pytest.fixture(scope="session")
def tiny_split(tiny_wells):
    import numpy as np

    return dataio.allocate_split(tiny_wells, (1, 1, 0), np.random.default_rng(2))

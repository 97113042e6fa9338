"""
Shared fixtures: heat models on small grids and a reduced model built from the tiniest one.
"""
import os
import sys

import pytest

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from retina.model import REFERENCE_MEAN, GridConfig, LayerStack, ParameterDomain, build_model  # noqa: E402
from retina.reduction import build_deim_gb_rom, snapshot_params  # noqa: E402

# (n_r - 1)(n_z - 2) = 10 * 19 = 190 unknowns, small enough for dense oracles
TINY_GRID = GridConfig(n_r=11, n_z=21, margin_top=0.0, margin_bottom=0.0, rpe_intervals=2)

# 20 * 39 = 780 unknowns
SMALL_GRID = GridConfig(n_r=21, n_z=41)


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run slow acceptance checks')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long-running acceptance check (enable with --runslow)')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope='session')
def layers():
    return LayerStack()


@pytest.fixture(scope='session')
def tiny_model(layers):
    return build_model(layers, TINY_GRID)


@pytest.fixture(scope='session')
def small_model(layers):
    return build_model(layers, SMALL_GRID)


@pytest.fixture(scope='session')
def desk_model(layers):
    return build_model(layers, GridConfig())


@pytest.fixture(scope='session')
def domain():
    return ParameterDomain()


@pytest.fixture(scope='session')
def tiny_rom(tiny_model, domain):
    """
    DEIM ROM of the tiny model for the rpe-only study at the reference choroid value.
    Four output interpolation points: the coarse RPE leaves C_vol with more curvature in alpha.
    """
    params = snapshot_params(domain, 'rpe-only', 20, REFERENCE_MEAN.ch)
    return build_deim_gb_rom(tiny_model, params, d=6, k=4, domain=domain)

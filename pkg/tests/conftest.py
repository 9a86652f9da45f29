"""Shared pytest configuration."""
import pytest


def pytest_addoption(parser):
    """Add the --runslow option."""
    parser.addoption('--runslow', action='store_true', default=False,
                     help='run slow desk-scale tests')


def pytest_collection_modifyitems(config, items):
    """Skip slow tests unless --runslow is given."""
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='need --runslow option to run')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)

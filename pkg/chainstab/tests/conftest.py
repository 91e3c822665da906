"""pytest fixtures for chainstab"""

import os

import numpy as np
import pytest

from ..app import (
    ChainStab,
    LiftCommand,
    RadiusTraceCommand,
    SimulateCommand,
    StabilityCommand,
    WordsCommand,
)
from ..lift import MatrixSystem
from ..subshift import SignMatrix, full_shift, validate_sign_matrix

here = os.path.abspath(os.path.dirname(__file__))
systems_dir = os.path.join(here, "systems")

_apps = [
    ChainStab,
    StabilityCommand,
    RadiusTraceCommand,
    LiftCommand,
    WordsCommand,
    SimulateCommand,
]


def pytest_configure(config):
    """
    Configure plugins and custom markers

    This function is called by pytest after command line arguments have
    been parsed. See https://docs.pytest.org/en/stable/reference/reference.html#pytest.hookspec.pytest_configure
    for more information.
    """
    # register our custom markers
    config.addinivalue_line(
        "markers", "slow: mark test to run only with the --slow option"
    )


def pytest_runtest_setup(item):
    is_slow_test = any(mark for mark in item.iter_markers(name="slow"))
    if not item.config.getoption("--slow"):
        if is_slow_test:
            pytest.skip("Skipping test marked as 'slow'")


def system_path(name):
    """Path of a system file in tests/systems"""
    return os.path.join(systems_dir, name)


@pytest.fixture
def alternating():
    """Two scalars 2 and 1/3 that must alternate"""
    return MatrixSystem([[[2.0]], [[1 / 3]]], validate_sign_matrix([[0, 1], [1, 0]]))


@pytest.fixture
def triangle_sign():
    """Three states, every transition allowed except self loops"""
    return validate_sign_matrix([[0, 1, 1], [1, 0, 1], [1, 1, 0]])


@pytest.fixture
def nilpotent_pair():
    """Two nilpotent 2x2 matrices with joint spectral radius 1 on the full shift"""
    return MatrixSystem([[[0, 1], [0, 0]], [[0, 0], [1, 0]]], full_shift(2))


def random_sign(rng, k):
    """A random K x K sign matrix with at least one 1 in every row"""
    entries = (rng.random((k, k)) < 0.6).astype(int)
    for i in range(k):
        if not entries[i].any():
            entries[i, rng.integers(k)] = 1
    return SignMatrix(entries)


def random_system(rng, k, d, sign=None):
    """K random d x d matrices with entries uniform in [-1, 1]"""
    if sign is None:
        sign = random_sign(rng, k)
    return MatrixSystem([rng.uniform(-1, 1, (d, d)) for _ in range(k)], sign)


@pytest.fixture
def rng():
    return np.random.default_rng(20241017)


@pytest.fixture
def run_app(capsys):
    """Run the chainstab application in-process

    Returns (exit code, stdout).
    """

    def run(argv):
        for cls in _apps:
            cls.clear_instance()
        try:
            ChainStab.launch_instance(argv)
        except SystemExit as e:
            code = 0 if e.code is None else e.code
        else:
            code = 0
        finally:
            for cls in _apps:
                cls.clear_instance()
        return code, capsys.readouterr().out

    return run

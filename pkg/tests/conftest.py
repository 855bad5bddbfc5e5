import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from usrd.families import (
    duplicated_bits_family,
    independent_bits_family,
    parity_family,
    single_source,
    virtual_bsc_family,
)

settings.register_profile("usrd", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("usrd")


@pytest.fixture
def bsc_model():
    """X2 = X1 xor Z; two parameters differing in p only, so sampling X1 separates them."""
    return virtual_bsc_family([0.2, 0.4], [0.1, 0.1])


@pytest.fixture
def bsc_mixed_q():
    """Two parameters with the same p and different flip probabilities (one X1-cell)."""
    return virtual_bsc_family([0.2, 0.2], [0.1, 0.3], prior=[0.4, 0.6])


@pytest.fixture
def xor_model():
    """X2 = X1 xor Bern(1/2): the symbol-dependent sampler beats every oblivious one."""
    return virtual_bsc_family([0.1, 0.3], [0.5, 0.5])


@pytest.fixture
def indep_model():
    return independent_bits_family([0.3, 0.1], [0.1, 0.3])


@pytest.fixture
def parity_model():
    return parity_family([0.1, 0.2, 0.3])


@pytest.fixture
def dup_model():
    return duplicated_bits_family([0.2, 0.3, 0.2], [0.4, 0.4, 0.45])


@pytest.fixture
def binary_hamming():
    return single_source([0.5, 0.5], 1.0 - np.eye(2))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

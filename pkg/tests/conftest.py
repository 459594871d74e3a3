import numpy as np
import pytest

from polarpipe.code_model import FIXED6, PolarCodeSpec, construct_frozen_set
from polarpipe.tree_compiler import compile_code
from polarpipe.unroller import unroll


@pytest.fixture
def toy_spec():
    return PolarCodeSpec(8, (0, 1, 2, 4))


@pytest.fixture
def toy_program(toy_spec):
    return compile_code(toy_spec)


@pytest.fixture
def toy_netlist(toy_program):
    return unroll(toy_program, FIXED6)


@pytest.fixture(scope="session")
def code_64():
    return construct_frozen_set(64, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

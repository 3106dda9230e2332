from pathlib import Path

import pytest
from hypothesis import settings

from helpers.problem import load

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

PROBLEMS = Path(__file__).parent / "problems"


@pytest.fixture(scope="session")
def problems_dir() -> Path:
    return PROBLEMS


@pytest.fixture(scope="session")
def example():
    return load(PROBLEMS / "coupled_example.json")


@pytest.fixture(scope="session")
def linear():
    return load(PROBLEMS / "linear_test.json")


@pytest.fixture(scope="session")
def quartic():
    return load(PROBLEMS / "quartic_test.json")


@pytest.fixture(scope="session")
def zero():
    return load(PROBLEMS / "zero_problem.json")

import pathlib

import numpy as np
import pytest

from src.channel import make_toy_noise_EA
from src.codes import get
from src.utils import setup_torch

GOLDEN = pathlib.Path(__file__).parent / "golden"
ROOT = pathlib.Path(__file__).parent.parent
TOY = {"delta": 0.7, "a": 0.03, "b": 0., "c": 0.01, "d": 0., "e": 0., "f": 0.04}


@pytest.fixture(autouse=True)
def seeded():
    setup_torch(0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def q3():
    return get("q3").code


@pytest.fixture
def q5():
    return get("q5").code


@pytest.fixture
def c1():
    return get("C1").code


@pytest.fixture
def toy_chi():
    return make_toy_noise_EA(**TOY)


def golden(name: str) -> str:
    return (GOLDEN / name).read_text()

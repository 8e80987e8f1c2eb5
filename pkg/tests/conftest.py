"""Общие фикстуры тестов layerlab."""

import logging

import numpy as np
import pytest

from geometry.boundary_geometry import make_curve, make_sphere
from operators.elliptic_operator import operator_from_preset
from potentials.layer_potentials import LayerContext


@pytest.fixture(autouse=True)
def quiet_logging(caplog):
    caplog.set_level(logging.WARNING)


@pytest.fixture
def circle():
    return make_curve("circle", 256)


@pytest.fixture
def ellipse():
    return make_curve({"kind": "ellipse", "a": 2.0, "b": 1.0}, 128)


@pytest.fixture
def kite():
    return make_curve("kite", 128)


@pytest.fixture
def sphere():
    return make_sphere("sphere", 3)


@pytest.fixture
def laplace2():
    return operator_from_preset("laplace", 2)


@pytest.fixture
def laplace_circle(laplace2, circle):
    return LayerContext(laplace2, circle)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

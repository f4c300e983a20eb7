"""Shared fixtures: canonical domains, functions, and weights."""

import zlib

import numpy as np
import pytest

from maxaffine import Domain, WeightFunction, catalog_entry


@pytest.fixture
def interval():
    return Domain.box([0.0], [1.0])


@pytest.fixture
def square():
    return Domain.box([0.0, 0.0], [1.0, 1.0])


@pytest.fixture
def quad_1d(interval):
    """f(x) = x^2 / 2 on [0, 1] -- the workhorse with every constant known."""
    return catalog_entry("quadratic", {"hessian": [[1.0]]}, interval)


@pytest.fixture
def quad_2d(square):
    return catalog_entry("quadratic", {"hessian": [[1.0, 0.0], [0.0, 1.0]]},
                         square)


@pytest.fixture
def w_const():
    return WeightFunction.constant(1.0)


@pytest.fixture
def w_exp():
    return WeightFunction.exp_neg_t()


def rng_for(test_tag, i):
    """Deterministic per-(test, iteration) generator for property loops."""
    return np.random.default_rng((zlib.crc32(test_tag.encode()), i))

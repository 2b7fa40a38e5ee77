import math
import os

import numpy as np
import pytest

from collision_census.topology import (
    build_explicit,
    build_hypercube,
    build_torus,
    complete_graph,
    random_regular_graph,
    star_graph,
)

ACCEPTANCE = os.environ.get("COLLISION_CENSUS_ACCEPTANCE") == "1"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def torus5():
    """5×5 torus, odd side so non-bipartite"""
    return build_torus([5, 5])


@pytest.fixture
def torus16():
    return build_torus([16, 16])


@pytest.fixture
def hypercube4():
    return build_hypercube(4)


@pytest.fixture
def triangle():
    return build_explicit([[1, 2], [0, 2], [0, 1]], name="triangle")


@pytest.fixture
def star3():
    """K_{1,3}, center 0"""
    return star_graph(3)


@pytest.fixture
def k2():
    return complete_graph(2)


@pytest.fixture
def k4():
    return complete_graph(4)


@pytest.fixture
def cubic8():
    """Connected non-bipartite 3-regular graph on 8 nodes"""
    return random_regular_graph(3, 8, seed=3)


@pytest.fixture
def lollipop():
    """Triangle with a pendant vertex: irregular, non-bipartite"""
    return build_explicit([[1, 2], [0, 2, 3], [0, 1], [1]], name="lollipop")


def within(value, target, se, k=5.0):
    return abs(value - target) <= k * se


def calibrated_band(moment, t, rounds_list, factor=3.0):
    """Freeze moment / ((r/A)·ln r) at the first r; flag each r whose moment stays within ``factor`` of it"""
    shape = [(r / t.node_count) * math.log(r) for r in rounds_list]
    values = [moment(r) for r in rounds_list]
    constant = values[0] / shape[0]
    assert constant > 0
    return [v <= factor * constant * s for v, s in zip(values, shape)]

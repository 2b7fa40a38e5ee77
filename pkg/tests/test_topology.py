"""Graph families, stepping and spectral data"""
import math
from fractions import Fraction

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings

from collision_census.errors import ConfigError, OracleGuardError, TopologyError
from collision_census.models import TopologySpec
from collision_census.topology import (
    build_explicit,
    build_hypercube,
    build_topology,
    build_torus,
    check_size_guard,
    complete_graph,
    coordinates,
    cycle_graph,
    graph_stats,
    is_bipartite,
    load_edge_list,
    neighbors,
    node_at,
    random_regular_graph,
    random_step,
    shift,
    spectral_lambda,
    stationary_samples,
)
from tests.conftest import within


def test_build_torus_degrees():
    t = build_topology(TopologySpec(family="torus2d", side=4))
    assert t.node_count == 16
    assert set(t.degrees.tolist()) == {4}


def test_build_hypercube_degrees():
    t = build_topology(TopologySpec(family="hypercube", dims=3))
    assert t.node_count == 8
    assert set(t.degrees.tolist()) == {3}


def test_build_triangle(triangle):
    assert triangle.node_count == 3
    assert triangle.edge_count == 3


@pytest.mark.parametrize(
    "spec, code",
    [
        (TopologySpec(family="torus2d", side=2), "SIDE_TOO_SMALL"),
        (TopologySpec(family="torus_kd", dims=0, side=5), "BAD_DIMENSION"),
        (TopologySpec(family="hypercube", dims=0), "BAD_DIMENSION"),
        (TopologySpec(family="explicit", adjacency=[[1], [0], [3], [2]]), "DISCONNECTED"),
        (TopologySpec(family="explicit", adjacency=[[1], [0, 2], [1, 0]]), "ASYMMETRIC"),
        (TopologySpec(family="explicit", adjacency=[[0, 1], [0]]), "SELF_LOOP"),
        (TopologySpec(family="explicit", adjacency=[[1, 1], [0, 0]]), "PARALLEL_EDGE"),
        (TopologySpec(family="explicit", adjacency=[[5], [0]]), "NODE_OUT_OF_RANGE"),
    ],
)
def test_build_rejects_invalid_input(spec, code):
    with pytest.raises(TopologyError) as exc:
        build_topology(spec)
    assert exc.value.code == code


def test_missing_side_is_a_config_error():
    with pytest.raises(ConfigError) as exc:
        build_topology(TopologySpec(family="torus2d"))
    assert exc.value.code == "MISSING_FIELD"
    assert exc.value.field == "side"


def test_neighbors_examples():
    assert neighbors(build_torus([5], family="ring"), 0) == [1, 4]
    assert neighbors(build_hypercube(2), 0) == [1, 2]

    torus = build_torus([4, 4])
    expected = sorted(node_at(torus, c) for c in [(1, 0), (3, 0), (0, 1), (0, 3)])
    assert neighbors(torus, node_at(torus, (0, 0))) == expected == [1, 3, 4, 12]


def test_neighbors_out_of_range(torus5):
    with pytest.raises(TopologyError) as exc:
        neighbors(torus5, 25)
    assert exc.value.code == "NODE_OUT_OF_RANGE"


def test_coordinate_bijection():
    t = build_torus([3, 4, 5])
    assert coordinates(t, 7) == (1, 2, 0)
    for v in range(t.node_count):
        assert node_at(t, coordinates(t, v)) == v

    cube = build_hypercube(3)
    assert coordinates(cube, 5) == "101"
    assert node_at(cube, "011") == 3


def test_shift_wraps():
    t = build_torus([4, 4])
    assert shift(t, np.array([0]), dim=1, delta=1).tolist() == [4]
    assert shift(t, np.array([12]), dim=1, delta=1).tolist() == [0]
    assert shift(t, np.array([3]), dim=0, delta=1).tolist() == [0]


def test_random_step_marginals(rng):
    t = build_torus([100, 100])
    v = node_at(t, (50, 50))
    draws = 100_000
    moved = t.step_many(np.full(draws, v), rng)
    se = math.sqrt(0.25 * 0.75 / draws)
    for u in neighbors(t, v):
        assert within(np.mean(moved == u), 0.25, se)
    assert set(np.unique(moved).tolist()) == set(neighbors(t, v))


def test_random_step_path_endpoint(rng):
    path = build_explicit([[1], [0, 2], [1]])
    assert all(random_step(path, 0, rng) == 1 for _ in range(50))


def test_random_step_deterministic(torus5):
    a = np.random.default_rng(9)
    b = np.random.default_rng(9)
    walk_a, walk_b = [0], [0]
    for _ in range(100):
        walk_a.append(random_step(torus5, walk_a[-1], a))
        walk_b.append(random_step(torus5, walk_b[-1], b))
    assert walk_a == walk_b


def test_stationary_uniform_on_regular(rng):
    t = build_torus([5, 5])
    draws = 100_000
    samples = stationary_samples(t, draws, rng)
    counts = np.bincount(samples, minlength=t.node_count)
    se = math.sqrt((1 / 25) * (24 / 25) / draws)
    assert all(within(c / draws, 1 / 25, se) for c in counts)


def test_stationary_star_center(star3, rng):
    draws = 100_000
    samples = stationary_samples(star3, draws, rng)
    se = math.sqrt(0.25 / draws)
    assert within(np.mean(samples == 0), 0.5, se)


def test_stationary_k2(k2, rng):
    draws = 20_000
    samples = stationary_samples(k2, draws, rng)
    assert within(np.mean(samples == 0), 0.5, math.sqrt(0.25 / draws))


@pytest.mark.parametrize("count", [3, 5, 17])
def test_spectral_lambda_complete(count):
    assert spectral_lambda(complete_graph(count)) == pytest.approx(1 / (count - 1), abs=1e-8)


def test_spectral_lambda_bipartite():
    assert spectral_lambda(cycle_graph(4)) == 1.0
    cube = build_hypercube(4)
    assert spectral_lambda(cube) == 1.0
    assert spectral_lambda(cube, positive_only=True) == pytest.approx(1 - 2 / 4, abs=1e-9)


def test_spectral_lambda_irregular(star3):
    with pytest.raises(TopologyError) as exc:
        spectral_lambda(star3)
    assert exc.value.code == "IRREGULAR"


def test_size_guard(torus5):
    with pytest.raises(OracleGuardError) as exc:
        check_size_guard(torus5, limit=10)
    assert exc.value.code == "SIZE_GUARD"


def test_graph_stats(star3, k2):
    torus = graph_stats(build_torus([10, 10]))
    assert (torus.node_count, torus.min_degree, torus.max_degree) == (100, 4, 4)
    assert torus.avg_degree == 4

    star = graph_stats(star3)
    assert star.avg_degree == Fraction(3, 2)
    assert star.min_degree == 1

    single = graph_stats(k2)
    assert single.edge_count == 1
    assert single.avg_degree == 1


def test_handshake_and_symmetry(star3, hypercube4):
    graphs = [build_torus([3, 4, 5]), hypercube4, star3, random_regular_graph(3, 20, seed=1)]
    for t in graphs:
        assert int(t.degrees.sum()) == 2 * t.edge_count
        stats = graph_stats(t)
        assert stats.min_degree <= stats.avg_degree <= stats.max_degree
        assert stats.avg_degree * stats.node_count == 2 * stats.edge_count
        for v in range(t.node_count):
            for u in neighbors(t, v):
                assert v in neighbors(t, u)


def test_is_bipartite():
    assert is_bipartite(build_torus([4, 4]))
    assert not is_bipartite(build_torus([5, 4]))
    assert is_bipartite(build_hypercube(3))
    assert not is_bipartite(complete_graph(3))


def test_random_regular_graph_is_valid():
    t = random_regular_graph(3, 64, seed=11)
    assert t.node_count == 64
    assert set(t.degrees.tolist()) == {3}
    assert not is_bipartite(t)


def test_load_edge_list(tmp_path):
    path = tmp_path / "triangle.txt"
    path.write_text("# a triangle\n3 3\n0 1\n1 2  # middle edge\n2 0\n")
    t = load_edge_list(path)
    assert t.node_count == 3
    assert t.edge_count == 3


def test_load_edge_list_count_mismatch(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("3 4\n0 1\n1 2\n2 0\n")
    with pytest.raises(TopologyError) as exc:
        load_edge_list(path)
    assert exc.value.code == "BAD_EDGE_FILE"


def test_load_edge_list_missing_file(tmp_path):
    with pytest.raises(TopologyError) as exc:
        load_edge_list(tmp_path / "nope.txt")
    assert exc.value.code == "BAD_EDGE_FILE"


def test_node_at_rejects_wrong_dimension():
    t = build_torus([3, 4, 5])
    with pytest.raises(TopologyError) as exc:
        node_at(t, (1, 2))
    assert exc.value.code == "BAD_DIMENSION"

    cube = build_hypercube(3)
    for bits in ("01", "0110", "012"):
        with pytest.raises(TopologyError) as exc:
            node_at(cube, bits)
        assert exc.value.code == "BAD_DIMENSION"


@pytest.mark.parametrize("degree, count", [(3, 7), (8, 8), (0, 6)])
def test_random_regular_graph_rejects_impossible_degree(degree, count):
    with pytest.raises(TopologyError) as exc:
        random_regular_graph(degree, count)
    assert exc.value.code == "BAD_DEGREE"
    assert exc.value.field == "degree"


@st.composite
def connected_adjacency(draw):
    """Random spanning tree plus random extra edges"""
    count = draw(st.integers(min_value=2, max_value=12))
    edges = {(draw(st.integers(0, v - 1)), v) for v in range(1, count)}
    pairs = st.tuples(st.integers(0, count - 1), st.integers(0, count - 1))
    for a, b in draw(st.lists(pairs, max_size=2 * count)):
        if a != b:
            edges.add((min(a, b), max(a, b)))
    adjacency = [[] for _ in range(count)]
    for a, b in edges:
        adjacency[a].append(b)
        adjacency[b].append(a)
    return adjacency


def _check_graph_invariants(t):
    assert int(t.degrees.sum()) == 2 * t.edge_count
    stats = graph_stats(t)
    assert stats.min_degree <= stats.avg_degree <= stats.max_degree
    assert stats.avg_degree * stats.node_count == 2 * stats.edge_count
    for v in range(t.node_count):
        for u in neighbors(t, v):
            assert v in neighbors(t, u)


@given(st.lists(st.integers(min_value=3, max_value=7), min_size=2, max_size=3))
@settings(max_examples=40, deadline=None)
def test_torus_invariants(sides):
    t = build_torus(sides)
    assert t.node_count == math.prod(sides)
    _check_graph_invariants(t)


@given(st.integers(min_value=2, max_value=7))
@settings(max_examples=10, deadline=None)
def test_hypercube_invariants(k):
    _check_graph_invariants(build_hypercube(k))


@given(connected_adjacency())
@settings(max_examples=100, deadline=None)
def test_explicit_graph_invariants(adjacency):
    t = build_explicit(adjacency, name="random")
    assert t.node_count == len(adjacency)
    _check_graph_invariants(t)

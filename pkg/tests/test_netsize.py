"""Crawl-only size estimation: burn-in, estimators, access discipline, pipeline"""
import math

import numpy as np
import pytest

from collision_census.errors import AccessError, EstimationError, TopologyError
from collision_census.exact_oracle import walk_lambda
from collision_census.netsize import (
    LinkQueryGraph,
    WalkEnsemble,
    burn_in_length,
    degree_weighted_big_b,
    estimate_avg_degree,
    estimate_size,
    median_boost,
    plan_avg_degree_walks,
    plan_walk_count,
    run_burn_in,
    run_pipeline,
    size_failure_bound,
    stationary_ensemble,
    weighted_pair_second_moment,
)
from collision_census.topology import build_torus, graph_stats, random_regular_graph
from tests.conftest import within


class RecordingGraph(LinkQueryGraph):
    """Counts queries made on vertices that had not been revealed yet"""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.seen = {self.seed_vertex}
        self.violations = 0

    def _on_query(self, vertices, revealed):
        if not set(vertices.tolist()) <= self.seen:
            self.violations += 1
        self.seen.update(revealed.tolist())


def test_burn_in_length_examples():
    assert burn_in_length(0.0, math.e, 1 / math.e, c_burn=1.0) == 2
    assert burn_in_length(0.5, 100, 0.1, c_burn=4.0) == 56


def test_burn_in_length_grows_as_delta_shrinks():
    lengths = [burn_in_length(0.8, 500, d, c_burn=4.0) for d in (0.5, 0.1, 0.01, 0.001)]
    assert lengths == sorted(lengths)
    assert lengths[0] < lengths[-1]


def test_burn_in_length_rejects_bad_inputs():
    with pytest.raises(EstimationError):
        burn_in_length(1.0, 100, 0.1)
    with pytest.raises(EstimationError):
        burn_in_length(0.5, 100, 1.5)


@pytest.mark.parametrize(
    "edge_count, c_burn, field",
    [(100, 0.0, "c_burn"), (100, -1.0, "c_burn"), (0.5, 4.0, "edge_count"), (0, 4.0, "edge_count")],
)
def test_burn_in_length_names_the_bad_input(edge_count, c_burn, field):
    with pytest.raises(EstimationError) as exc:
        burn_in_length(0.5, edge_count, 0.1, c_burn=c_burn)
    assert exc.value.field == field


def test_burn_in_zero_steps(torus5):
    g = LinkQueryGraph(torus5, seed_vertex=7)
    e = run_burn_in(g, 5, 0, seed=1)
    assert e.positions.tolist() == [7] * 5
    assert g.queries == {"neighborhood": 0, "degree": 0}


def test_burn_in_single_step_on_k2(k2):
    g = LinkQueryGraph(k2, allow_bipartite=True)
    e = run_burn_in(g, 4, 1, seed=2)
    assert e.positions.tolist() == [1, 1, 1, 1]
    assert e.degrees.tolist() == [1, 1, 1, 1]
    assert g.neighborhood_queries == 4


def test_ensemble_needs_two_walks(torus5):
    g = LinkQueryGraph(torus5)
    with pytest.raises(EstimationError):
        run_burn_in(g, 1, 3, seed=0)


def test_bipartite_graph_rejected_unless_lazy():
    with pytest.raises(TopologyError) as exc:
        LinkQueryGraph(build_torus([4, 4]))
    assert exc.value.code == "BIPARTITE"
    assert LinkQueryGraph(build_torus([4, 4]), lazy=True).lazy


def test_avg_degree_on_regular_graph(torus5):
    g = LinkQueryGraph(torus5)
    e = stationary_ensemble(g, torus5, 30, seed=3)
    assert estimate_avg_degree(e) == pytest.approx(0.25)
    assert g.degree_queries == 30


def test_avg_degree_on_star(star3):
    g = LinkQueryGraph(star3, allow_bipartite=True)
    n = 20_000
    d = estimate_avg_degree(stationary_ensemble(g, star3, n, seed=4))
    # E[1/deg] under the stationary law is |V|/2|E| = 2/3, with sd 1/3
    assert within(d, 2 / 3, (1 / 3) / math.sqrt(n))


def test_avg_degree_variance_shrinks_with_walk_count(star3):
    g = LinkQueryGraph(star3, allow_bipartite=True)
    repeats = 1500

    def spread(n, offset):
        values = [estimate_avg_degree(stationary_ensemble(g, star3, n, seed=offset + s)) for s in range(repeats)]
        return np.var(values, ddof=1)

    # Var(1/deg) = 1/9 under the stationary law, so Var(D) = 1/(9n)
    small, large = spread(50, 0), spread(200, repeats)
    assert 4 * 0.7 <= small / large <= 4 * 1.3


def test_burn_in_reaches_uniform(torus5):
    g = LinkQueryGraph(torus5)
    burn_in = burn_in_length(walk_lambda(torus5), torus5.edge_count, 0.1)
    e = run_burn_in(g, 100_000, burn_in, seed=12)
    empirical = np.bincount(e.positions, minlength=torus5.node_count) / len(e.positions)
    tv = 0.5 * np.abs(empirical - 1 / torus5.node_count).sum()
    assert tv <= 0.05


def test_lockstep_walks_always_collide(k2):
    g = LinkQueryGraph(k2, allow_bipartite=True)
    e = WalkEnsemble(g, np.array([0, 0]), np.full(2, -1), 0, np.random.default_rng(5))
    result = estimate_size(g, e, 7, 1.0)
    assert result.statistic == pytest.approx(1.0)
    assert result.estimate == pytest.approx(1.0)
    assert result.weighted_collisions.tolist() == [7.0, 7.0]


def test_separated_walks_give_no_estimate(k2):
    g = LinkQueryGraph(k2, allow_bipartite=True)
    g.add_seeds(np.array([1]))
    e = WalkEnsemble(g, np.array([0, 1]), np.full(2, -1), 0, np.random.default_rng(6))
    result = estimate_size(g, e, 9, 1.0)
    assert result.statistic == 0.0
    assert result.estimate is None


@pytest.mark.parametrize("graph", ["k4", "cubic8", "lollipop"])
def test_collision_statistic_unbiased(graph, request):
    t = request.getfixturevalue(graph)
    g = LinkQueryGraph(t)
    avg = graph_stats(t).avg_degree
    stats = np.array([
        estimate_size(g, stationary_ensemble(g, t, 12, seed=s), 6, avg).statistic
        for s in range(400)
    ])
    se = stats.std(ddof=1) / math.sqrt(len(stats))
    assert within(stats.mean(), 1 / t.node_count, se)


def test_median_boost():
    assert median_boost([5.0]) == 5.0
    assert median_boost([3.0, None, 1.0]) == 3.0
    assert median_boost([None, None, 2.0]) == math.inf

    with pytest.raises(EstimationError) as exc:
        median_boost([None, None, None])
    assert exc.value.code == "NO_ESTIMATE"
    with pytest.raises(EstimationError):
        median_boost([1.0, 2.0])


def test_plan_walk_count():
    stats = graph_stats(build_torus([8, 8, 8]))
    n = plan_walk_count(64, 3.7, stats, 0.2, 0.1, 512, c_plan=2.0)
    assert n == 500
    # halving ε quadruples the dominant term
    assert plan_walk_count(64, 3.7, stats, 0.1, 0.1, 512, c_plan=2.0) == 4 * n
    assert plan_avg_degree_walks(stats, 0.2, 0.1, c_plan=2.0) == 500


def test_size_failure_bound():
    assert size_failure_bound(10, 1, 1.0, 10, 1.0) == pytest.approx(0.1)
    assert size_failure_bound(2, 1, 10.0, 100, 0.1) == 1.0


def test_degree_weighted_big_b(triangle):
    assert degree_weighted_big_b(triangle, 1) == pytest.approx(0.25, abs=1e-12)
    assert degree_weighted_big_b(triangle, 4) > degree_weighted_big_b(triangle, 1)


def test_queries_only_touch_reached_vertices(torus5):
    g = RecordingGraph(torus5)
    e = run_burn_in(g, 10, 5, seed=7)
    estimate_avg_degree(e)
    estimate_size(g, e, 8, 4)
    assert g.violations == 0
    assert g.queries == {"neighborhood": 10 * (5 + 8), "degree": 10}


def test_unreached_vertex_is_refused(torus5):
    g = LinkQueryGraph(torus5)
    with pytest.raises(AccessError) as exc:
        g.query_neighborhood(7)
    assert exc.value.code == "NOT_REACHED"

    answer = g.query_neighborhood(0)
    assert sorted(answer.neighbors.tolist()) == [1, 4, 5, 20]
    assert answer.degrees.tolist() == [4, 4, 4, 4]
    assert g.query_degree(1) == 4
    assert g.queries == {"neighborhood": 1, "degree": 1}


def test_fork_starts_fresh(torus5):
    g = LinkQueryGraph(torus5)
    g.query_neighborhood(0)
    view = g.fork()
    assert view.queries == {"neighborhood": 0, "degree": 0}
    with pytest.raises(AccessError):
        view.query_degree(1)
    view.query_degree(0)
    g.merge_counts([view])
    assert g.queries == {"neighborhood": 1, "degree": 1}


def test_pipeline_on_odd_torus():
    t = build_torus([5, 5, 5])
    result = run_pipeline(t, eps=0.3, delta=0.2, rounds=16, boost_runs=3, seed=8, threads=1)
    n, m = result.walks, result.burn_in
    assert result.queries == {"neighborhood": 3 * n * (m + 16), "degree": 3 * n}
    assert len(result.per_run) == 3
    assert all(r["queries"] == {"neighborhood": n * (m + 16), "degree": n} for r in result.per_run)
    assert 125 / 2 <= result.estimate <= 125 * 2


def test_pipeline_is_deterministic():
    t = build_torus([5, 5])
    a = run_pipeline(t, eps=0.5, delta=0.2, rounds=8, boost_runs=3, seed=9, threads=1)
    b = run_pipeline(t, eps=0.5, delta=0.2, rounds=8, boost_runs=3, seed=9, threads=3)
    assert a.estimate == b.estimate
    assert [r["C"] for r in a.per_run] == [r["C"] for r in b.per_run]


def test_pipeline_rejects_bipartite_without_lazy():
    with pytest.raises(TopologyError):
        run_pipeline(build_torus([4, 4]), eps=0.3, delta=0.2, rounds=8, boost_runs=3, seed=0)


def test_pipeline_lazy_on_bipartite():
    result = run_pipeline(build_torus([4, 4]), eps=0.3, delta=0.2, rounds=16, boost_runs=3, seed=10, lazy=True)
    assert result.lazy
    assert result.lam == pytest.approx(0.75, abs=1e-9)
    assert 8 <= result.estimate <= 32


def test_weighted_second_moment_tracks_t_times_b():
    t = random_regular_graph(3, 64, seed=4)
    reports = [weighted_pair_second_moment(t, rounds, 40_000, seed=11, threads=2) for rounds in (4, 16, 64)]
    ratios = [r.ratio for r in reports]
    assert all(r.second_moment > 0 for r in reports)
    assert max(ratios) / min(ratios) <= 3.0
    # E[c̄²] >= E[c̄]/max_deg and E[c̄] = t/2|E|
    for r in reports:
        assert r.second_moment >= r.rounds / (2 * t.edge_count) / 3 - 5 * r.standard_error

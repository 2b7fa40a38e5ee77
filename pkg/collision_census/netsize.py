"""
Network size estimation from degree-weighted collisions of random walks.

The estimator only sees the graph through a LinkQueryGraph: it may ask for
the neighborhood (neighbor ids plus their degrees) or the degree of a vertex
it has already reached, and every such request is counted. One pipeline run
costs n·(M + t) neighborhood queries and n degree queries.
"""
import logging
import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from collision_census.core.config import settings
from collision_census.density_sim import occupancy_collisions
from collision_census.errors import AccessError, ConfigError, EstimationError, TopologyError
from collision_census.exact_oracle import degree_weighted_profile, walk_lambda
from collision_census.seeding import chunk_sizes, map_tasks, task_rng
from collision_census.topology import GraphStats, Topology, graph_stats, is_bipartite, stationary_samples

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.Generator]


def _as_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class Neighborhood:
    """Answer to one neighborhood query"""

    vertex: int
    neighbors: np.ndarray
    degrees: np.ndarray


class LinkQueryGraph:
    """Crawl-only view of a graph with query accounting.

    Only vertices already reached (seeds, or vertices returned in some
    neighborhood) may be queried. Counters only ever grow.
    """

    def __init__(
        self,
        topology: Topology,
        seed_vertex: int = 0,
        lazy: bool = False,
        allow_bipartite: bool = False,
    ):
        self.seed_vertex = topology.check_node(seed_vertex)
        if not (lazy or allow_bipartite) and is_bipartite(topology):
            raise TopologyError(
                "BIPARTITE",
                f"{topology.describe()} is bipartite; walks never mix (opt in to lazy walks)",
                field="topology",
            )

        self._topology = topology
        self.lazy = lazy
        self.neighborhood_queries = 0
        self.degree_queries = 0
        self._reached = np.zeros(topology.node_count, dtype=bool)
        self._reached[self.seed_vertex] = True
        self._lock = threading.Lock()

    # -- bookkeeping ------------------------------------------------------

    def _check_reached(self, vertices: np.ndarray) -> None:
        unknown = vertices[~self._reached[vertices]]
        if unknown.size:
            raise AccessError("NOT_REACHED", f"vertex {int(unknown[0])} was never reached", field="vertex")

    def _count(self, neighborhoods: int = 0, degrees: int = 0) -> None:
        with self._lock:
            self.neighborhood_queries += neighborhoods
            self.degree_queries += degrees

    def _on_query(self, vertices: np.ndarray, revealed: np.ndarray) -> None:
        """Hook for instrumentation; called with queried and revealed vertices"""

    def _reveal(self, vertices: np.ndarray) -> np.ndarray:
        revealed = self._topology.neighbor_block(vertices)
        self._reached[revealed] = True
        self._on_query(vertices, revealed)
        return revealed

    # -- queries ----------------------------------------------------------

    def query_neighborhood(self, v: int) -> Neighborhood:
        v = self._topology.check_node(v)
        vertices = np.array([v], dtype=np.int64)
        self._check_reached(vertices)
        self._count(neighborhoods=1)
        revealed = self._reveal(vertices)
        return Neighborhood(v, revealed, self._topology.degrees[revealed].copy())

    def query_degree(self, v: int) -> int:
        return int(self.query_degrees(np.array([self._topology.check_node(v)]))[0])

    def query_degrees(self, vertices: np.ndarray) -> np.ndarray:
        vertices = np.asarray(vertices, dtype=np.int64)
        self._check_reached(vertices)
        self._count(degrees=len(vertices))
        self._on_query(vertices, np.zeros(0, dtype=np.int64))
        return self._topology.degrees[vertices].copy()

    def step_walks(self, positions: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """One neighborhood query per walk, then a uniform neighbor (or hold, if lazy).

        Returns the new positions and their degrees, read off the neighborhood
        answers.
        """
        positions = np.asarray(positions, dtype=np.int64)
        self._check_reached(positions)
        self._count(neighborhoods=len(positions))
        self._reveal(positions)
        moved = self._topology.step_many(positions, rng, lazy=self.lazy)
        return moved, self._topology.degrees[moved].copy()

    def add_seeds(self, vertices: np.ndarray) -> None:
        """Mark extra start vertices as reached (stationary-start analysis runs)"""
        vertices = np.asarray(vertices, dtype=np.int64)
        for v in np.unique(vertices):
            self._topology.check_node(v)
        self._reached[vertices] = True

    def fork(self) -> "LinkQueryGraph":
        """Fresh view with zeroed counters, for one independent run"""
        view = self.__class__.__new__(self.__class__)
        view.__dict__.update(self.__dict__)
        view.neighborhood_queries = 0
        view.degree_queries = 0
        view._reached = np.zeros_like(self._reached)
        view._reached[self.seed_vertex] = True
        view._lock = threading.Lock()
        return view

    def merge_counts(self, others: Sequence["LinkQueryGraph"]) -> None:
        for other in others:
            self._count(other.neighborhood_queries, other.degree_queries)

    @property
    def queries(self) -> Dict[str, int]:
        return {"neighborhood": self.neighborhood_queries, "degree": self.degree_queries}


@dataclass
class WalkEnsemble:
    """n walk positions on a link-query graph and the stream that moves them"""

    graph: LinkQueryGraph
    positions: np.ndarray
    degrees: np.ndarray         # degree at the current position, -1 if not yet known
    burn_in: int
    rng: np.random.Generator = field(repr=False)

    def __post_init__(self):
        if len(self.positions) < 2:
            raise EstimationError("BAD_PARAMETER", "an ensemble needs at least two walks", field="walks")

    @property
    def size(self) -> int:
        return len(self.positions)


@dataclass
class SizeEstimate:
    weighted_collisions: np.ndarray     # c_j, sums of count/deg
    statistic: float                    # C
    estimate: Optional[float]           # Ã = 1/C, None when C = 0
    rounds: int
    avg_degree: float
    walks: int


# -- burn-in --------------------------------------------------------------


def burn_in_length(lam: float, edge_count: float, delta: float, c_burn: Optional[float] = None) -> int:
    """M = ceil(c_burn · ln(|E|/δ) / (1 − λ))"""
    c_burn = settings.c_burn if c_burn is None else c_burn
    if not 0.0 <= lam < 1.0:
        raise EstimationError("BAD_PARAMETER", f"λ must lie in [0, 1), got {lam} (bipartite or disconnected?)", field="lam")
    if not 0.0 < delta < 1.0:
        raise EstimationError("BAD_PARAMETER", f"δ must lie in (0, 1), got {delta}", field="delta")
    if c_burn <= 0:
        raise EstimationError("BAD_PARAMETER", f"c_burn must be positive, got {c_burn}", field="c_burn")
    if edge_count < 1:
        raise EstimationError("BAD_PARAMETER", f"|E| must be at least 1, got {edge_count}", field="edge_count")

    raw = c_burn * math.log(edge_count / delta) / (1.0 - lam)
    # round away float noise before the ceiling (ln(e²) = 2.0000000000000004)
    return max(0, math.ceil(round(raw, 9)))


def run_burn_in(g: LinkQueryGraph, n: int, burn_in: int, seed: SeedLike) -> WalkEnsemble:
    """n walks from the seed vertex, each taking ``burn_in`` steps"""
    if n < 2:
        raise EstimationError("BAD_PARAMETER", f"need n >= 2 walks, got {n}", field="walks")
    if burn_in < 0:
        raise EstimationError("BAD_PARAMETER", f"burn-in must be >= 0, got {burn_in}", field="burn_in")

    rng = _as_rng(seed)
    positions = np.full(n, g.seed_vertex, dtype=np.int64)
    degrees = np.full(n, -1, dtype=np.int64)
    for _ in range(burn_in):
        positions, degrees = g.step_walks(positions, rng)

    logger.debug(f"🔄 Burn-in done: {n} walks × {burn_in} steps, {g.neighborhood_queries} queries so far")
    return WalkEnsemble(g, positions, degrees, burn_in, rng)


def stationary_ensemble(g: LinkQueryGraph, topology: Topology, n: int, seed: SeedLike) -> WalkEnsemble:
    """Exact-stationary starts, isolating the estimators from burn-in error.

    Needs the topology itself, so this is an analysis path, not a crawl.
    """
    rng = _as_rng(seed)
    positions = stationary_samples(topology, n, rng)
    g.add_seeds(positions)
    return WalkEnsemble(g, positions, np.full(n, -1, dtype=np.int64), 0, rng)


# -- estimators -----------------------------------------------------------


def estimate_avg_degree(e: WalkEnsemble) -> float:
    """D = mean of 1/deg(w_j), an estimate of 1/avg_degree (n degree queries)"""
    degrees = e.graph.query_degrees(e.positions)
    e.degrees = degrees
    return float(np.mean(1.0 / degrees))


def estimate_size(
    g: LinkQueryGraph,
    e: WalkEnsemble,
    rounds: int,
    avg_deg: Union[float, Fraction],
) -> SizeEstimate:
    """Degree-weighted collision counting over ``rounds`` rounds; moves the ensemble.

    C = avg_deg·Σc_j/(n(n−1)t) and Ã = 1/C; C = 0 gives an absent estimate.
    """
    if rounds < 1:
        raise EstimationError("BAD_PARAMETER", f"t must be >= 1, got {rounds}", field="t")
    if avg_deg <= 0:
        raise EstimationError("BAD_PARAMETER", f"average degree must be positive, got {avg_deg}", field="avg_deg")

    n = e.size
    weighted = np.zeros(n)
    positions = e.positions
    for _ in range(rounds):
        positions, degrees = g.step_walks(positions, e.rng)
        weighted += occupancy_collisions(positions) / degrees
    e.positions = positions
    e.degrees = degrees

    statistic = float(avg_deg) * float(weighted.sum()) / (n * (n - 1) * rounds)
    estimate = 1.0 / statistic if statistic > 0 else None
    if estimate is None:
        logger.warning(f"⚠️ No collisions among {n} walks in {rounds} rounds; estimate absent")
    return SizeEstimate(weighted, statistic, estimate, rounds, float(avg_deg), n)


def median_boost(estimates: Sequence[Optional[float]]) -> float:
    """Median of an odd number of runs; absent runs count as +inf"""
    count = len(estimates)
    if count < 1 or count % 2 == 0:
        raise EstimationError("BAD_PARAMETER", f"median boosting needs an odd run count, got {count}", field="boost_runs")
    if all(x is None for x in estimates):
        raise EstimationError("NO_ESTIMATE", f"all {count} runs failed to collide", field="estimates")

    values = np.array([math.inf if x is None else float(x) for x in estimates])
    return float(np.median(values))


# -- planning -------------------------------------------------------------


def plan_walk_count(
    rounds: int,
    big_b: float,
    stats: GraphStats,
    eps: float,
    delta: float,
    size_guess: float,
    c_plan: Optional[float] = None,
) -> int:
    """n = ceil(c_plan · max{avg/(min·ε²δ), sqrt(|V|·B(t)·avg/(t·ε²δ))}), at least 2"""
    c_plan = settings.c_plan if c_plan is None else c_plan
    if min(rounds, big_b, eps, delta, size_guess, c_plan) <= 0:
        raise EstimationError("BAD_PARAMETER", "planning inputs must be positive", field="eps")

    avg = stats.avg_degree_float
    scale = eps ** 2 * delta
    first = avg / (stats.min_degree * scale)
    second = math.sqrt(size_guess * big_b * avg / (rounds * scale))
    return max(2, math.ceil(round(c_plan * max(first, second), 9)))


def plan_avg_degree_walks(stats: GraphStats, eps: float, delta: float, c_plan: Optional[float] = None) -> int:
    """Walks the average-degree estimate needs on its own: ceil(c_plan·avg/(min·ε²δ))"""
    c_plan = settings.c_plan if c_plan is None else c_plan
    return max(1, math.ceil(round(c_plan * stats.avg_degree_float / (stats.min_degree * eps ** 2 * delta), 9)))


def size_failure_bound(n: int, rounds: int, big_b: float, edge_count: int, eps: float) -> float:
    """Chebyshev bound B(t)·|E|/(ε²n²t) on Pr[|C − 1/|V|| > ε/|V|], capped at 1"""
    return min(1.0, big_b * edge_count / (eps ** 2 * n ** 2 * rounds))


def degree_weighted_big_b(t: Topology, rounds: int) -> float:
    """B(t) = Σ_{m=1}^{t} β_deg(m) via the exact oracle"""
    return float(degree_weighted_profile(t, rounds)[1:].sum())


@dataclass
class PairMomentReport:
    """E[c̄²] for one pair of stationary walks, c̄ = Σ_r 1[collide at r]/deg"""

    second_moment: float
    standard_error: float
    rounds: int
    trials: int
    big_b: float
    ratio: float                        # E[c̄²]·|E|/(t·B(t))


def weighted_pair_second_moment(
    topology: Topology,
    rounds: int,
    trials: int,
    seed: int,
    big_b: Optional[float] = None,
    threads: Optional[int] = None,
) -> PairMomentReport:
    """Monte Carlo E[c̄²] and its ratio to t·B(t)/|E| (analysis path, needs the topology)"""
    if rounds < 1 or trials < 2:
        raise EstimationError("BAD_PARAMETER", "need rounds >= 1 and trials >= 2", field="trials")
    big_b = degree_weighted_big_b(topology, rounds) if big_b is None else big_b
    sizes = chunk_sizes(trials)

    def run_chunk(i: int) -> np.ndarray:
        rng = task_rng(seed, i)
        a = stationary_samples(topology, sizes[i], rng)
        b = stationary_samples(topology, sizes[i], rng)
        weighted = np.zeros(sizes[i])
        for _ in range(rounds):
            a = topology.step_many(a, rng)
            b = topology.step_many(b, rng)
            weighted += (a == b) / topology.degrees[a]
        return weighted ** 2

    squares = np.concatenate(map_tasks(run_chunk, len(sizes), threads))
    second = float(squares.mean())
    se = float(squares.std(ddof=1) / math.sqrt(len(squares)))
    ratio = second * topology.edge_count / (rounds * big_b)
    logger.debug(f"🔄 E[c̄²] = {second:.6g} ± {se:.2g} at t={rounds}, ratio {ratio:.4g}")
    return PairMomentReport(second, se, rounds, len(squares), big_b, ratio)


# -- pipeline -------------------------------------------------------------


@dataclass
class PipelineResult:
    estimate: float                     # boosted Ã
    walks: int
    burn_in: int
    rounds: int
    lam: float
    big_b: float
    lazy: bool
    c_burn: float
    c_plan: float
    queries: Dict[str, int]
    per_run: List[dict]


def run_pipeline(
    topology: Topology,
    eps: float,
    delta: float,
    rounds: int,
    boost_runs: int,
    seed: int,
    seed_vertex: int = 0,
    lam: Optional[float] = None,
    big_b: Optional[float] = None,
    walks: Optional[int] = None,
    lazy: bool = False,
    c_burn: Optional[float] = None,
    c_plan: Optional[float] = None,
    size_guess: Optional[float] = None,
    threads: Optional[int] = None,
) -> PipelineResult:
    """Burn-in, average degree, degree-weighted collisions, then median of ``boost_runs`` runs.

    λ, B(t) and the size guess are planning inputs; when omitted they are
    derived from the topology with the exact oracle (size guard applies).
    """
    c_burn = settings.c_burn if c_burn is None else c_burn
    c_plan = settings.c_plan if c_plan is None else c_plan
    if boost_runs < 1 or boost_runs % 2 == 0:
        raise ConfigError("INVALID_VALUE", f"boost runs must be odd and positive, got {boost_runs}", field="boost_runs")

    base = LinkQueryGraph(topology, seed_vertex=seed_vertex, lazy=lazy)
    if lam is None:
        lam = walk_lambda(topology, lazy=lazy)
    if big_b is None:
        big_b = degree_weighted_big_b(topology, rounds)
    if size_guess is None:
        size_guess = float(topology.node_count)

    stats = graph_stats(topology)
    burn_in = burn_in_length(lam, topology.edge_count, delta, c_burn)
    n = walks if walks is not None else plan_walk_count(rounds, big_b, stats, eps, delta, size_guess, c_plan)
    logger.info(f"🔄 Size pipeline on {topology.describe()}: n={n}, M={burn_in}, t={rounds}, {boost_runs} runs")

    def one_run(i: int) -> dict:
        view = base.fork()
        ensemble = run_burn_in(view, n, burn_in, task_rng(seed, i))
        d = estimate_avg_degree(ensemble)
        result = estimate_size(view, ensemble, rounds, 1.0 / d)

        expected = n * (burn_in + rounds)
        if view.neighborhood_queries != expected or view.degree_queries != n:
            raise AccessError(
                "QUERY_ACCOUNTING",
                f"run {i} used {view.queries}, expected {expected} neighborhood / {n} degree",
                field="queries",
            )
        return {"view": view, "A_tilde": result.estimate, "C": result.statistic, "D": d, "queries": view.queries}

    runs = map_tasks(one_run, boost_runs, threads)
    base.merge_counts([r.pop("view") for r in runs])

    boosted = median_boost([r["A_tilde"] for r in runs])
    logger.info(f"✅ Boosted size estimate {boosted:.6g} (|V| = {topology.node_count})")
    return PipelineResult(
        estimate=boosted,
        walks=n,
        burn_in=burn_in,
        rounds=rounds,
        lam=lam,
        big_b=big_b,
        lazy=lazy,
        c_burn=c_burn,
        c_plan=c_plan,
        queries=base.queries,
        per_run=runs,
    )

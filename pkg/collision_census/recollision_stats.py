"""
Re-collision and equalization profiles, collision-count moments, and the
per-family theoretical β(m) bounds with their B(t) prefix sums.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from collision_census.errors import EstimationError, TopologyError
from collision_census.seeding import chunk_sizes, map_tasks, task_rng
from collision_census.topology import Topology, spectral_lambda, stationary_samples

logger = logging.getLogger(__name__)

MIN_MOMENT_TRIALS = 10_000
THEORETICAL_FAMILIES = ("torus2d", "ring", "torus_kd", "expander", "hypercube")


@dataclass
class BetaProfile:
    """β̂(m) for m = 0..m_max with per-m sample counts"""

    values: np.ndarray
    trials: np.ndarray
    source: str                 # empirical | oracle | theoretical-family
    mode: str = "pair"          # pair | equalization
    descriptor: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.trials = np.asarray(self.trials, dtype=np.int64)
        if self.source in ("empirical", "oracle"):
            if (self.values < -1e-12).any() or (self.values > 1 + 1e-12).any():
                raise ValueError(f"{self.source} profile has entries outside [0, 1]")

    @property
    def m_max(self) -> int:
        return len(self.values) - 1

    @property
    def standard_errors(self) -> np.ndarray:
        """Per-m binomial SE; zero where no samples back the value"""
        se = np.zeros_like(self.values)
        sampled = self.trials > 0
        v = self.values[sampled]
        se[sampled] = np.sqrt(v * (1.0 - v) / self.trials[sampled])
        return se

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "m": np.arange(self.m_max + 1),
            "beta_hat": self.values,
            "se": self.standard_errors,
            "trials": self.trials,
        })


@dataclass
class MomentReport:
    """Moment of a per-trial collision (or visit) count.

    Order 1 is the raw mean; orders 2..4 are central moments.
    """

    order: int
    value: float
    standard_error: float
    trials: int
    descriptor: str
    rounds: int
    kind: str = "pair"


@dataclass
class FirstCollisionReport:
    probability: float
    standard_error: float
    rounds: int
    trials: int
    ratio: float = field(default=0.0)   # probability · A · ln(t) / t


# -- empirical profiles -------------------------------------------------


def _profile_chunk(
    t: Topology,
    m_max: int,
    size: int,
    rng: np.random.Generator,
    mode: str,
    start: Optional[int],
) -> np.ndarray:
    if start is None:
        a = stationary_samples(t, size, rng)
    else:
        a = np.full(size, t.check_node(start), dtype=np.int64)

    hits = np.zeros(m_max + 1, dtype=np.int64)
    hits[0] = size
    if mode == "pair":
        b = a.copy()
        for m in range(1, m_max + 1):
            a = t.step_many(a, rng)
            b = t.step_many(b, rng)
            hits[m] = np.count_nonzero(a == b)
    else:
        origin = a.copy()
        for m in range(1, m_max + 1):
            a = t.step_many(a, rng)
            hits[m] = np.count_nonzero(a == origin)
    return hits


def _empirical_profile(
    t: Topology,
    m_max: int,
    trials: int,
    seed: int,
    mode: str,
    start: Optional[int],
    threads: Optional[int],
) -> BetaProfile:
    if m_max < 0:
        raise EstimationError("BAD_PARAMETER", f"m_max must be >= 0, got {m_max}", field="m_max")
    if trials < 1:
        raise EstimationError("BAD_PARAMETER", f"trials must be >= 1, got {trials}", field="trials")

    sizes = chunk_sizes(trials)
    logger.info(f"🔄 {mode} profile on {t.describe()}: {trials} trials, m ≤ {m_max}, {len(sizes)} chunks")

    def run_chunk(i: int) -> np.ndarray:
        return _profile_chunk(t, m_max, sizes[i], task_rng(seed, i), mode, start)

    hits = np.sum(map_tasks(run_chunk, len(sizes), threads), axis=0)
    return BetaProfile(
        values=hits / float(trials),
        trials=np.full(m_max + 1, trials, dtype=np.int64),
        source="empirical",
        mode=mode,
        descriptor=t.describe(),
    )


def empirical_beta_profile(
    t: Topology,
    m_max: int,
    trials: int,
    seed: int,
    start: Optional[int] = None,
    threads: Optional[int] = None,
) -> BetaProfile:
    """Two walkers from a common node (stationary draw, or ``start``) stepped independently.

    Each trial contributes one co-location indicator per m, so entries are
    correlated across m; the SEs are per-m marginal.
    """
    return _empirical_profile(t, m_max, trials, seed, "pair", start, threads)


def empirical_equalization_profile(
    t: Topology,
    m_max: int,
    trials: int,
    seed: int,
    start: Optional[int] = None,
    threads: Optional[int] = None,
) -> BetaProfile:
    return _empirical_profile(t, m_max, trials, seed, "equalization", start, threads)


# -- collision-count moments --------------------------------------------


def _check_moment_inputs(t: Topology, rounds: int, trials: int, orders: Sequence[int]) -> None:
    if not t.regular:
        raise TopologyError("IRREGULAR", f"{t.describe()} is not regular", field="topology")
    if not 1 <= rounds <= t.node_count:
        raise EstimationError("BAD_PARAMETER", f"rounds must lie in [1, {t.node_count}]", field="rounds")
    if trials < MIN_MOMENT_TRIALS:
        raise EstimationError("BAD_PARAMETER", f"moments need >= {MIN_MOMENT_TRIALS} trials", field="trials")
    for k in orders:
        if not 1 <= k <= 4:
            raise EstimationError("BAD_PARAMETER", f"moment order {k} outside 1..4", field="orders")


def _count_samples(
    t: Topology,
    rounds: int,
    trials: int,
    seed: int,
    threads: Optional[int],
    node: Optional[int],
) -> np.ndarray:
    """Per-trial counts: pair collisions (node is None) or visits to ``node``"""
    sizes = chunk_sizes(trials)

    def run_chunk(i: int) -> np.ndarray:
        rng = task_rng(seed, i)
        size = sizes[i]
        counts = np.zeros(size, dtype=np.int64)
        a = stationary_samples(t, size, rng)
        if node is None:
            b = stationary_samples(t, size, rng)
            for _ in range(rounds):
                a = t.step_many(a, rng)
                b = t.step_many(b, rng)
                counts += a == b
        else:
            for _ in range(rounds):
                a = t.step_many(a, rng)
                counts += a == node
        return counts

    return np.concatenate(map_tasks(run_chunk, len(sizes), threads))


def _moment_reports(
    counts: np.ndarray,
    orders: Sequence[int],
    descriptor: str,
    rounds: int,
    kind: str,
) -> List[MomentReport]:
    n = len(counts)
    x = counts.astype(float)
    mean = float(x.mean())
    centered = x - mean

    reports = []
    for k in orders:
        if k == 1:
            value = mean
            se = float(x.std(ddof=1)) / math.sqrt(n)
        else:
            powers = centered ** k
            value = float(powers.mean())
            se = float(powers.std(ddof=1)) / math.sqrt(n)
        reports.append(MomentReport(k, value, se, n, descriptor, rounds, kind))
    return reports


def pair_collision_moments(
    t: Topology,
    rounds: int,
    trials: int,
    seed: int,
    orders: Sequence[int] = (1, 2, 3, 4),
    threads: Optional[int] = None,
) -> List[MomentReport]:
    """Moments of the collision count of one pair placed independently uniformly"""
    _check_moment_inputs(t, rounds, trials, orders)
    counts = _count_samples(t, rounds, trials, seed, threads, node=None)
    return _moment_reports(counts, orders, t.describe(), rounds, "pair")


def visit_count_moments(
    t: Topology,
    rounds: int,
    trials: int,
    seed: int,
    node: int = 0,
    orders: Sequence[int] = (1, 2, 3, 4),
    threads: Optional[int] = None,
) -> List[MomentReport]:
    """Moments of how often one uniformly started walk visits ``node``"""
    _check_moment_inputs(t, rounds, trials, orders)
    node = t.check_node(node)
    counts = _count_samples(t, rounds, trials, seed, threads, node=node)
    return _moment_reports(counts, orders, t.describe(), rounds, "visits")


def first_collision_probability(
    t: Topology,
    rounds: int,
    trials: int,
    seed: int,
    threads: Optional[int] = None,
) -> FirstCollisionReport:
    """Pr[pair collides at least once in ``rounds`` rounds], plus Pr·A·ln t/t"""
    if rounds < 2:
        raise EstimationError("BAD_PARAMETER", "rounds must be >= 2 (ln t appears in the ratio)", field="rounds")
    _check_moment_inputs(t, rounds, trials, (1,))

    counts = _count_samples(t, rounds, trials, seed, threads, node=None)
    p = float(np.count_nonzero(counts) / len(counts))
    se = math.sqrt(p * (1.0 - p) / len(counts))
    ratio = p * t.node_count * math.log(rounds) / rounds
    return FirstCollisionReport(p, se, rounds, len(counts), ratio)


# -- theoretical forms --------------------------------------------------


def theoretical_beta(
    family: str,
    m: int,
    node_count: int,
    k: Optional[int] = None,
    lam: Optional[float] = None,
    parity_classes: int = 1,
    hypercube_c: float = 1.0,
) -> float:
    """Leading functional form of the family's re-collision bound, Θ-constants set to 1.

    ``parity_classes`` multiplies the 1/A term of the torus and ring forms
    (bipartite tori concentrate walk mass on one parity class).
    """
    if m < 0:
        raise EstimationError("BAD_PARAMETER", f"m must be >= 0, got {m}", field="m")
    tail = parity_classes / node_count

    if family == "torus2d":
        return 1.0 / (m + 1) + tail
    if family == "ring":
        return 1.0 / math.sqrt(m + 1) + tail
    if family == "torus_kd":
        if k is None:
            raise EstimationError("BAD_PARAMETER", "torus_kd bound needs k", field="k")
        return (m + 1) ** (-k / 2.0) + tail
    if family == "expander":
        if lam is None:
            raise EstimationError("BAD_PARAMETER", "expander bound needs λ", field="lam")
        return lam ** m + 2.0 / node_count
    if family == "hypercube":
        return 0.7 ** m + hypercube_c / math.sqrt(node_count)

    raise TopologyError("UNKNOWN_FAMILY", f"no theoretical bound for family {family}", field="family")


def theoretical_family(t: Topology) -> str:
    """Which bound form applies to a built topology"""
    if t.family == "ring" or (t.family == "torus_kd" and t.params["k"] == 1):
        return "ring"
    if t.family == "torus_kd":
        return "torus2d" if t.params["k"] == 2 else "torus_kd"
    if t.family == "hypercube":
        return "hypercube"
    if not t.regular:
        raise TopologyError("IRREGULAR", f"no re-collision bound for irregular {t.describe()}", field="topology")
    return "expander"


def family_bound(t: Topology, m: int, lam: Optional[float] = None, parity_classes: int = 1) -> float:
    family = theoretical_family(t)
    if family == "expander" and lam is None:
        lam = spectral_lambda(t)
    return theoretical_beta(
        family,
        m,
        t.node_count,
        k=t.params.get("k"),
        lam=lam,
        parity_classes=parity_classes,
    )


def theoretical_profile(
    family: str,
    m_max: int,
    node_count: int,
    k: Optional[int] = None,
    lam: Optional[float] = None,
    parity_classes: int = 1,
) -> BetaProfile:
    values = [
        theoretical_beta(family, m, node_count, k=k, lam=lam, parity_classes=parity_classes)
        for m in range(m_max + 1)
    ]
    return BetaProfile(
        values=np.array(values),
        trials=np.zeros(m_max + 1, dtype=np.int64),
        source="theoretical-family",
        descriptor=f"{family}(A={node_count})",
    )


def big_B(profile: BetaProfile, t: int) -> float:
    """B(t) = Σ_{m=0}^{t} β(m)"""
    if not 0 <= t <= profile.m_max:
        raise EstimationError("RANGE", f"t={t} outside profile range [0, {profile.m_max}]", field="t")
    return float(profile.values[: t + 1].sum())


def loglog_slope(profile: BetaProfile, m_lo: int = 4, m_hi: int = 64) -> float:
    """Least-squares slope of log β(m) against log(m+1); zero entries are skipped"""
    if not 0 <= m_lo < m_hi <= profile.m_max:
        raise EstimationError("RANGE", f"fit window [{m_lo}, {m_hi}] outside [0, {profile.m_max}]", field="m")

    m = np.arange(m_lo, m_hi + 1)
    y = profile.values[m]
    keep = y > 0
    if keep.sum() < 2:
        raise EstimationError("NO_ESTIMATE", "fewer than two positive entries in the fit window", field="profile")

    slope, _ = np.polyfit(np.log(m[keep] + 1.0), np.log(y[keep]), 1)
    return float(slope)

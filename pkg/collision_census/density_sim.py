"""
Synchronous-round multi-agent simulator for collision-based density estimation.

Every trial draws from its own stream in a fixed order:
placement (one stationary draw per agent), then the per-algorithm extras
(independent-sampling coin flips, frequency labels), then one step draw per agent per
round. Collisions are counted at the end of rounds 1..t only; co-locations
from the initial placement are ignored.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Literal, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from collision_census.errors import EstimationError
from collision_census.seeding import map_tasks, task_rng
from collision_census.topology import Topology, shift, stationary_samples

logger = logging.getLogger(__name__)

Algorithm = Literal["encounter", "independent", "frequency"]

# (round index, positions after the round, per-agent counts for that round)
RoundHook = Callable[[int, np.ndarray, np.ndarray], None]


class SimConfig(BaseModel):
    """One density experiment: topology, n+1 agents, t rounds"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    topology: Topology
    agents: int = Field(ge=1)
    rounds: int = Field(ge=1)
    seed: int = 0
    algorithm: Algorithm = "encounter"
    label_fraction: Optional[float] = Field(default=None, ge=0.0, le=1.0)

    @property
    def others(self) -> int:
        """n, the number of other agents each agent can meet"""
        return self.agents - 1

    @property
    def density(self) -> float:
        """d = n/A"""
        return self.others / self.topology.node_count

    @model_validator(mode="after")
    def _check_algorithm_preconditions(self) -> "SimConfig":
        if self.algorithm == "independent":
            t = self.topology
            if t.family != "torus_kd" or t.params.get("k") != 2:
                raise ValueError("independent sampling runs on a 2D torus only")
            if not self.rounds < math.sqrt(t.node_count):
                raise ValueError(f"independent sampling needs rounds < sqrt(A) = {math.sqrt(t.node_count):g}")
            if self.density > 1:
                raise ValueError(f"independent sampling needs density <= 1, got {self.density:g}")
        return self


@dataclass
class DensityEstimate:
    """Per-agent counts and estimates for one trial"""

    collisions: np.ndarray          # c per agent (mod-corrected for independent sampling)
    estimates: np.ndarray           # d̃ per agent
    algorithm: str
    rounds: int
    raw_collisions: Optional[np.ndarray] = None   # independent sampling, before c mod t


@dataclass
class FrequencyEstimate:
    collisions: np.ndarray
    labeled_collisions: np.ndarray
    labels: np.ndarray
    d_tilde: np.ndarray
    d_tilde_p: np.ndarray
    f_tilde_p: np.ndarray           # NaN where d̃ = 0
    rounds: int
    algorithm: str = "frequency"


TrialResult = Union[DensityEstimate, FrequencyEstimate]


def occupancy_collisions(positions: np.ndarray) -> np.ndarray:
    """For each agent, how many OTHER agents share its node"""
    positions = np.asarray(positions)
    if positions.size == 0:
        return np.zeros(0, dtype=np.int64)
    _, inverse, counts = np.unique(positions, return_inverse=True, return_counts=True)
    return counts[inverse.ravel()] - 1


def _labeled_collisions(positions: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """For each agent, how many OTHER labeled agents share its node"""
    _, inverse = np.unique(positions, return_inverse=True)
    inverse = inverse.ravel()
    weights = labels.astype(np.int64)
    at_node = np.bincount(inverse, weights=weights).astype(np.int64)
    return at_node[inverse] - weights


def _placement(config: SimConfig, rng: np.random.Generator, initial_positions: Optional[np.ndarray]) -> np.ndarray:
    if initial_positions is not None:
        positions = np.asarray(initial_positions, dtype=np.int64)
        if positions.shape != (config.agents,):
            raise EstimationError("BAD_PARAMETER", f"expected {config.agents} initial positions", field="initial_positions")
        return positions.copy()
    return stationary_samples(config.topology, config.agents, rng)


def run_encounter_rate(
    config: SimConfig,
    rng: Optional[np.random.Generator] = None,
    on_round: Optional[RoundHook] = None,
    initial_positions: Optional[np.ndarray] = None,
) -> DensityEstimate:
    """Encounter-rate estimator: random-walk every round, d̃ = c/t"""
    rng = rng if rng is not None else task_rng(config.seed, 0)
    t = config.topology
    positions = _placement(config, rng, initial_positions)
    c = np.zeros(config.agents, dtype=np.int64)

    for r in range(1, config.rounds + 1):
        positions = t.step_many(positions, rng)
        counts = occupancy_collisions(positions)
        c += counts
        if on_round is not None:
            on_round(r, positions, counts)

    return DensityEstimate(c, c / float(config.rounds), "encounter", config.rounds)


def run_independent_sampling(
    config: SimConfig,
    rng: Optional[np.random.Generator] = None,
    on_round: Optional[RoundHook] = None,
    initial_positions: Optional[np.ndarray] = None,
    walking: Optional[np.ndarray] = None,
) -> DensityEstimate:
    """Half the agents stand still, the rest move (0, +1) each round.

    A walker collides with the w other walkers placed on its node on every
    round, so its raw count carries w·t spurious collisions; ``c mod t``
    removes them (t < √A means genuine collisions stay below t).
    """
    rng = rng if rng is not None else task_rng(config.seed, 0)
    t = config.topology
    positions = _placement(config, rng, initial_positions)
    if walking is None:
        walking = rng.random(config.agents) < 0.5
    walking = np.asarray(walking, dtype=bool)

    raw = np.zeros(config.agents, dtype=np.int64)
    for r in range(1, config.rounds + 1):
        positions = positions.copy()
        positions[walking] = shift(t, positions[walking], dim=1, delta=1)
        counts = occupancy_collisions(positions)
        raw += counts
        if on_round is not None:
            on_round(r, positions, counts)

    c = raw % config.rounds
    return DensityEstimate(c, 2.0 * c / config.rounds, "independent", config.rounds, raw_collisions=raw)


def run_frequency_estimation(
    config: SimConfig,
    labels: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
    on_round: Optional[RoundHook] = None,
    initial_positions: Optional[np.ndarray] = None,
) -> FrequencyEstimate:
    """Encounter-rate walk with a second counter for labeled agents; f̃ = d̃_P/d̃"""
    rng = rng if rng is not None else task_rng(config.seed, 0)
    t = config.topology
    positions = _placement(config, rng, initial_positions)

    if labels is None:
        if config.label_fraction is None:
            raise EstimationError("BAD_PARAMETER", "frequency runs need labels or a label fraction", field="label_frac")
        labels = rng.random(config.agents) < config.label_fraction
    labels = np.asarray(labels, dtype=bool)
    if labels.shape != (config.agents,):
        raise EstimationError("BAD_PARAMETER", f"expected {config.agents} labels", field="labels")

    c = np.zeros(config.agents, dtype=np.int64)
    c_p = np.zeros(config.agents, dtype=np.int64)
    for r in range(1, config.rounds + 1):
        positions = t.step_many(positions, rng)
        counts = occupancy_collisions(positions)
        c += counts
        c_p += _labeled_collisions(positions, labels)
        if on_round is not None:
            on_round(r, positions, counts)

    d_tilde = c / float(config.rounds)
    d_tilde_p = c_p / float(config.rounds)
    f_tilde_p = np.where(c > 0, c_p / np.maximum(c, 1), np.nan)
    return FrequencyEstimate(c, c_p, labels, d_tilde, d_tilde_p, f_tilde_p, config.rounds)


def run_trial(config: SimConfig, trial: int, labels: Optional[np.ndarray] = None) -> TrialResult:
    rng = task_rng(config.seed, trial)
    if config.algorithm == "independent":
        return run_independent_sampling(config, rng=rng)
    if config.algorithm == "frequency":
        return run_frequency_estimation(config, labels=labels, rng=rng)
    return run_encounter_rate(config, rng=rng)


def run_trials(
    config: SimConfig,
    trials: int,
    threads: Optional[int] = None,
    labels: Optional[np.ndarray] = None,
) -> List[TrialResult]:
    """Independent trials; trial i always uses stream (seed, i)"""
    if trials < 1:
        raise EstimationError("BAD_PARAMETER", f"trials must be >= 1, got {trials}", field="trials")

    logger.info(
        f"🔄 {config.algorithm} on {config.topology.describe()}: "
        f"{config.agents} agents, {config.rounds} rounds, {trials} trials"
    )
    results = map_tasks(lambda i: run_trial(config, i, labels), trials, threads)
    logger.info(f"✅ Finished {trials} trials")
    return results


def estimates_frame(results: List[TrialResult]) -> pd.DataFrame:
    """Long table: one row per (trial, agent)"""
    frames = []
    for trial, result in enumerate(results):
        agents = np.arange(len(result.collisions))
        if isinstance(result, FrequencyEstimate):
            f = pd.Series(result.f_tilde_p, dtype=float)
            frames.append(pd.DataFrame({
                "trial": trial,
                "agent": agents,
                "c": result.collisions,
                "d_tilde": result.d_tilde,
                "d_tilde_P": result.d_tilde_p,
                "f_tilde_P": f,
            }))
        else:
            frames.append(pd.DataFrame({
                "trial": trial,
                "agent": agents,
                "c": result.collisions,
                "d_tilde": result.estimates,
            }))
    return pd.concat(frames, ignore_index=True)


def summarize_estimates(frame: pd.DataFrame, density: float, eps: Optional[float] = None) -> dict:
    """Grand mean with SE over per-trial means, RMS relative error, failure rate at ``eps``"""
    per_trial = frame.groupby("trial")["d_tilde"].mean()
    trials = len(per_trial)
    se = float(per_trial.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("nan")

    summary = {
        "trials": trials,
        "grand_mean": float(frame["d_tilde"].mean()),
        "standard_error": se,
    }
    if density > 0:
        relative = (frame["d_tilde"] - density) / density
        summary["rms_relative_error"] = float(np.sqrt((relative ** 2).mean()))
        if eps is not None:
            summary["failure_rate"] = float((relative.abs() > eps).mean())
    return summary


# -- accuracy planning ----------------------------------------------------


def accuracy_epsilon(rounds: int, density: float, delta: float, big_b: float, upper_bound_only: bool = False) -> float:
    """ε = sqrt(ln(1/δ)·B(t)/(t·d)); B(t)² in place of B(t) when only an upper bound on β is known"""
    if rounds < 1 or density <= 0 or not 0 < delta < 1 or big_b <= 0:
        raise EstimationError("BAD_PARAMETER", "need rounds >= 1, density > 0, delta in (0, 1), B > 0", field="delta")
    b = big_b ** 2 if upper_bound_only else big_b
    return math.sqrt(math.log(1.0 / delta) * b / (rounds * density))


def rounds_for_accuracy(density: float, eps: float, delta: float) -> int:
    """Grid round count ln(1/δ)·ln ln(1/δ)·ln(1/(dε))/(dε²), constant 1"""
    if density <= 0 or eps <= 0 or not 0 < delta < 1:
        raise EstimationError("BAD_PARAMETER", "need density > 0, eps > 0, delta in (0, 1)", field="eps")
    log_inv_delta = math.log(1.0 / delta)
    # ln ln(1/δ) is negative for δ > 1/e; floor it at 1
    log_log = max(1.0, math.log(log_inv_delta)) if log_inv_delta > 1 else 1.0
    log_inv_de = max(1.0, math.log(1.0 / (density * eps)))
    return max(1, math.ceil(log_inv_delta * log_log * log_inv_de / (density * eps ** 2)))


def chernoff_failure_bound(eps: float, rounds: int, density: float) -> float:
    """2·exp(−ε²·t·d/6), capped at 1"""
    return min(1.0, 2.0 * math.exp(-(eps ** 2) * rounds * density / 6.0))

"""
Command-line entry point: one subcommand per experiment family.

    census simulate-density --family torus2d --side 32 --agents 11 --rounds 512 --trials 100
    census recollision-profile --family ring --side 1024 --mmax 64 --trials 100000
    census netsize --family torus_kd --dims 3 --side 7 --eps 0.2 --delta 0.1 --t 64
    census verify --family torus2d --side 16 --mmax 64

Config precedence: flags > --config JSON entries > built-in defaults. The
resolved config is embedded in every output file.
"""
import argparse
import json
import logging
import math
import re
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError

from collision_census import __version__
from collision_census.core.config import LOG_LEVELS, settings, validate_settings
from collision_census.data_adapter import write_output
from collision_census.density_sim import SimConfig, estimates_frame, run_trials, summarize_estimates
from collision_census.errors import CensusError, ConfigError, TopologyError
from collision_census.exact_oracle import averaged_oracle_profile, verify_rows
from collision_census.models import ExperimentConfig
from collision_census.netsize import run_pipeline
from collision_census.recollision_stats import (
    empirical_beta_profile,
    empirical_equalization_profile,
    family_bound,
)
from collision_census.topology import Topology, build_topology, is_bipartite

logger = logging.getLogger(__name__)

TOPOLOGY_KEYS = ("family", "side", "sides", "dims", "nodes", "degree", "graph_seed", "edge_file")
LOCAL_KEYS = ("config", "log_level")


class CensusArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises ConfigError instead of exiting"""

    def error(self, message: str):
        flag = re.search(r"(--[\w-]+)", message)
        code = "UNKNOWN_FLAG" if "unrecognized" in message else "INVALID_VALUE"
        raise ConfigError(code, message, field=flag.group(1) if flag else None)


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)

    graph = common.add_argument_group("topology")
    graph.add_argument("--family", help="torus2d | torus_kd | ring | hypercube | explicit | complete | star | random_regular")
    graph.add_argument("--side", type=int, help="side length (square tori, rings)")
    graph.add_argument("--sides", type=int, nargs="+", help="per-dimension side lengths")
    graph.add_argument("--dims", type=int, help="dimension count k (torus_kd, hypercube)")
    graph.add_argument("--nodes", type=int, help="node count (complete, star, random_regular)")
    graph.add_argument("--degree", type=int, help="degree (random_regular)")
    graph.add_argument("--graph-seed", dest="graph_seed", type=int, help="generator seed (random_regular)")
    graph.add_argument("--graph-file", dest="edge_file", type=Path, help="edge-list file (explicit)")

    run = common.add_argument_group("run")
    run.add_argument("--seed", type=int, help="master seed")
    run.add_argument("--threads", type=int, help="worker threads (default: COLLISION_CENSUS_THREADS or CPU count)")
    run.add_argument("--out", type=Path, help="output file (default: stdout)")
    run.add_argument("--format", choices=["csv", "json"], help="output format")
    run.add_argument("--config", type=Path, help="JSON config file; flags override its entries")
    run.add_argument(
        "--log-level", dest="log_level", type=str.upper, choices=LOG_LEVELS, help="DEBUG | INFO | WARNING | ERROR | CRITICAL"
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = CensusArgumentParser(
        prog="census",
        description="Random-walk density and network size estimation toolkit",
        argument_default=argparse.SUPPRESS,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    sim = sub.add_parser("simulate-density", parents=[common], argument_default=argparse.SUPPRESS,
                         help="collision-based density estimation trials")
    sim.add_argument("--agents", type=int, help="total agents n+1")
    sim.add_argument("--rounds", type=int, help="rounds t")
    sim.add_argument("--trials", type=int, help="independent trials")
    sim.add_argument("--algorithm", choices=["encounter", "independent", "frequency"])
    sim.add_argument("--label-frac", dest="label_frac", type=float, help="labeled fraction f_P (frequency runs)")

    prof = sub.add_parser("recollision-profile", parents=[common], argument_default=argparse.SUPPRESS,
                          help="empirical re-collision / equalization profile")
    prof.add_argument("--mmax", dest="m_max", type=int)
    prof.add_argument("--trials", type=int)
    prof.add_argument("--mode", choices=["pair", "equalization"])

    size = sub.add_parser("netsize", parents=[common], argument_default=argparse.SUPPRESS,
                          help="network size estimation from walk collisions")
    size.add_argument("--seed-vertex", dest="seed_vertex", type=int)
    size.add_argument("--eps", type=float)
    size.add_argument("--delta", type=float)
    size.add_argument("--t", dest="rounds", type=int, help="collision-counting rounds")
    size.add_argument("--boost-runs", dest="boost_runs", type=int, help="odd number of runs for the median")
    size.add_argument("--walks", type=int, help="override the planned walk count n")
    size.add_argument("--lam", type=float, help="λ planning input (default: exact eigensolve)")
    size.add_argument("--big-b", dest="big_b", type=float, help="B(t) planning input (default: exact oracle)")
    size.add_argument("--lazy", action="store_true", help="hold with probability 1/2 (bipartite graphs)")
    size.add_argument("--c-burn", dest="c_burn", type=float)
    size.add_argument("--c-plan", dest="c_plan", type=float)

    ver = sub.add_parser("verify", parents=[common], argument_default=argparse.SUPPRESS,
                         help="exact oracle values against the family bounds")
    ver.add_argument("--mmax", dest="m_max", type=int)
    ver.add_argument("--lam", type=float)
    return parser


# -- config resolution --------------------------------------------------


def _load_config_file(path: Path) -> Dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError("INVALID_VALUE", f"cannot read config file {path}: {e}", field="config")
    if not isinstance(data, dict):
        raise ConfigError("INVALID_VALUE", "config file must hold a JSON object", field="config")
    return data


def _require(config: ExperimentConfig, name: str) -> Any:
    value = getattr(config, name)
    if value is None:
        raise ConfigError("MISSING_FIELD", f"--{name.replace('_', '-')} is required for {config.subcommand}", field=name)
    return value


def resolve_config(flags: Dict[str, Any], base: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Merge config-file entries with flags (flags win), validate, fill per-subcommand defaults"""
    merged = dict(base or {})
    topology = dict(merged.get("topology") or {})
    for key, value in flags.items():
        if key in TOPOLOGY_KEYS:
            topology[key] = str(value) if isinstance(value, Path) else value
        elif isinstance(value, Path):
            merged[key] = str(value)
        else:
            merged[key] = value
    merged["topology"] = topology
    merged["version"] = __version__
    merged.setdefault("threads", settings.threads)

    if "family" not in topology:
        raise ConfigError("MISSING_FIELD", "--family is required", field="family")

    config = ExperimentConfig.model_validate(merged)
    return config.model_copy(update=_defaults(config))


def _defaults(config: ExperimentConfig) -> Dict[str, Any]:
    fill: Dict[str, Any] = {}

    def default(name: str, value: Any) -> None:
        if getattr(config, name) is None:
            fill[name] = value

    if config.subcommand == "simulate-density":
        default("trials", 1)
        default("algorithm", "encounter")
    elif config.subcommand == "recollision-profile":
        default("m_max", 64)
        default("trials", 10_000)
        default("mode", "pair")
    elif config.subcommand == "netsize":
        default("eps", 0.2)
        default("delta", 0.1)
        default("rounds", 64)
        default("seed_vertex", 0)
        default("c_burn", settings.c_burn)
        default("c_plan", settings.c_plan)
        delta = config.delta if config.delta is not None else 0.1
        default("boost_runs", 2 * math.ceil(math.log(1.0 / delta)) + 1)
    elif config.subcommand == "verify":
        default("m_max", 64)
    return fill


# -- subcommands ----------------------------------------------------------


def simulate_density(config: ExperimentConfig, topology: Topology) -> str:
    sim = SimConfig(
        topology=topology,
        agents=_require(config, "agents"),
        rounds=_require(config, "rounds"),
        seed=config.seed,
        algorithm=config.algorithm,
        label_fraction=config.label_frac,
    )
    results = run_trials(sim, config.trials, threads=config.threads)
    frame = estimates_frame(results)

    summary = summarize_estimates(frame, sim.density)
    logger.info(f"✅ Grand mean d̃ = {summary['grand_mean']:.6g} (d = {sim.density:.6g})")
    payload = {"density": sim.density, "summary": summary, "rows": frame.to_dict(orient="records")}
    return write_output(config, frame=frame, payload=payload)


def recollision_profile(config: ExperimentConfig, topology: Topology) -> str:
    measure = empirical_beta_profile if config.mode == "pair" else empirical_equalization_profile
    profile = measure(topology, config.m_max, config.trials, config.seed, threads=config.threads)
    frame = profile.to_frame().drop(columns=["trials"])

    if topology.node_count <= settings.oracle_max_nodes:
        frame["oracle_value"] = averaged_oracle_profile(topology, config.m_max, mode=config.mode).values
    try:
        parity = 2 if is_bipartite(topology) else 1
        frame["theoretical_value"] = [
            family_bound(topology, m, parity_classes=parity) for m in range(config.m_max + 1)
        ]
    except TopologyError as e:
        logger.warning(f"⚠️ No theoretical column: {e}")

    payload = {"trials": config.trials, "mode": config.mode, "rows": frame.to_dict(orient="records")}
    return write_output(config, frame=frame, payload=payload)


def netsize(config: ExperimentConfig, topology: Topology) -> str:
    result = run_pipeline(
        topology,
        eps=config.eps,
        delta=config.delta,
        rounds=config.rounds,
        boost_runs=config.boost_runs,
        seed=config.seed,
        seed_vertex=config.seed_vertex,
        lam=config.lam,
        big_b=config.big_b,
        walks=config.walks,
        lazy=config.lazy,
        c_burn=config.c_burn,
        c_plan=config.c_plan,
        threads=config.threads,
    )

    # report C and D of the run that supplied the median
    finite = [r for r in result.per_run if r["A_tilde"] is not None]
    middle = min(finite, key=lambda r: abs(r["A_tilde"] - result.estimate)) if finite else result.per_run[0]
    payload = {
        "A_tilde": result.estimate,
        "C": middle["C"],
        "D": middle["D"],
        "n": result.walks,
        "M": result.burn_in,
        "t": result.rounds,
        "lam": result.lam,
        "big_b": result.big_b,
        "lazy": result.lazy,
        "c_burn": result.c_burn,
        "c_plan": result.c_plan,
        "queries": result.queries,
        "per_run": result.per_run,
    }

    frame = pd.DataFrame([
        {
            "run": i,
            "A_tilde": np.nan if r["A_tilde"] is None else r["A_tilde"],
            "C": r["C"],
            "D": r["D"],
            "neighborhood_queries": r["queries"]["neighborhood"],
            "degree_queries": r["queries"]["degree"],
        }
        for i, r in enumerate(result.per_run)
    ])
    return write_output(config, frame=frame, payload=payload)


def verify(config: ExperimentConfig, topology: Topology) -> str:
    frame = verify_rows(topology, config.m_max, lam=config.lam)
    payload = {"all_satisfied": bool(frame["bound_satisfied"].all()), "rows": frame.to_dict(orient="records")}
    return write_output(config, frame=frame, payload=payload)


HANDLERS = {
    "simulate-density": simulate_density,
    "recollision-profile": recollision_profile,
    "netsize": netsize,
    "verify": verify,
}


def execute(config: ExperimentConfig) -> str:
    """Run a resolved config; returns the rendered output"""
    topology = build_topology(config.topology)
    logger.info(f"🔄 {config.subcommand} on {topology.describe()} (seed {config.seed})")
    return HANDLERS[config.subcommand](config, topology)


def run_command(argv: Optional[Sequence[str]] = None) -> int:
    """Parse, resolve, execute. Exit status: 0 ok, 1 invalid input, 2 internal error."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        flags = vars(build_parser().parse_args(argv))
        if "log_level" in flags:
            logging.getLogger().setLevel(flags["log_level"])

        base: Dict[str, Any] = {}
        if "config" in flags:
            base = _load_config_file(flags["config"])
        flags = {k: v for k, v in flags.items() if k not in LOCAL_KEYS}

        config = resolve_config(flags, base)
        text = execute(config)
        if config.out is None:
            sys.stdout.write(text)
        return 0

    except SystemExit as e:
        # --help / --version
        return int(e.code or 0)
    except CensusError as e:
        logger.error(f"❌ {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ValidationError as e:
        fields = ", ".join(".".join(str(p) for p in err["loc"]) for err in e.errors())
        logger.error(f"❌ Invalid configuration ({fields}): {e}")
        print(f"error: invalid value for {fields}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.error(f"❌ Internal error: {e}", exc_info=True)
        return 2


def main() -> int:
    try:
        logging.basicConfig(level=settings.log_level.upper())
        validate_settings()
    except ValueError as e:
        print(f"error: invalid settings: {e}", file=sys.stderr)
        return 1
    return run_command()


if __name__ == "__main__":
    sys.exit(main())

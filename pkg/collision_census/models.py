from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_validator

TopologyFamily = Literal[
    "torus2d",
    "torus_kd",
    "ring",
    "hypercube",
    "explicit",
    "complete",
    "star",
    "random_regular",
]

Subcommand = Literal["simulate-density", "recollision-profile", "netsize", "verify"]


class TopologySpec(BaseModel):
    """Family tag plus the parameters that family needs"""

    model_config = ConfigDict(extra="forbid")

    family: TopologyFamily
    side: Optional[int] = None          # square tori / ring length
    sides: Optional[List[int]] = None   # per-dimension side lengths
    dims: Optional[int] = None          # k for tori and hypercubes
    nodes: Optional[int] = None         # complete graphs, random regular graphs
    degree: Optional[int] = None        # random regular graphs
    graph_seed: Optional[int] = None    # random regular graphs
    edge_file: Optional[Path] = None    # explicit graphs
    adjacency: Optional[List[List[int]]] = None


class ExperimentConfig(BaseModel):
    """Fully resolved experiment configuration, embedded in every output"""

    model_config = ConfigDict(extra="forbid")

    subcommand: Subcommand
    topology: TopologySpec
    seed: int = 0
    threads: int = Field(default=1, ge=1)
    out: Optional[Path] = None
    format: Literal["csv", "json"] = "csv"
    version: str = "1.0.0"

    # Algorithm parameters; the ones a subcommand does not use stay None
    agents: Optional[int] = None
    rounds: Optional[int] = None
    trials: Optional[int] = None
    algorithm: Optional[Literal["encounter", "independent", "frequency"]] = None
    label_frac: Optional[float] = None
    m_max: Optional[int] = None
    mode: Optional[Literal["pair", "equalization"]] = None
    eps: Optional[float] = None
    delta: Optional[float] = None
    boost_runs: Optional[int] = None
    seed_vertex: Optional[int] = None
    walks: Optional[int] = None
    lam: Optional[float] = None
    big_b: Optional[float] = None
    lazy: bool = False
    c_burn: Optional[float] = None
    c_plan: Optional[float] = None

    @field_validator("label_frac")
    @classmethod
    def _fraction_in_unit_interval(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not 0.0 <= value <= 1.0:
            raise ValueError("label_frac must lie in [0, 1]")
        return value

    @field_validator("eps", "delta")
    @classmethod
    def _open_unit_interval(cls, value: Optional[float], info: ValidationInfo) -> Optional[float]:
        if value is not None and not 0.0 < value < 1.0:
            raise ValueError(f"{info.field_name} must lie in (0, 1)")
        return value

    def to_text(self) -> str:
        """Canonical textual form (JSON in field order)"""
        return self.model_dump_json()

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        return cls.model_validate_json(text)

    def embedded(self) -> Dict[str, Any]:
        """JSON-ready dict of the resolved config"""
        return self.model_dump(mode="json")

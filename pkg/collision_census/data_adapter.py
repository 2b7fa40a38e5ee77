"""
Data Adapter - result tables to CSV / JSON files with the run config embedded
"""
import io
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from collision_census import __version__
from collision_census.models import ExperimentConfig

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def to_plain(value: Any) -> Any:
    """
    Convert numpy scalars/arrays and NaN into JSON-safe Python values

    Args:
        value: Anything produced by the simulators

    Returns:
        Plain dicts, lists, ints, floats, strings, bools or None
    """
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return None if math.isnan(value) or math.isinf(value) else value
    return value


def _config_line(config: ExperimentConfig) -> str:
    return json.dumps(config.embedded(), sort_keys=True, separators=(",", ":"))


def render_csv(frame: pd.DataFrame, config: ExperimentConfig) -> str:
    buffer = io.StringIO()
    buffer.write(f"# version: {__version__}\n")
    buffer.write(f"# config: {_config_line(config)}\n")
    frame.to_csv(buffer, index=False, float_format="%.17g", lineterminator="\n")
    return buffer.getvalue()


def render_json(payload: Dict[str, Any], config: ExperimentConfig) -> str:
    document = {"version": __version__, "config": config.embedded()}
    document.update(to_plain(payload))
    return json.dumps(document, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_output(
    config: ExperimentConfig,
    frame: Optional[pd.DataFrame] = None,
    payload: Optional[Dict[str, Any]] = None,
) -> str:
    """
    Render a result in the configured format and write it to ``config.out``

    CSV output needs ``frame``; JSON uses ``payload`` when given, else the
    frame's rows. Returns the rendered text (also when no path is set).
    """
    if config.format == "csv":
        if frame is None:
            frame = pd.DataFrame([payload or {}])
        text = render_csv(frame, config)
    else:
        if payload is None:
            payload = {"rows": frame.to_dict(orient="records") if frame is not None else []}
        text = render_json(payload, config)

    if config.out is not None:
        path = Path(config.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        logger.info(f"✅ Wrote {config.format.upper()} output to {path}")
    return text


def read_csv_output(path: PathLike) -> Tuple[pd.DataFrame, ExperimentConfig]:
    """Load a CSV written by write_output, returning the table and its embedded config"""
    lines = Path(path).read_text(encoding="utf-8").splitlines(keepends=True)
    header = [line for line in lines if line.startswith("# ")]
    body = "".join(line for line in lines if not line.startswith("# "))

    config_text = next(line for line in header if line.startswith("# config: "))
    config = ExperimentConfig.model_validate_json(config_text[len("# config: "):])
    return pd.read_csv(io.StringIO(body)), config


def read_json_output(path: PathLike) -> Tuple[Dict[str, Any], ExperimentConfig]:
    document = json.loads(Path(path).read_text(encoding="utf-8"))
    config = ExperimentConfig.model_validate(document.pop("config"))
    return document, config

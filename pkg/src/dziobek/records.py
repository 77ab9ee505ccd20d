"""Text records read and written by the command line tool.

Records are JSON objects.  Floats are written with ``repr`` semantics
(shortest string that round-trips), so rereading is lossless.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .geometry import PAIR_NAMES, PlanarConfiguration

DEFAULT_TIMESTAMP = "1970-01-01T00:00:00Z"


class RecordError(ValueError):
    pass


@dataclass(frozen=True)
class RunManifest:
    command: str
    parameters: dict
    seed: int
    tool_version: str = __version__
    timestamp: str = DEFAULT_TIMESTAMP

    def as_dict(self) -> dict:
        return asdict(self)


def _plain(obj: Any) -> Any:
    """Convert numpy scalars/arrays and tuples to JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        if not np.isfinite(value):
            return repr(value)
        return value
    return obj


def dumps(record: dict) -> str:
    return json.dumps(_plain(record), indent=2, sort_keys=False, allow_nan=False) + "\n"


def configuration_record(config: PlanarConfiguration, label: Optional[str] = None) -> dict:
    rec = {}
    label = label if label is not None else config.label
    if label:
        rec["label"] = label
    rec["masses"] = config.masses.tolist()
    rec["positions"] = config.positions.tolist()
    return rec


def parse_configuration(data: dict) -> PlanarConfiguration:
    try:
        masses = [float(m) for m in data["masses"]]
        positions = [[float(x), float(y)] for x, y in data["positions"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise RecordError(f"malformed configuration record: {exc!r}") from exc
    if len(masses) != 4 or len(positions) != 4:
        raise RecordError("configuration needs exactly 4 masses and 4 positions")
    label = data.get("label", "")
    if not isinstance(label, str):
        raise RecordError("label must be a string")
    try:
        return PlanarConfiguration(positions, masses, label)
    except ValueError as exc:
        raise RecordError(str(exc)) from exc


def read_configuration(path) -> PlanarConfiguration:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise RecordError(f"cannot read configuration from {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise RecordError("configuration record must be a JSON object")
    return parse_configuration(data)


def solution_record(solution, manifest: RunManifest, diagnostics: Optional[dict] = None, **extra) -> dict:
    rec = configuration_record(solution.configuration, label=f"{solution.method} alpha={solution.alpha!r}")
    rec.update(
        {
            "alpha": solution.alpha,
            "method": solution.method,
            "sdv": solution.sdv.as_array().tolist(),
            "areas": solution.areas.as_array().tolist(),
            "nu": solution.multipliers.nu,
            "mu": solution.multipliers.mu,
            "lambda_cc": solution.multipliers.lambda_cc,
            "residuals": {"position": solution.residual_position, "dziobek": solution.residual_dziobek},
            "iterations": solution.iterations,
            "class": solution.geometry_class,
            "flags": list(solution.flags),
            "diagnostics": {k: v.as_dict() for k, v in (diagnostics or {}).items()},
        }
    )
    rec.update(extra)
    rec["manifest"] = manifest.as_dict()
    return rec


SWEEP_COLUMNS = (
    "alpha", *PAIR_NAMES, "d1", "d2", "d3", "d4", "nu", "mu", "lambda_cc",
    "residual_pos", "residual_dzb", "iters", "class", "status",
)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def sweep_rows(records) -> list[list[str]]:
    rows = []
    for rec in records:
        sol = rec.solution
        if sol is None:
            values = [rec.alpha] + [None] * (len(SWEEP_COLUMNS) - 2) + [rec.status]
        else:
            values = [
                rec.alpha,
                *sol.sdv.as_array(),
                *sol.areas.as_array(),
                sol.multipliers.nu,
                sol.multipliers.mu,
                sol.multipliers.lambda_cc,
                sol.residual_position,
                sol.residual_dziobek,
                sol.iterations,
                sol.geometry_class,
                rec.status,
            ]
        rows.append([_cell(v) for v in values])
    return rows

"""JSON and CSV readers and writers for chains, densities, params and reports."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .action import DiscretePath
from .chain import MarkovChain, build_chain
from .errors import InvalidParams, NegativeInput, NotStrictlyPositive
from .flow import FlowTrajectory
from .operators import TransportParams, make_params


class InputFormatError(ValueError):
    """A file exists but does not have the expected structure."""


def _load_json(path) -> Any:
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputFormatError(f"{path}: invalid JSON ({exc})") from exc


def _real_array(values, path, key) -> np.ndarray:
    try:
        arr = np.array(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputFormatError(f"{path}: '{key}' must contain only numbers") from exc
    if not np.all(np.isfinite(arr)):
        raise InputFormatError(f"{path}: '{key}' contains non-finite values")
    return arr


def chain_from_dict(data: dict, source: str = "<chain>") -> MarkovChain:
    if not isinstance(data, dict) or "kernel" not in data:
        raise InputFormatError(f"{source}: expected an object with a 'kernel' entry")
    kernel = _real_array(data["kernel"], source, "kernel")
    if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1] or kernel.shape[0] == 0:
        raise InputFormatError(f"{source}: 'kernel' must be a non-empty square matrix")
    labels = data.get("labels")
    if labels is not None and (not isinstance(labels, list) or len(labels) != kernel.shape[0]):
        raise InputFormatError(f"{source}: 'labels' must be a list with one entry per state")
    return build_chain(kernel, labels=labels)


def load_chain(path) -> MarkovChain:
    return chain_from_dict(_load_json(path), str(path))


def density_from_dict(data: dict, n: Optional[int] = None, source: str = "<density>",
                      strict: bool = False) -> np.ndarray:
    """Density values; ``strict`` demands every entry be positive."""
    if not isinstance(data, dict) or "values" not in data:
        raise InputFormatError(f"{source}: expected an object with a 'values' entry")
    values = _real_array(data["values"], source, "values")
    if values.ndim != 1:
        raise InputFormatError(f"{source}: 'values' must be a flat list")
    if n is not None and values.size != n:
        raise InputFormatError(f"{source}: expected {n} values, got {values.size}")
    bad = np.flatnonzero(values <= 0 if strict else values < 0)
    if bad.size:
        i = int(bad[0])
        if strict:
            raise NotStrictlyPositive(f"{source}: density value {float(values[i]):g} at index {i} is not positive")
        raise NegativeInput(f"{source}: negative density value {float(values[i]):g} at index {i}")
    return values


def load_density(path, n: Optional[int] = None, strict: bool = False) -> np.ndarray:
    return density_from_dict(_load_json(path), n, str(path), strict)


def params_from_dict(data: dict, chain: MarkovChain, source: str = "<params>") -> TransportParams:
    if not isinstance(data, dict):
        raise InputFormatError(f"{source}: expected a JSON object")
    missing = [k for k in ("a", "b") if k not in data]
    if missing:
        raise InputFormatError(f"{source}: missing {', '.join(missing)}")
    p = data.get("p")
    p = np.ones(chain.n) if p is None else _real_array(p, source, "p")
    try:
        a, b = float(data["a"]), float(data["b"])
    except (TypeError, ValueError) as exc:
        raise InvalidParams(f"{source}: a and b must be numbers") from exc
    return make_params(a, b, p, chain, normalize=bool(data.get("normalize_p", False)))


def load_params(path, chain: MarkovChain) -> TransportParams:
    return params_from_dict(_load_json(path), chain, str(path))


def to_jsonable(obj):
    """Plain Python structure with NaN and infinities replaced by None."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def dumps(report) -> str:
    return json.dumps(to_jsonable(report), indent=2, sort_keys=True) + "\n"


def write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def _rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def path_csv(path: DiscretePath) -> str:
    """One row per time node: ``t, mu_1..mu_N, h``.

    ``h`` at a node is the source rate of the interval that starts there;
    the last node repeats the final interval's rate.
    """
    n = path.measures.shape[1]
    header = ["t"] + [f"mu_{i + 1}" for i in range(n)] + ["h"]
    h = np.append(path.sources, path.sources[-1])
    rows = (np.concatenate([[t], m, [hk]]) for t, m, hk in zip(path.times, path.measures, h))
    return _rows_to_csv(header, rows)


def trajectory_csv(traj: FlowTrajectory) -> str:
    """``t, rho_1..rho_N, entropy, grad_norm_sq, min_state, mass``."""
    n = traj.states.shape[1]
    header = ["t"] + [f"rho_{i + 1}" for i in range(n)] + ["entropy", "grad_norm_sq", "min_state", "mass"]
    rows = (np.concatenate([[t], s, [e, g, m, w]])
            for t, s, e, g, m, w in zip(traj.times, traj.states, traj.entropy, traj.grad_norm_sq,
                                         traj.min_state, traj.mass))
    return _rows_to_csv(header, rows)

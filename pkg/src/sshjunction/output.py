"""Plain-text writers for time series, sweep tables and JSON summaries.

Floats are written with ``repr`` precision and no timestamps are recorded,
so rerunning a command with the same configuration reproduces every file
byte for byte.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .observables import CSV_COLUMNS

ERROR_COLUMNS = ("jL_err", "jR_err", "qL_err", "qR_err", "norm")
TIMESERIES_COLUMNS = CSV_COLUMNS + ERROR_COLUMNS
SWEEP_COLUMNS = ("value", "q_L", "q_R", "q_diff", "q_diff_stderr", "q_sum", "q_sum_stderr",
                 "eta", "eta_stderr", "n_traj", "status")


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "nan" if math.isnan(x) else repr(x)


def _header(command: str, config_hash: str, base_seed: int, extra: dict | None = None) -> str:
    items = {"version": __version__, "command": command, "config_hash": config_hash, "base_seed": base_seed}
    items.update(extra or {})
    return "# sshjunction " + " ".join(f"{k}={_fmt(v)}" for k, v in items.items())


def _write_table(path, header: str, columns, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [header, ",".join(columns)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def timeseries_table(summary) -> tuple[list, np.ndarray]:
    """Columns and values of an ensemble-mean time series (superset schema)."""
    m, s = summary.mean, summary.stderr
    data = [summary.times, m["field"], m["j_L"], m["j_R"], m["q_L"], m["q_R"],
            s["j_L"], s["j_R"], s["q_L"], s["q_R"], m["norm"]]
    columns = list(TIMESERIES_COLUMNS)
    if "levels" in m:
        for k in range(m["levels"].shape[1]):
            columns.append(f"eps_{k + 1}")
            data.append(m["levels"][:, k])
    return columns, np.column_stack(data)


def write_timeseries(path, summary, command: str, config_hash: str, base_seed: int, extra=None):
    columns, values = timeseries_table(summary)
    return _write_table(path, _header(command, config_hash, base_seed, {"n_traj": summary.n_traj, **(extra or {})}),
                        columns, values.tolist())


def write_sweep(path, rows: list[dict], variable: str, config_hash: str, base_seed: int):
    table = [[row.get(c, math.nan) for c in SWEEP_COLUMNS] for row in rows]
    return _write_table(path, _header("sweep", config_hash, base_seed, {"variable": variable}),
                        SWEEP_COLUMNS, table)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return None if not math.isfinite(x) else float(x)
    return x


def write_json(path, payload: dict):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable({"version": __version__, **payload}), indent=2, sort_keys=True) + "\n")
    return path


def read_timeseries(path):
    """Columns and array of a time-series file written by ``write_timeseries``."""
    lines = Path(path).read_text().splitlines()
    columns = lines[1].split(",")
    return columns, np.loadtxt(lines[2:], delimiter=",", ndmin=2)

"""CSV writers with fixed column sets and round-trippable number formatting."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

SCHEMAS = {
    "trajectories": ("path_id", "step", "t", "scheme", "y"),
    "stability": ("scheme", "delta", "T", "n_paths", "frac_below", "frac_diverged", "q50", "q99"),
    "convergence": ("scheme", "delta", "l2_error", "fitted_order", "r2"),
    "decomposition": ("scheme", "delta", "y", "phi1", "neg_kappa1", "holds", "phi2_mean",
                      "phi2_stderr"),
    "integral-bound": ("c", "delta", "r", "empirical", "bound"),
    "positivity": ("scheme", "delta", "T", "n_paths", "violation_fraction", "sign_changes"),
    "moments": ("scheme", "p", "delta", "T", "n_paths", "estimate", "stderr"),
    "difference": ("delta", "step", "t", "difference"),
}


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    return str(value)


def write_csv(path, schema: str, rows) -> Path:
    """Write ``rows`` (mappings keyed by column name) with the named schema's header."""
    columns = SCHEMAS[schema]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row[c]) for c in columns])
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def trajectory_rows(scheme_name: str, times: np.ndarray, traj: np.ndarray):
    for pid in range(traj.shape[0]):
        for n in range(traj.shape[1]):
            yield {"path_id": pid, "step": n, "t": times[n], "scheme": scheme_name,
                   "y": traj[pid, n]}

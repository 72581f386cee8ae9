"""Dataset ingestion and artifact serialization.

All writers are deterministic: floats go out at full shortest-round-trip
precision, JSON keys are sorted, and nothing timestamps itself.  Chains are
stored on the natural parameter scale so a written chain reloads to exactly
the same draw matrix.
"""

import csv
import json
import math
import os

import numpy as np

from .errors import DataError
from .inference import Chain
from .transform import Series


def load_series(path):
    """Read a positive-valued series from a headered CSV file.

    Accepts a single value column or (time, value) columns; the value is the
    last column.  Errors name the 1-based file line (header is line 1).
    """
    if not os.path.exists(path):
        raise DataError(f"data file not found: {path}")
    values = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows:
        raise DataError(f"empty data file: {path}")
    ncol = len(rows[0])
    if ncol not in (1, 2):
        raise DataError(
            f"expected 1 or 2 columns (value, or time,value), got {ncol}"
        )
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(cell.strip() == "" for cell in row):
            continue
        cell = row[-1].strip()
        try:
            val = float(cell)
        except ValueError:
            raise DataError(
                f"non-numeric value {cell!r} at line {lineno} of {path}"
            )
        if not math.isfinite(val) or val <= 0.0:
            raise DataError(
                f"value must be finite and > 0 at line {lineno} of {path}"
            )
        values.append(val)
    if not values:
        raise DataError(f"no data rows in {path}")
    return Series(np.asarray(values))


def fmt(value):
    """Full-precision text for a float, stable across runs."""
    return repr(float(value))


def write_csv(path, header, rows):
    """RFC-4180 CSV with header; floats at full precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([
                fmt(cell) if isinstance(cell, (float, np.floating)) else cell
                for cell in row
            ])


def jsonable(obj):
    """Recursively convert numpy scalars/arrays and NaN for strict JSON."""
    if isinstance(obj, dict):
        return {k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return None if math.isnan(v) else v
    return obj


def write_json(path, obj):
    """Stable-key, indented JSON with trailing newline."""
    with open(path, "w") as fh:
        json.dump(jsonable(obj), fh, sort_keys=True, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Chain round trip: CSV of draws plus a JSON sidecar of sampler metadata.
# ---------------------------------------------------------------------------

def save_chain(chain, csv_path, meta_path):
    write_csv(csv_path, chain.param_names, chain.draws)
    write_json(meta_path, {
        "param_names": chain.param_names,
        "draws": chain.n_draws,
        "acceptance_count": chain.acceptance_count,
        "proposals": chain.proposals,
        "acceptance_rate": chain.acceptance_rate,
        "proposal_scale": chain.proposal_scale,
        "burn_in": chain.burn_in,
        "thin": chain.thin,
        "seed": chain.seed,
        "lambda_fixed": chain.lambda_fixed,
    })


def load_chain(csv_path, meta_path):
    with open(meta_path) as fh:
        meta = json.load(fh)
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows:
        raise DataError(f"empty chain file: {csv_path}")
    header = rows[0]
    if header != meta["param_names"]:
        raise DataError("chain CSV header does not match its metadata")
    try:
        draws = np.array([[float(c) for c in row] for row in rows[1:] if row])
    except ValueError as exc:
        raise DataError(f"bad draw value in {csv_path}: {exc}")
    if draws.ndim != 2 or draws.shape[0] != meta["draws"]:
        raise DataError("chain CSV shape does not match its metadata")
    return Chain(
        draws=draws,
        param_names=list(header),
        acceptance_count=int(meta["acceptance_count"]),
        proposals=int(meta["proposals"]),
        proposal_scale=float(meta["proposal_scale"]),
        burn_in=int(meta["burn_in"]),
        thin=int(meta["thin"]),
        seed=int(meta["seed"]),
        lambda_fixed=meta.get("lambda_fixed"),
    )


def summary_to_dict(summary):
    """FitSummary as a JSON-ready mapping (one entry per parameter)."""
    params = []
    for j, name in enumerate(summary.param_names):
        params.append({
            "name": name,
            "mean": summary.posterior_mean[j],
            "sd": summary.posterior_sd[j],
            "hpd_lower": summary.hpd_lower[j],
            "hpd_upper": summary.hpd_upper[j],
            "geweke_z": summary.geweke_z[j],
        })
    return {
        "parameters": params,
        "hpd_level": summary.hpd_level,
        "acceptance_rate": summary.acceptance_rate,
    }

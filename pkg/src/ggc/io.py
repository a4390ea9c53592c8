"""Strict JSON configuration loading and plot-ready CSV output."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ParseError, SchemaError
from .montecarlo import McConfig, McSummary
from .var import TimeSeries, VarModel, validate_and_build_model

MODEL_KEYS = {"n", "p", "coeffs", "sigma"}
TOP_KEYS = MODEL_KEYS | {"experiment"}
EXPERIMENT_KEYS = {
    "n_realisations", "T", "p_fit", "n_freq", "alpha_threshold",
    "ci_mass", "n_null", "master_seed", "estimators",
}
SPECTRAL_COLUMNS = ["source", "target", "freq", "exact", "median", "ci_lo", "ci_hi", "threshold"]
SWEEP_COLUMNS = ["source", "target", "T", "estimator", "exact", "median", "bias", "mad"]


def fmt(x) -> str:
    """17 significant digits: enough for every double to round-trip."""
    return f"{float(x):.17g}"


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _matrix(v, n, name):
    if not (isinstance(v, list) and len(v) == n and all(isinstance(r, list) and len(r) == n for r in v)):
        raise SchemaError(name, f"expected a {n}x{n} row-major matrix")
    if not all(_is_num(x) for r in v for x in r):
        raise SchemaError(name, "matrix entries must be numbers")
    return v


def parse_model(doc) -> VarModel:
    if not isinstance(doc, dict):
        raise SchemaError("<root>", "expected a JSON object")
    unknown = set(doc) - TOP_KEYS
    if unknown:
        raise SchemaError(sorted(unknown)[0], "unknown key")
    for key in sorted(MODEL_KEYS):
        if key not in doc:
            raise SchemaError(key, "missing")
    n, p = doc["n"], doc["p"]
    if not _is_int(n) or n < 1:
        raise SchemaError("n", "must be a positive integer")
    if not _is_int(p) or p < 1:
        raise SchemaError("p", "must be a positive integer")
    coeffs = doc["coeffs"]
    if not isinstance(coeffs, list) or len(coeffs) != p:
        raise SchemaError("coeffs", f"expected a list of p={p} matrices")
    coeffs = [_matrix(a, n, f"coeffs[{k}]") for k, a in enumerate(coeffs)]
    sigma = _matrix(doc["sigma"], n, "sigma")
    return validate_and_build_model(coeffs, sigma)


def parse_experiment(block, model: VarModel, **overrides) -> McConfig:
    block = dict(block or {})
    if not isinstance(block, dict):
        raise SchemaError("experiment", "expected a JSON object")
    unknown = set(block) - EXPERIMENT_KEYS
    if unknown:
        raise SchemaError(f"experiment.{sorted(unknown)[0]}", "unknown key")
    for key in ("n_realisations", "p_fit", "n_freq", "n_null"):
        if key in block and (not _is_int(block[key]) or block[key] < 1):
            raise SchemaError(f"experiment.{key}", "must be a positive integer")
    if "master_seed" in block and not _is_int(block["master_seed"]):
        raise SchemaError("experiment.master_seed", "must be an integer")
    for key in ("alpha_threshold", "ci_mass"):
        if key in block and (not _is_num(block[key]) or not 0 < block[key] < 1):
            raise SchemaError(f"experiment.{key}", "must lie strictly between 0 and 1")
    if "T" in block:
        T = block["T"]
        if _is_int(T) and T >= 1:
            pass
        elif isinstance(T, list) and T and all(_is_int(t) and t >= 1 for t in T):
            block["T"] = tuple(T)
        else:
            raise SchemaError("experiment.T", "must be a positive integer or a non-empty list of them")
    if "estimators" in block:
        est = block["estimators"]
        if not isinstance(est, list) or not est or any(e not in ("single", "dual") for e in est):
            raise SchemaError("experiment.estimators", "must be a non-empty subset of [\"single\", \"dual\"]")
        block["estimators"] = tuple(est)
    block.update({k: v for k, v in overrides.items() if v is not None})
    return McConfig(model=model, **block)


def load_json(path):
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", exc.lineno) from None


def load_config(path, **overrides):
    """Load a model config (with optional ``experiment`` block).

    Returns ``(model, McConfig)``.
    """
    doc = load_json(path)
    model = parse_model(doc)
    return model, parse_experiment(doc.get("experiment"), model, **overrides)


def load_timeseries_csv(path) -> TimeSeries:
    """Headerless CSV, one row per time step, one column per channel."""
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return TimeSeries(data.T)


@dataclass
class RunManifest:
    config: dict
    version: str = __version__
    duration_s: float = 0.0
    failures: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)

    def write(self, path):
        doc = {
            "config": self.config,
            "version": self.version,
            "duration_s": self.duration_s,
            "failures": self.failures,
            "outputs": [str(p) for p in self.outputs],
        }
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_spectral_csv(summary: McSummary, path):
    if summary.kind != "spectral":
        raise ValueError("not a spectral summary")
    rows = []
    for (j, i) in sorted(summary.pairs):
        thr = summary.threshold.get((j, i), float("nan"))
        for k, w in enumerate(summary.grid):
            rows.append([str(j), str(i), fmt(w), fmt(summary.exact[(j, i)][k]), fmt(summary.median[(j, i)][k]),
                         fmt(summary.ci_lo[(j, i)][k]), fmt(summary.ci_hi[(j, i)][k]), fmt(thr)])
    _write_rows(path, SPECTRAL_COLUMNS, rows)
    return Path(path)


def write_sweep_csv(summary: McSummary, path):
    if summary.kind != "sweep":
        raise ValueError("not a sweep summary")
    rows = sorted(summary.sweep, key=lambda r: (r["source"], r["target"], r["T"], r["estimator"]))
    _write_rows(path, SWEEP_COLUMNS, [
        [str(r["source"]), str(r["target"]), str(r["T"]), r["estimator"],
         fmt(r["exact"]), fmt(r["median"]), fmt(r["bias"]), fmt(r["mad"])]
        for r in rows
    ])
    return Path(path)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))

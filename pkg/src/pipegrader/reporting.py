"""Report files (JSON + plot-ready CSV), estimator comparison, run manifest."""
from __future__ import annotations

import csv
import json
import os
from typing import Mapping, Sequence

import numpy as np

from .attribution import ContributionReport
from .propagation import NaiveErrorSextuple, PropagationSummary


def write_json(path: str, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_contribution_report(report: ContributionReport, json_path: str, csv_path: str) -> None:
    write_json(json_path, report.to_json())
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component", "mean", "std", "coverage"])
        for entry in report.entries:
            writer.writerow([entry.component,
                             "" if entry.contribution is None else repr(entry.contribution),
                             repr(entry.std), repr(entry.coverage)])


_PROP_FIELDS = tuple(NaiveErrorSextuple.FIELDS) + (
    "delta_e1", "delta_e2", "delta_e3", "e_direct", "e_propagation", "gamma")


def write_propagation_report(summaries: Sequence[PropagationSummary], scope: str,
                             json_path: str, csv_path: str) -> None:
    payload = {
        "kind": "propagation-report",
        "scope": scope,
        "components": [s.to_json() for s in summaries],
    }
    write_json(json_path, payload)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["component"]
        for name in _PROP_FIELDS:
            header.extend([name, f"{name}_std"])
        header.append("flags")
        writer.writerow(header)
        for s in summaries:
            row = [s.component]
            for name in _PROP_FIELDS:
                mean = s.means.get(name)
                std = s.stds.get(name)
                row.append("" if mean is None else repr(mean))
                row.append("" if std is None else repr(std))
            row.append(";".join(s.flags))
            writer.writerow(row)


def spearman(a: Sequence[float], b: Sequence[float]) -> float:
    """Spearman rank correlation with average ranks for ties."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) != len(b) or len(a) < 2:
        raise ValueError("spearman needs two equal-length sequences of >= 2 values")

    def ranks(x: np.ndarray) -> np.ndarray:
        order = np.argsort(x, kind="stable")
        r = np.empty(len(x))
        r[order] = np.arange(1, len(x) + 1)
        for value in np.unique(x):
            mask = x == value
            if mask.sum() > 1:
                r[mask] = r[mask].mean()
        return r

    ra, rb = ranks(a), ranks(b)
    sa, sb = ra.std(), rb.std()
    if sa == 0.0 or sb == 0.0:
        return 1.0 if sa == sb == 0.0 else 0.0
    return float(((ra - ra.mean()) * (rb - rb.mean())).mean() / (sa * sb))


def _report_values(payload: Mapping) -> tuple[str, dict[str, float]]:
    """(scope, component -> primary statistic) of a loaded report file."""
    kind = payload.get("kind")
    if kind == "contribution-report":
        values = {e["component"]: e["contribution"] for e in payload["entries"]}
        return payload["scope"], values
    if kind == "propagation-report":
        values = {c["component"]: c["means"]["delta_e1"] for c in payload["components"]}
        return payload["scope"], values
    raise ValueError(f"unsupported report kind {kind!r}")


def compare_reports(paths: Sequence[str]) -> dict:
    """Absolute per-component differences and Spearman rho vs the first report."""
    if len(paths) < 2:
        raise ValueError("compare needs at least two report files")
    loaded = []
    for path in paths:
        with open(path, "r", encoding="utf-8") as fh:
            loaded.append(_report_values(json.load(fh)))
    scope0, ref = loaded[0]
    pairs = []
    for path, (scope, values) in zip(paths[1:], loaded[1:]):
        if scope != scope0:
            raise ValueError(f"scope mismatch: {scope0!r} vs {scope!r} in {path!r}")
        if set(values) != set(ref):
            raise ValueError(f"component mismatch between reports ({path!r})")
        components = sorted(ref)
        diffs = {c: abs(values[c] - ref[c]) for c in components}
        rho = spearman([ref[c] for c in components], [values[c] for c in components])
        pairs.append({"report": path, "diffs": diffs, "spearman": rho})
    return {"kind": "comparison", "scope": scope0, "reference": paths[0], "pairs": pairs}


def scrub_wall_time(obj):
    """Recursively drop wall_time fields; used for byte-determinism checks."""
    if isinstance(obj, dict):
        return {k: scrub_wall_time(v) for k, v in obj.items() if k != "wall_time"}
    if isinstance(obj, list):
        return [scrub_wall_time(v) for v in obj]
    return obj


def write_manifest(out_dir: str, payload: Mapping) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "manifest.json")
    write_json(path, dict(payload))
    return path

"""Agnostic error contributions from a trial ledger.

A component's contribution is the average over its cells of the best loss
achievable inside each cell, minus the overall best loss. Cells are: the
algorithms of a step (whole-pipeline ledger), the full hyperparameter
configurations of one algorithm on a path, or the values of one
hyperparameter on a path. Cell minima are read from the ledger only; for a
full grid this is exact, for stochastic ledgers it is the
estimate-from-trials.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .evaluate import TrialLedger, TrialRecord
from .model import (PathId, PipelineSpec, Restriction, SpecError,
                    enumerate_grid, validate_path)


class CoverageError(ValueError):
    """A required cell has no trials in the ledger."""


@dataclass(frozen=True)
class ContributionEntry:
    component: str
    contribution: float | None
    cell_minima: tuple[tuple[str, float], ...]
    coverage: float
    std: float = 0.0
    per_seed: tuple[float, ...] | None = None

    def to_json(self) -> dict:
        return {
            "component": self.component,
            "contribution": self.contribution,
            "cell_minima": dict(self.cell_minima),
            "coverage": self.coverage,
            "std": self.std,
            "per_seed": None if self.per_seed is None else list(self.per_seed),
        }


@dataclass(frozen=True)
class ContributionReport:
    scope: str  # steps | algorithms | hyperparameters
    entries: tuple[ContributionEntry, ...]
    reference_min: float
    estimator: str
    seeds: int = 1
    path: PathId | None = None

    def entry(self, component: str) -> ContributionEntry:
        for e in self.entries:
            if e.component == component:
                return e
        raise KeyError(component)

    def to_json(self) -> dict:
        return {
            "kind": "contribution-report",
            "scope": self.scope,
            "path": None if self.path is None else list(self.path),
            "reference_min": self.reference_min,
            "estimator": self.estimator,
            "seeds": self.seeds,
            "entries": [e.to_json() for e in self.entries],
        }


def _iter_records(ledger: TrialLedger, keys: Iterable[str] | None,
                  exclude_failed: bool) -> list[TrialRecord]:
    pool = ledger.records.values() if keys is None else [ledger.records[k] for k in keys]
    return [r for r in pool if not (exclude_failed and r.failed)]


def _non_naive_records(records: list[TrialRecord], spec: PipelineSpec) -> list[TrialRecord]:
    naive_ids = {a.id for step in spec.steps for a in step.algorithms if a.is_naive}
    return [r for r in records if not any(a in naive_ids for a in r.config.path)]


def _cells_to_entry(component: str, cells: dict[str, float | None],
                    reference_min: float, allow_partial: bool,
                    describe: str) -> ContributionEntry:
    covered = {label: value for label, value in cells.items() if value is not None}
    if len(covered) < len(cells):
        missing = sorted(label for label, value in cells.items() if value is None)
        if not allow_partial:
            raise CoverageError(f"{describe}: no trials cover cell {missing[0]!r}")
    if not covered:
        return ContributionEntry(component, None, (), 0.0)
    contribution = sum(covered.values()) / len(covered) - reference_min
    return ContributionEntry(
        component=component,
        contribution=contribution,
        cell_minima=tuple(sorted(covered.items())),
        coverage=len(covered) / len(cells),
    )


def contribution_steps(ledger: TrialLedger, spec: PipelineSpec, estimator: str = "grid",
                       allow_partial: bool = False, exclude_failed: bool = False,
                       keys: Iterable[str] | None = None) -> ContributionReport:
    """Per-step contributions over a whole-pipeline ledger.

    For step i, each non-naive algorithm j forms a cell with minimum loss over
    the trials that chose it; the contribution is the cell mean minus the
    ledger's global minimum. Naive algorithms are invisible here.
    """
    records = _non_naive_records(_iter_records(ledger, keys, exclude_failed), spec)
    if not records:
        raise CoverageError("ledger holds no usable whole-pipeline trials")
    reference = min(r.mean_loss for r in records)
    entries = []
    for step in spec.steps:
        cells: dict[str, float | None] = {a.id: None for a in step.non_naive()}
        for r in records:
            algo = r.config.path[step.index]
            if algo in cells:
                best = cells[algo]
                cells[algo] = r.mean_loss if best is None else min(best, r.mean_loss)
        entries.append(_cells_to_entry(step.name, cells, reference, allow_partial,
                                       f"step {step.name!r}"))
    return ContributionReport("steps", tuple(entries), reference, estimator)


def _path_records(ledger: TrialLedger, spec: PipelineSpec, path: PathId,
                  exclude_failed: bool, keys: Iterable[str] | None) -> list[TrialRecord]:
    path = validate_path(spec, path)
    records = [r for r in _iter_records(ledger, keys, exclude_failed) if r.config.path == path]
    if not records:
        raise CoverageError(f"ledger holds no trials on path {','.join(path)}")
    return records


def _algorithm_cell_label(assignment: Mapping[str, str]) -> str:
    if not assignment:
        return "(no hyperparameters)"
    return ",".join(f"{k}={v}" for k, v in sorted(assignment.items()))


def contribution_algorithms(ledger: TrialLedger, spec: PipelineSpec, path: PathId,
                            estimator: str = "grid", allow_partial: bool = False,
                            exclude_failed: bool = False,
                            keys: Iterable[str] | None = None) -> ContributionReport:
    """Per-algorithm contributions over one path's ledger.

    A cell is one full hyperparameter configuration of the target algorithm
    (everything else on the path free). Hyperparameter-free algorithms have a
    single cell equal to the whole path, so their contribution is exactly 0.
    """
    records = _path_records(ledger, spec, path, exclude_failed, keys)
    reference = min(r.mean_loss for r in records)
    entries = []
    for step, algo_id in zip(spec.steps, path):
        algo = step.algorithm(algo_id)
        names = [h.name for h in algo.hyperparameters]
        cells: dict[str, float | None] = {
            _algorithm_cell_label(z): None for z in algo.grid()}
        for r in records:
            values = r.config.values
            label = _algorithm_cell_label({n: values[n] for n in names})
            best = cells[label]
            cells[label] = r.mean_loss if best is None else min(best, r.mean_loss)
        entries.append(_cells_to_entry(algo_id, cells, reference, allow_partial,
                                       f"algorithm {algo_id!r}"))
    return ContributionReport("algorithms", tuple(entries), reference, estimator, path=tuple(path))


def default_targets(spec: PipelineSpec, path: PathId) -> tuple[str, ...]:
    """First-listed hyperparameter of each path algorithm that has one."""
    targets = []
    for step, algo_id in zip(spec.steps, path):
        algo = step.algorithm(algo_id)
        if algo.hyperparameters:
            targets.append(algo.hyperparameters[0].name)
    return tuple(targets)


def contribution_hyperparameters(ledger: TrialLedger, spec: PipelineSpec, path: PathId,
                                 targets: Sequence[str] | None = None,
                                 estimator: str = "grid", allow_partial: bool = False,
                                 exclude_failed: bool = False,
                                 keys: Iterable[str] | None = None) -> ContributionReport:
    """Per-hyperparameter contributions over one path's ledger.

    A cell is one value of the target hyperparameter with everything else on
    the path free.
    """
    records = _path_records(ledger, spec, path, exclude_failed, keys)
    reference = min(r.mean_loss for r in records)
    if targets is None:
        targets = default_targets(spec, path)
    on_path: dict[str, tuple[str, ...]] = {}
    for step, algo_id in zip(spec.steps, path):
        for hp in step.algorithm(algo_id).hyperparameters:
            on_path[hp.name] = hp.values
    entries = []
    for name in targets:
        if name not in on_path:
            raise SpecError(f"hyperparameter {name!r} is not active on path {','.join(path)}")
        cells: dict[str, float | None] = {f"{name}={v}": None for v in on_path[name]}
        for r in records:
            label = f"{name}={r.config.value(name)}"
            best = cells[label]
            cells[label] = r.mean_loss if best is None else min(best, r.mean_loss)
        entries.append(_cells_to_entry(name, cells, reference, allow_partial,
                                       f"hyperparameter {name!r}"))
    return ContributionReport("hyperparameters", tuple(entries), reference, estimator,
                              path=tuple(path))


def aggregate_over_seeds(reports: Sequence[ContributionReport]) -> ContributionReport:
    """Per-component mean and sample standard deviation across seeded runs.

    Grid is deterministic, so exactly one grid report is accepted.
    """
    if not reports:
        raise ValueError("no reports to aggregate")
    first = reports[0]
    for r in reports[1:]:
        if r.scope != first.scope or r.estimator != first.estimator or r.path != first.path:
            raise ValueError("reports disagree in scope, estimator, or path")
        if [e.component for e in r.entries] != [e.component for e in first.entries]:
            raise ValueError("reports disagree in component lists")
    if first.estimator == "grid" and len(reports) != 1:
        raise ValueError("grid search runs once; got multiple grid reports")
    entries = []
    for i, entry in enumerate(first.entries):
        values = [r.entries[i].contribution for r in reports]
        if any(v is None for v in values):
            mean = None
            std = 0.0
        else:
            mean = float(np.mean(values))
            std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        entries.append(ContributionEntry(
            component=entry.component,
            contribution=mean,
            cell_minima=entry.cell_minima,
            coverage=float(np.mean([r.entries[i].coverage for r in reports])),
            std=std,
            per_seed=tuple(v for v in values if v is not None),
        ))
    return ContributionReport(
        scope=first.scope,
        entries=tuple(entries),
        reference_min=float(np.mean([r.reference_min for r in reports])),
        estimator=first.estimator,
        seeds=len(reports),
        path=first.path,
    )


def default_analysis_path(spec: PipelineSpec) -> PathId:
    """The path with the most hyperparameters.

    Ties break toward more configurations, then document order.
    """
    from .model import enumerate_paths

    best_path = None
    best_rank = None
    for path in enumerate_paths(spec, include_naive=False):
        algos = [spec.algorithm(i, a) for i, a in enumerate(path)]
        rank = (sum(len(a.hyperparameters) for a in algos),
                math.prod(a.config_count() for a in algos))
        if best_rank is None or rank > best_rank:
            best_rank, best_path = rank, path
    return best_path


def ensure_coverage(evaluator, spec: PipelineSpec, scope: str, path: PathId | None = None,
                    targets: Sequence[str] | None = None, seed: int = 0,
                    keys: Iterable[str] | None = None) -> list[str]:
    """Evaluate one seeded random configuration from every empty cell.

    Returns the keys of the forced trials (possibly none). The repaired
    ledger then has full coverage for the requested scope.
    """
    rng = np.random.default_rng(np.random.SeedSequence([0xC0FFEE, seed]))
    forced: list[str] = []
    for restriction, describe in _cell_restrictions(evaluator.ledger, spec, scope, path, targets, keys):
        configs = enumerate_grid(spec, restriction)
        if not configs:
            raise CoverageError(f"cell {describe!r} has an empty grid")
        config = configs[int(rng.integers(len(configs)))]
        forced.append(evaluator.evaluate(config).key)
    return forced


def _cell_restrictions(ledger: TrialLedger, spec: PipelineSpec, scope: str,
                       path: PathId | None, targets: Sequence[str] | None,
                       keys: Iterable[str] | None):
    """Restrictions for every currently-empty cell of the requested scope."""
    out = []
    if scope == "steps":
        report = contribution_steps(ledger, spec, allow_partial=True, keys=keys)
        for step, entry in zip(spec.steps, report.entries):
            covered = dict(entry.cell_minima)
            for algo in step.non_naive():
                if algo.id not in covered:
                    out.append((Restriction.make({step.index: (algo.id,)}), algo.id))
        return out
    if path is None:
        raise SpecError(f"scope {scope!r} needs a path")
    if scope == "algorithms":
        report = contribution_algorithms(ledger, spec, path, allow_partial=True, keys=keys)
        for step, algo_id in zip(spec.steps, path):
            algo = step.algorithm(algo_id)
            entry = report.entry(algo_id)
            covered = dict(entry.cell_minima)
            for z in algo.grid():
                label = _algorithm_cell_label(z)
                if label not in covered:
                    out.append((Restriction.make({i: (a,) for i, a in enumerate(path)}, pinned=z),
                                f"{algo_id}:{label}"))
        return out
    if scope == "hyperparameters":
        if targets is None:
            targets = default_targets(spec, path)
        report = contribution_hyperparameters(ledger, spec, path, targets, allow_partial=True,
                                              keys=keys)
        for name in targets:
            entry = report.entry(name)
            covered = dict(entry.cell_minima)
            owner = {hp.name: hp for step, a in zip(spec.steps, path)
                     for hp in step.algorithm(a).hyperparameters}[name]
            for token in owner.values:
                label = f"{name}={token}"
                if label not in covered:
                    out.append((Restriction.make({i: (a,) for i, a in enumerate(path)},
                                                 pinned={name: token}), label))
        return out
    raise SpecError(f"unknown scope {scope!r}")

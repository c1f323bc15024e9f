"""Error propagation via naive-benchmark substitution.

For a component (step, algorithm on a path, or hyperparameter on a path) six
constrained best losses are measured: the component held {optimal, agnostic,
naive} crossed with the downstream steps held {optimal, naive}. Upstream
steps are always jointly optimized. The three differences these induce are
solved for the component's direct error, its propagated error, and the
propagation factor linking them.

The six quantities come from four constrained searches: the optimal and
agnostic treatments share a search (agnostic is the average of per-cell
minima over that search's trials, exactly as in the contribution
methodology), which also makes the first difference coincide with the
component's error contribution.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .attribution import CoverageError, _algorithm_cell_label
from .model import PathId, PipelineSpec, Restriction, SpecError, validate_path
from .optimize import SearchBudget, run_search
from .util import stable_seed

FLAG_LAST_STEP = "last-step-convention"
FLAG_DEGENERATE = "degenerate-denominator"
FLAG_NEGATIVE_GAMMA = "negative-gamma"
FLAG_MODEL_VIOLATION = "model-violation"

SCOPES = ("steps", "algorithms", "hyperparameters")


@dataclass(frozen=True)
class NaiveErrorSextuple:
    """The six constrained best losses for one component."""

    scope: str
    component: str
    e_opt_opt: float
    e_agnostic_opt: float
    e_naive_opt: float
    e_opt_naive: float
    e_naive_naive: float
    e_agnostic_naive: float

    FIELDS = ("e_opt_opt", "e_agnostic_opt", "e_naive_opt",
              "e_opt_naive", "e_naive_naive", "e_agnostic_naive")

    def to_json(self) -> dict:
        return {name: getattr(self, name) for name in self.FIELDS}


@dataclass(frozen=True)
class PropagationResult:
    scope: str
    component: str
    sextuple: NaiveErrorSextuple | None
    delta_e1: float
    delta_e2: float
    delta_e3: float
    e_direct: float | None
    e_propagation: float | None
    gamma: float | None
    flags: tuple[str, ...]

    def to_json(self) -> dict:
        out = {
            "component": self.component,
            "scope": self.scope,
            "delta_e1": self.delta_e1,
            "delta_e2": self.delta_e2,
            "delta_e3": self.delta_e3,
            "e_direct": self.e_direct,
            "e_propagation": self.e_propagation,
            "gamma": self.gamma,
            "flags": list(self.flags),
        }
        if self.sextuple is not None:
            out["errors"] = self.sextuple.to_json()
        return out


def solve_deltas(delta_e1: float, delta_e2: float, delta_e3: float,
                 epsilon: float = 1e-9, scope: str = "", component: str = "",
                 sextuple: NaiveErrorSextuple | None = None) -> PropagationResult:
    """Solve the two-equation propagation model for one delta triple.

    Conventions: an empty downstream set (both deltas collapse) yields zero
    propagation by definition; a vanishing denominator leaves the split
    undefined and is flagged rather than raised. A negative propagation
    factor, or a negative direct error, contradicts the model's assumptions
    and is flagged as model violation.
    """
    flags: list[str] = []
    if delta_e3 <= epsilon and abs(delta_e2 - delta_e1) <= epsilon:
        return PropagationResult(scope, component, sextuple, delta_e1, delta_e2, delta_e3,
                                 e_direct=delta_e1, e_propagation=0.0, gamma=0.0,
                                 flags=(FLAG_LAST_STEP,))
    denominator = delta_e2 + delta_e3 - delta_e1
    if abs(denominator) <= epsilon or abs(delta_e3) <= epsilon:
        # either the two model equations coincide, or the third difference
        # vanishes while the first two disagree; no finite split exists
        return PropagationResult(scope, component, sextuple, delta_e1, delta_e2, delta_e3,
                                 e_direct=None, e_propagation=None, gamma=None,
                                 flags=(FLAG_DEGENERATE,))
    e_direct = delta_e1 * delta_e3 / denominator
    e_propagation = delta_e1 * (delta_e2 - delta_e1) / denominator
    gamma = (delta_e2 - delta_e1) / delta_e3
    if gamma < 0.0:
        flags.append(FLAG_NEGATIVE_GAMMA)
        flags.append(FLAG_MODEL_VIOLATION)
    elif e_direct < -epsilon:
        flags.append(FLAG_MODEL_VIOLATION)
    return PropagationResult(scope, component, sextuple, delta_e1, delta_e2, delta_e3,
                             e_direct=e_direct, e_propagation=e_propagation, gamma=gamma,
                             flags=tuple(flags))


def solve_propagation(s: NaiveErrorSextuple, epsilon: float = 1e-9) -> PropagationResult:
    delta_e1 = s.e_agnostic_opt - s.e_opt_opt
    delta_e2 = s.e_agnostic_naive - s.e_opt_naive
    delta_e3 = s.e_naive_naive - s.e_naive_opt
    return solve_deltas(delta_e1, delta_e2, delta_e3, epsilon=epsilon,
                        scope=s.scope, component=s.component, sextuple=s)


def _search_min(spec, evaluator, restriction, optimizer, budget, seed, jobs) -> tuple[float, list]:
    """Run one constrained search; return (min loss, its trial records).

    The search seed derives from (seed, restriction), so identical
    constraints give identical searches: with an empty downstream set the
    downstream-naive search IS the downstream-optimal search.
    """
    search_seed = stable_seed(seed, restriction.key())
    result = run_search(optimizer, spec, evaluator, restrict=restriction,
                        budget=budget, seed=search_seed, jobs=jobs)
    records = [evaluator.ledger.records[k] for k in result.trial_sequence]
    return min(r.mean_loss for r in records), records


def _agnostic_average(records, cells: dict[str, float | None],
                      label_of, describe: str) -> float:
    for r in records:
        label = label_of(r)
        if label in cells:
            best = cells[label]
            cells[label] = r.mean_loss if best is None else min(best, r.mean_loss)
    covered = [v for v in cells.values() if v is not None]
    if not covered:
        raise CoverageError(f"{describe}: no cells covered by the constrained search")
    return sum(covered) / len(covered)


def compute_sextuple(spec: PipelineSpec, evaluator, component, scope: str,
                     optimizer: str = "grid", budget: SearchBudget = SearchBudget(),
                     seed: int = 0, path: PathId | None = None,
                     jobs: int = 1) -> NaiveErrorSextuple:
    """Measure the six constrained best losses for one component.

    ``component`` is a step index (scope ``steps``), an algorithm id on
    ``path`` (scope ``algorithms``), or a hyperparameter name on ``path``
    (scope ``hyperparameters``). Requires a naive algorithm in every step the
    constraints touch; all trials land in the evaluator's ledger.
    """
    if scope not in SCOPES:
        raise SpecError(f"unknown scope {scope!r}")
    n_steps = len(spec.steps)

    if scope == "steps":
        step_index = int(component)
        step = spec.steps[step_index]
        component_name = step.name
        base: dict[int, tuple[str, ...]] = {}
        current_free: Mapping[int, tuple[str, ...]] = {}
        current_naive = {step_index: (spec.naive_id(step_index),)}
        cells = lambda: {a.id: None for a in step.non_naive()}
        label_of = lambda r: r.config.path[step_index]
    else:
        if path is None:
            raise SpecError(f"scope {scope!r} needs a path")
        path = validate_path(spec, path)
        if scope == "algorithms":
            algo_id = str(component)
            step_index = next(i for i, a in enumerate(path) if a == algo_id)
            algo = spec.algorithm(step_index, algo_id)
            component_name = algo_id
            names = [h.name for h in algo.hyperparameters]
            cells = lambda: {_algorithm_cell_label(z): None for z in algo.grid()}
            label_of = lambda r: _algorithm_cell_label(
                {n: r.config.values[n] for n in names})
        else:
            hp_name = str(component)
            owner = None
            for i, a in enumerate(path):
                for hp in spec.algorithm(i, a).hyperparameters:
                    if hp.name == hp_name:
                        owner, step_index = hp, i
            if owner is None:
                raise SpecError(f"hyperparameter {hp_name!r} is not on path {','.join(path)}")
            component_name = hp_name
            cells = lambda: {f"{hp_name}={v}": None for v in owner.values}
            label_of = lambda r: f"{hp_name}={r.config.value(hp_name)}"
        base = {i: (a,) for i, a in enumerate(path)}
        current_free = {step_index: (path[step_index],)}
        current_naive = {step_index: (spec.naive_id(step_index),)}

    downstream = range(step_index + 1, n_steps)
    down_naive = {i: (spec.naive_id(i),) for i in downstream}

    def restriction(current: Mapping[int, tuple[str, ...]], naive_down: bool) -> Restriction:
        steps = dict(base)
        steps.update(current)
        if naive_down:
            steps.update(down_naive)
        return Restriction.make(steps)

    budget = budget or SearchBudget()
    # current free x downstream {opt, naive}: opt and agnostic share the search
    e_opt_opt, rec_opt = _search_min(spec, evaluator, restriction(current_free, False),
                                     optimizer, budget, seed, jobs)
    e_agn_opt = _agnostic_average(rec_opt, cells(), label_of,
                                  f"{scope} component {component_name!r} (downstream optimal)")
    e_opt_nai, rec_nai = _search_min(spec, evaluator, restriction(current_free, True),
                                     optimizer, budget, seed, jobs)
    e_agn_nai = _agnostic_average(rec_nai, cells(), label_of,
                                  f"{scope} component {component_name!r} (downstream naive)")
    e_nai_opt, _ = _search_min(spec, evaluator, restriction(current_naive, False),
                               optimizer, budget, seed, jobs)
    e_nai_nai, _ = _search_min(spec, evaluator, restriction(current_naive, True),
                               optimizer, budget, seed, jobs)
    return NaiveErrorSextuple(scope=scope, component=component_name,
                              e_opt_opt=e_opt_opt, e_agnostic_opt=e_agn_opt,
                              e_naive_opt=e_nai_opt, e_opt_naive=e_opt_nai,
                              e_naive_naive=e_nai_nai, e_agnostic_naive=e_agn_nai)


@dataclass(frozen=True)
class PropagationSummary:
    """One component's per-seed solutions plus mean/std aggregates."""

    scope: str
    component: str
    per_seed: tuple[PropagationResult, ...]
    means: dict
    stds: dict
    flags: tuple[str, ...]

    NUMERIC_FIELDS = ("delta_e1", "delta_e2", "delta_e3",
                      "e_direct", "e_propagation", "gamma")

    def to_json(self) -> dict:
        return {
            "kind": "propagation-summary",
            "scope": self.scope,
            "component": self.component,
            "means": self.means,
            "stds": self.stds,
            "flags": list(self.flags),
            "per_seed": [r.to_json() for r in self.per_seed],
        }


def summarize(results: Sequence[PropagationResult]) -> PropagationSummary:
    means: dict = {}
    stds: dict = {}
    for name in PropagationSummary.NUMERIC_FIELDS + tuple(NaiveErrorSextuple.FIELDS):
        if name in NaiveErrorSextuple.FIELDS:
            values = [getattr(r.sextuple, name) for r in results if r.sextuple is not None]
        else:
            values = [getattr(r, name) for r in results]
        values = [v for v in values if v is not None]
        if values:
            means[name] = float(np.mean(values))
            stds[name] = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        else:
            means[name] = None
            stds[name] = None
    flags = sorted({flag for r in results for flag in r.flags})
    first = results[0]
    return PropagationSummary(first.scope, first.component, tuple(results),
                              means, stds, tuple(flags))


def propagation_report(spec: PipelineSpec, evaluator, scope: str,
                       optimizer: str = "grid", budget: SearchBudget = SearchBudget(),
                       seeds: Sequence[int] = (0,), path: PathId | None = None,
                       targets: Sequence[str] | None = None,
                       epsilon: float = 1e-9, jobs: int = 1) -> list[PropagationSummary]:
    """Sextuple plus solve for every component of a scope, across seeds."""
    if scope == "steps":
        components: Sequence = range(len(spec.steps))
    elif scope == "algorithms":
        if path is None:
            raise SpecError("algorithms scope needs a path")
        components = list(validate_path(spec, path))
    elif scope == "hyperparameters":
        if path is None:
            raise SpecError("hyperparameters scope needs a path")
        if targets is None:
            from .attribution import default_targets
            targets = default_targets(spec, path)
        components = list(targets)
    else:
        raise SpecError(f"unknown scope {scope!r}")
    summaries = []
    for component in components:
        results = []
        for seed in seeds:
            sextuple = compute_sextuple(spec, evaluator, component, scope,
                                        optimizer=optimizer, budget=budget, seed=seed,
                                        path=path, jobs=jobs)
            results.append(solve_propagation(sextuple, epsilon=epsilon))
        summaries.append(summarize(results))
    return summaries

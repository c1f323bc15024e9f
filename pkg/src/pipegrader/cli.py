"""Command-line orchestration: optimize, contrib, propagate, compare, dataset gen."""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .attribution import (CoverageError, aggregate_over_seeds, contribution_algorithms,
                          contribution_hyperparameters, contribution_steps,
                          default_analysis_path, default_targets, ensure_coverage)
from .components import ComponentError, default_spec
from .data import (DatasetError, PRESET_NAMES, generate_texture_dataset, load_dataset,
                   make_folds, split_train_test, export_dataset)
from .evaluate import LedgerError, PipelineEvaluator, TrialLedger
from .model import PipelineSpec, SpecError, read_spec, validate_path
from .optimize import OPTIMIZERS, SearchBudget, run_search
from .propagation import propagation_report
from .reporting import (compare_reports, write_contribution_report, write_json,
                        write_manifest, write_propagation_report)

TRAIN_FRACTION = 0.8

_USER_ERRORS = (SpecError, DatasetError, LedgerError, CoverageError, ComponentError,
                ValueError, OSError)


def _base_seed() -> int:
    return int(os.environ.get("PIPEGRADER_SEED", "0"))


def _add_shared(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--spec", default=None, help="pipeline spec JSON (default: built-in)")
    parser.add_argument("--dataset", default="balanced-small",
                        help="preset name or PNG+manifest directory")
    parser.add_argument("--optimizer", choices=OPTIMIZERS, default="grid")
    parser.add_argument("--framework", choices=("cash", "hpo"), default="cash")
    parser.add_argument("--path", default=None,
                        help="comma-separated algorithm ids, one per step")
    parser.add_argument("--budget", type=int, default=None, help="max trials per search")
    parser.add_argument("--patience", type=int, default=50,
                        help="convergence patience in trials (0 disables)")
    parser.add_argument("--seeds", type=int, default=5,
                        help="number of seeded runs (grid forces 1)")
    parser.add_argument("--folds", type=int, default=None,
                        help="cross-validation folds (default: spec value)")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--ensure-coverage", action="store_true")
    parser.add_argument("--allow-partial", action="store_true")
    parser.add_argument("--no-standardize", action="store_true")
    parser.add_argument("--targets", default=None,
                        help="comma-separated hyperparameter names (hyperparameters scope)")
    parser.add_argument("--out", default="pipegrader-out")


class _Run:
    """Shared setup: spec, dataset split, fold plan, evaluator, manifest."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.base_seed = _base_seed()
        self.spec: PipelineSpec = read_spec(args.spec) if args.spec else default_spec()
        if args.dataset in PRESET_NAMES:
            full = generate_texture_dataset(args.dataset, self.base_seed)
        else:
            full = load_dataset(args.dataset)
        self.train, self.test = split_train_test(full, TRAIN_FRACTION, self.base_seed)
        k = args.folds if args.folds else self.spec.folds
        self.folds = make_folds(self.train, k, self.base_seed)
        self.budget = SearchBudget(
            max_trials=args.budget,
            patience=None if args.patience == 0 else args.patience)
        self.n_seeds = 1 if args.optimizer == "grid" else args.seeds
        self.seeds = [self.base_seed + i for i in range(self.n_seeds)]
        self._evaluator: PipelineEvaluator | None = None

    @property
    def evaluator(self) -> PipelineEvaluator:
        if self._evaluator is None:
            self._evaluator = PipelineEvaluator(
                self.spec, self.train, self.folds, seed=self.base_seed,
                standardize=not self.args.no_standardize)
        return self._evaluator

    def resolve_path(self):
        if self.args.path:
            return validate_path(self.spec, tuple(self.args.path.split(",")))
        return default_analysis_path(self.spec)

    def resolve_targets(self, path):
        if self.args.targets:
            return tuple(self.args.targets.split(","))
        return default_targets(self.spec, path)

    def restriction(self):
        if self.args.framework == "hpo":
            return self.resolve_path()
        return None

    def manifest(self, command: str) -> dict:
        a = self.args
        return {
            "kind": "run-manifest",
            "tool_version": __version__,
            "command": command,
            "spec": a.spec or "(built-in)",
            "dataset": a.dataset,
            "optimizer": a.optimizer,
            "framework": a.framework,
            "path": a.path,
            "targets": a.targets,
            "budget": a.budget,
            "patience": a.patience,
            "seeds": self.seeds,
            "folds": self.folds.k,
            "train_fraction": TRAIN_FRACTION,
            "base_seed": self.base_seed,
            "flags": {
                "ensure_coverage": a.ensure_coverage,
                "allow_partial": a.allow_partial,
                "no_standardize": a.no_standardize,
                "jobs": a.jobs,
            },
            "out": a.out,
            "fingerprints": {
                "spec": self.spec.fingerprint(),
                "dataset": self.train.fingerprint(),
                "folds": self.folds.fingerprint(),
            },
        }

    def subledger(self, keys) -> TrialLedger:
        led = TrialLedger(*self.evaluator.ledger.fingerprints())
        for key in keys:
            led.add(self.evaluator.ledger.records[key])
        return led


def _search_once(run: _Run, seed: int):
    return run_search(run.args.optimizer, run.spec, run.evaluator,
                      restrict=run.restriction(), budget=run.budget, seed=seed,
                      jobs=run.args.jobs)


def cmd_optimize(args: argparse.Namespace) -> int:
    run = _Run(args)
    write_manifest(args.out, run.manifest("optimize"))
    results = []
    for i, seed in enumerate(run.seeds):
        result = _search_once(run, seed)
        results.append(result)
        run.subledger(result.trial_sequence).save(
            os.path.join(args.out, f"ledger_seed{i}.jsonl"))
        write_json(os.path.join(args.out, f"result_seed{i}.json"), result.to_json())
    best = [r.best_loss for r in results]
    write_json(os.path.join(args.out, "summary.json"), {
        "kind": "search-summary",
        "best_loss_per_seed": best,
        "best_key_per_seed": [r.best_key for r in results],
        "terminated_by": [r.terminated_by for r in results],
        "mean_best_loss": float(np.mean(best)),
        "std_best_loss": float(np.std(best, ddof=1)) if len(best) > 1 else 0.0,
    })
    print(f"optimize: {len(results)} run(s), best loss {min(best):.6f}")
    return 0


def _scope_report(run: _Run, scope: str, ledger, keys, path, targets):
    common = dict(estimator=run.args.optimizer, allow_partial=run.args.allow_partial, keys=keys)
    if scope == "steps":
        return contribution_steps(ledger, run.spec, **common)
    if scope == "algorithms":
        return contribution_algorithms(ledger, run.spec, path, **common)
    return contribution_hyperparameters(ledger, run.spec, path, targets, **common)


def cmd_contrib(args: argparse.Namespace) -> int:
    scope = args.scope
    # the scope fixes the framework: per-step cells need whole-pipeline trials,
    # algorithm/hyperparameter cells live on one path
    args.framework = "cash" if scope == "steps" else "hpo"
    run = _Run(args)
    path = None if scope == "steps" else run.resolve_path()
    targets = run.resolve_targets(path) if scope == "hyperparameters" else None
    if path is not None:
        args.path = ",".join(path)
    write_manifest(args.out, run.manifest(f"contrib-{args.scope}"))

    per_seed_keys: list[set] = []
    if args.run_search:
        for seed in run.seeds:
            per_seed_keys.append(set(_search_once(run, seed).trial_sequence))
    else:
        for i in range(run.n_seeds):
            ledger_path = os.path.join(args.out, f"ledger_seed{i}.jsonl")
            if not os.path.exists(ledger_path):
                raise LedgerError(
                    f"no ledger at {ledger_path!r}; run optimize first or pass --run-search")
            loaded = TrialLedger.load(ledger_path,
                                      expect=run.evaluator.ledger.fingerprints())
            run.evaluator.ledger.merge(loaded)
            per_seed_keys.append(set(loaded.records))

    reports = []
    for seed, keys in zip(run.seeds, per_seed_keys):
        if args.ensure_coverage:
            forced = ensure_coverage(run.evaluator, run.spec, scope, path, targets,
                                     seed=seed, keys=keys)
            keys |= set(forced)
        reports.append(_scope_report(run, scope, run.evaluator.ledger, keys, path, targets))
    aggregate = aggregate_over_seeds(reports)
    write_contribution_report(aggregate,
                              os.path.join(args.out, f"contrib_{scope}.json"),
                              os.path.join(args.out, f"contrib_{scope}.csv"))
    for entry in aggregate.entries:
        value = "n/a" if entry.contribution is None else f"{entry.contribution:.6f}"
        print(f"contrib[{scope}] {entry.component}: {value} (coverage {entry.coverage:.2f})")
    return 0


def cmd_propagate(args: argparse.Namespace) -> int:
    run = _Run(args)
    write_manifest(args.out, run.manifest(f"propagate-{args.scope}"))
    scope = args.scope
    path = None if scope == "steps" else run.resolve_path()
    targets = run.resolve_targets(path) if scope == "hyperparameters" else None
    summaries = propagation_report(run.spec, run.evaluator, scope,
                                   optimizer=args.optimizer, budget=run.budget,
                                   seeds=run.seeds, path=path, targets=targets,
                                   jobs=args.jobs)
    write_propagation_report(summaries, scope,
                             os.path.join(args.out, f"propagation_{scope}.json"),
                             os.path.join(args.out, f"propagation_{scope}.csv"))
    for s in summaries:
        gamma = s.means.get("gamma")
        text = "n/a" if gamma is None else f"{gamma:.6f}"
        print(f"propagate[{scope}] {s.component}: gamma {text} flags={';'.join(s.flags) or '-'}")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    result = compare_reports(args.reports)
    os.makedirs(args.out, exist_ok=True)
    write_json(os.path.join(args.out, "compare.json"), result)
    for pair in result["pairs"]:
        print(f"compare vs {pair['report']}: spearman {pair['spearman']:.4f}")
    return 0


def cmd_dataset_gen(args: argparse.Namespace) -> int:
    ds = generate_texture_dataset(args.preset, args.seed)
    export_dataset(ds, args.out)
    print(f"dataset gen: wrote {len(ds)} images ({args.preset}, seed {args.seed}) to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pipegrader",
        description="Optimize ML pipelines and quantify per-component error "
                    "contribution and propagation from the recorded trials.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="run a search and record the trial ledger")
    _add_shared(p_opt)
    p_opt.set_defaults(func=cmd_optimize)

    p_contrib = sub.add_parser("contrib", help="error contributions from a ledger")
    _add_shared(p_contrib)
    p_contrib.add_argument("--scope", choices=("steps", "algorithms", "hyperparameters"),
                           required=True)
    p_contrib.add_argument("--run-search", action="store_true",
                           help="run the search instead of loading ledgers from --out")
    p_contrib.set_defaults(func=cmd_contrib)

    p_prop = sub.add_parser("propagate", help="naive-benchmark error propagation")
    _add_shared(p_prop)
    p_prop.add_argument("--scope", choices=("steps", "algorithms", "hyperparameters"),
                        required=True)
    p_prop.set_defaults(func=cmd_propagate)

    p_cmp = sub.add_parser("compare", help="diff two or more reports of one scope")
    p_cmp.add_argument("reports", nargs="+", help="report JSON files (first is the reference)")
    p_cmp.add_argument("--out", default="pipegrader-out")
    p_cmp.set_defaults(func=cmd_compare)

    p_ds = sub.add_parser("dataset", help="dataset utilities")
    ds_sub = p_ds.add_subparsers(dest="dataset_command", required=True)
    p_gen = ds_sub.add_parser("gen", help="generate a preset as PNGs plus manifest.csv")
    p_gen.add_argument("--preset", choices=PRESET_NAMES, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_dataset_gen)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

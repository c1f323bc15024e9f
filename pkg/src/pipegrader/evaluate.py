"""Configuration evaluation: k-fold chain execution and the trial ledger.

The ledger memoizes every evaluation under the configuration's canonical key
and is the single source for all attribution and propagation math. Evaluation
is a pure function of (configuration, dataset fingerprint, fold plan, seed),
so cached and recomputed records agree bit for bit.
"""
from __future__ import annotations

import json
import math
import threading
import time
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from . import components as comp
from .data import FoldPlan, ImageDataset, cross_entropy
from .model import (Configuration, PipelineSpec, active_values, canonical_key,
                    validate_config)
from .util import stable_digest, stable_seed

PENALTY_SCALE = 10.0


class LedgerError(ValueError):
    """Ledger conflict, fingerprint mismatch, or missing lookup key."""


@dataclass(frozen=True)
class TrialRecord:
    key: str
    config: Configuration
    fold_losses: tuple[float, ...]
    mean_loss: float
    wall_time: float
    seed: int
    failed: bool = False

    def __post_init__(self):
        expected = sum(self.fold_losses) / len(self.fold_losses)
        if abs(self.mean_loss - expected) > 1e-12:
            raise LedgerError("mean_loss is not the mean of fold_losses")

    def content_equal(self, other: "TrialRecord") -> bool:
        """Equality ignoring wall_time (the only nondeterministic field)."""
        return (self.key == other.key and self.config == other.config
                and self.fold_losses == other.fold_losses
                and self.mean_loss == other.mean_loss
                and self.seed == other.seed and self.failed == other.failed)

    def to_json(self) -> dict:
        return {
            "kind": "trial",
            "key": self.key,
            "path": list(self.config.path),
            "values": dict(self.config.assignments),
            "fold_losses": list(self.fold_losses),
            "mean_loss": self.mean_loss,
            "wall_time": self.wall_time,
            "seed": self.seed,
            "failed": self.failed,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "TrialRecord":
        config = Configuration.make(tuple(obj["path"]), dict(obj["values"]))
        return cls(key=obj["key"], config=config,
                   fold_losses=tuple(float(x) for x in obj["fold_losses"]),
                   mean_loss=float(obj["mean_loss"]), wall_time=float(obj["wall_time"]),
                   seed=int(obj["seed"]), failed=bool(obj["failed"]))


class TrialLedger:
    """Append-only map from canonical key to trial record.

    Inserts are serialized; a duplicate insert must carry identical content
    (wall_time aside), which determinism guarantees.
    """

    def __init__(self, spec_fingerprint: str, dataset_fingerprint: str, fold_fingerprint: str):
        self.spec_fingerprint = spec_fingerprint
        self.dataset_fingerprint = dataset_fingerprint
        self.fold_fingerprint = fold_fingerprint
        self.records: dict[str, TrialRecord] = {}
        self._lock = threading.Lock()

    def fingerprints(self) -> tuple[str, str, str]:
        return (self.spec_fingerprint, self.dataset_fingerprint, self.fold_fingerprint)

    def __contains__(self, key: str) -> bool:
        return key in self.records

    def __len__(self) -> int:
        return len(self.records)

    def get(self, key: str) -> TrialRecord | None:
        return self.records.get(key)

    def add(self, record: TrialRecord) -> TrialRecord:
        with self._lock:
            existing = self.records.get(record.key)
            if existing is not None:
                if not existing.content_equal(record):
                    raise LedgerError(f"conflicting records for key {record.key}")
                return existing
            self.records[record.key] = record
            return record

    def merge(self, other: "TrialLedger") -> None:
        """Key-union of two ledgers over the same spec/dataset/fold plan."""
        if self.fingerprints() != other.fingerprints():
            raise LedgerError("cannot merge ledgers with different fingerprints")
        for record in other.records.values():
            self.add(record)

    def best(self, keys: Iterable[str] | None = None) -> tuple[str, TrialRecord]:
        pool = self.records.keys() if keys is None else keys
        best_key = None
        best = None
        for key in pool:
            record = self.records[key]
            if best is None or (record.mean_loss, key) < (best.mean_loss, best_key):
                best_key, best = key, record
        if best is None:
            raise LedgerError("ledger is empty")
        return best_key, best

    def save(self, path: str) -> None:
        header = {
            "kind": "ledger-header",
            "version": 1,
            "spec": self.spec_fingerprint,
            "dataset": self.dataset_fingerprint,
            "folds": self.fold_fingerprint,
        }
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for key in sorted(self.records):
                fh.write(json.dumps(self.records[key].to_json(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str, expect: tuple[str, str, str] | None = None) -> "TrialLedger":
        with open(path, "r", encoding="utf-8") as fh:
            lines = [line for line in fh if line.strip()]
        if not lines:
            raise LedgerError(f"{path!r} is empty")
        header = json.loads(lines[0])
        if header.get("kind") != "ledger-header":
            raise LedgerError(f"{path!r} does not start with a ledger header")
        ledger = cls(header["spec"], header["dataset"], header["folds"])
        if expect is not None and ledger.fingerprints() != tuple(expect):
            raise LedgerError(f"{path!r} fingerprints do not match this run")
        for line in lines[1:]:
            obj = json.loads(line)
            if obj.get("kind") != "trial":
                raise LedgerError("unexpected line kind in ledger file")
            ledger.add(TrialRecord.from_json(obj))
        return ledger


def _prefix_key(items: list[dict]) -> str:
    return json.dumps(items, sort_keys=True, separators=(",", ":"))


class PipelineEvaluator:
    """Runs fit-on-train / apply-on-validation chains over stratified folds.

    Intermediate step outputs are cached per (step-prefix configuration,
    fold); feature extraction dominates runtime and is shared by hundreds of
    configurations, so this cache is what keeps full grids desk-scale.
    """

    def __init__(self, spec: PipelineSpec, dataset: ImageDataset, folds: FoldPlan,
                 seed: int = 0, standardize: bool = True, prefix_caching: bool = True,
                 registry: Mapping[str, comp.ComponentFactory] | None = None):
        if len(folds.fold_assignment) != len(dataset):
            raise LedgerError("fold plan does not cover the dataset")
        self.spec = spec
        self.dataset = dataset
        self.folds = folds
        self.seed = seed
        self.standardize = standardize
        self.prefix_caching = prefix_caching
        self.registry = comp.REGISTRY if registry is None else registry
        self._validate_roles()
        self.ledger = TrialLedger(spec.fingerprint(), dataset.fingerprint(), folds.fingerprint())
        self._fold_data = [self._materialize_fold(f) for f in range(folds.k)]
        self._prefix_cache: dict[tuple[str, int], tuple[np.ndarray, np.ndarray]] = {}
        self._executions: dict[tuple[str, int], int] = {}
        self._final_executions = 0
        self._lock = threading.Lock()
        self._inflight: dict[tuple[str, int], threading.Lock] = {}

    def _validate_roles(self) -> None:
        n = len(self.spec.steps)
        for step in self.spec.steps:
            want = (comp.ROLE_EXTRACT if step.index == 0 and n > 1 else
                    comp.ROLE_LEARN if step.index == n - 1 else
                    comp.ROLE_TRANSFORM)
            for algo in step.algorithms:
                factory = self.registry.get(algo.id)
                if factory is None:
                    raise comp.ComponentError(f"no component registered for algorithm {algo.id!r}")
                if factory.role != want:
                    raise comp.ComponentError(
                        f"algorithm {algo.id!r} has role {factory.role!r}, step "
                        f"{step.name!r} needs {want!r}")

    def _materialize_fold(self, fold: int):
        train_idx, valid_idx = self.folds.split(fold)
        return {
            "train_images": self.dataset.images[train_idx],
            "valid_images": self.dataset.images[valid_idx],
            "train_y": self.dataset.labels[train_idx],
            "valid_y": self.dataset.labels[valid_idx],
        }

    @property
    def total_executions(self) -> int:
        return sum(self._executions.values()) + self._final_executions

    def prefix_stats(self) -> dict[tuple[str, int], int]:
        """Execution count per (step-prefix configuration, fold) actually run."""
        return dict(self._executions)

    def executions_by_algorithm(self, step_index: int = 0) -> dict[str, int]:
        """Prefix executions of exactly ``step_index + 1`` steps, grouped by
        that step's algorithm id."""
        out: dict[str, int] = {}
        for (key, _fold), count in self._executions.items():
            items = json.loads(key)
            if len(items) == step_index + 1:
                algo = items[step_index]["algorithm"]
                out[algo] = out.get(algo, 0) + count
        return out

    def evaluate(self, config: Configuration) -> TrialRecord:
        """Cross-validated loss of one configuration, memoized by key.

        Component failures do not raise: the trial is recorded with a large
        finite penalty (ln(n_classes) * 10) and a failure flag so that search
        total orders stay well defined.
        """
        key = canonical_key(config)
        cached = self.ledger.get(key)
        if cached is not None:
            return cached
        validate_config(self.spec, config)
        started = time.perf_counter()
        failed = False
        losses: list[float] = []
        try:
            for fold in range(self.folds.k):
                losses.append(self._run_fold(config, fold))
        except (comp.ComponentError, np.linalg.LinAlgError):
            failed = True
            penalty = math.log(max(self.dataset.n_classes, 2)) * PENALTY_SCALE
            losses = [penalty] * self.folds.k
        record = TrialRecord(
            key=key, config=config, fold_losses=tuple(losses),
            mean_loss=sum(losses) / len(losses),
            wall_time=time.perf_counter() - started, seed=self.seed, failed=failed)
        return self.ledger.add(record)

    def _run_prefix_step(self, cache_key, algo_id, values, repr_train, repr_valid):
        """Execute one intermediate step, computing each (prefix, fold) once.

        Concurrent requests for the same key block on a per-key lock instead
        of duplicating work, so execution counters stay exact under --jobs.
        """
        def compute():
            instance = comp.build_component(algo_id, values, seed=0, registry=self.registry)
            if instance.role == comp.ROLE_EXTRACT:
                return instance.transform(repr_train), instance.transform(repr_valid)
            instance.fit(repr_train)
            return instance.transform(repr_train), instance.transform(repr_valid)

        if not self.prefix_caching:
            out = compute()
            with self._lock:
                self._executions[cache_key] = self._executions.get(cache_key, 0) + 1
            return out
        with self._lock:
            hit = self._prefix_cache.get(cache_key)
            if hit is not None:
                return hit
            gate = self._inflight.setdefault(cache_key, threading.Lock())
        with gate:
            with self._lock:
                hit = self._prefix_cache.get(cache_key)
                if hit is not None:
                    return hit
            out = compute()
            with self._lock:
                self._executions[cache_key] = self._executions.get(cache_key, 0) + 1
                self._prefix_cache[cache_key] = out
                self._inflight.pop(cache_key, None)
        return out

    def _run_fold(self, config: Configuration, fold: int) -> float:
        data = self._fold_data[fold]
        values = active_values(self.spec, config)
        repr_train: np.ndarray = data["train_images"]
        repr_valid: np.ndarray = data["valid_images"]
        items: list[dict] = []
        n_steps = len(self.spec.steps)
        for step in self.spec.steps[: n_steps - 1]:
            algo_id = config.path[step.index]
            items.append({"algorithm": algo_id, "values": values[step.index]})
            repr_train, repr_valid = self._run_prefix_step(
                (_prefix_key(items), fold), algo_id, values[step.index],
                repr_train, repr_valid)

        X_train, X_valid = np.asarray(repr_train, float), np.asarray(repr_valid, float)
        if X_train.ndim == 3:
            X_train = X_train.reshape(len(X_train), -1)
            X_valid = X_valid.reshape(len(X_valid), -1)
        if self.standardize:
            mu = X_train.mean(axis=0)
            sd = X_train.std(axis=0)
            sd[sd < 1e-12] = 1.0
            X_train = (X_train - mu) / sd
            X_valid = (X_valid - mu) / sd

        last = self.spec.steps[-1]
        algo_id = config.path[last.index]
        learner_seed = stable_seed(self.seed, _prefix_key(items), fold, algo_id)
        learner = comp.build_component(algo_id, values[last.index], seed=learner_seed,
                                       registry=self.registry)
        learner.fit(X_train, data["train_y"], self.dataset.n_classes)
        probs = learner.predict_proba(X_valid)
        with self._lock:
            self._final_executions += 1
        return cross_entropy(probs, data["valid_y"])


class LookupEvaluator:
    """Plants exact ground truth: every fold loss is the table value.

    Used to test attribution and propagation against brute-force oracles
    without running any real component.
    """

    def __init__(self, spec: PipelineSpec, table: Mapping[str, float], k: int | None = None):
        self.spec = spec
        self.table = dict(table)
        self.k = spec.folds if k is None else k
        digest = stable_digest(json.dumps(sorted(self.table.items())))
        self.ledger = TrialLedger(spec.fingerprint(), f"lookup:{digest}", f"lookup-k{self.k}")

    def evaluate(self, config: Configuration) -> TrialRecord:
        key = canonical_key(config)
        cached = self.ledger.get(key)
        if cached is not None:
            return cached
        validate_config(self.spec, config)
        if key not in self.table:
            raise LedgerError(f"lookup table has no entry for {key}")
        value = float(self.table[key])
        record = TrialRecord(key=key, config=config, fold_losses=(value,) * self.k,
                             mean_loss=value, wall_time=0.0, seed=0)
        return self.ledger.add(record)


def prefix_cache_stats(evaluator: PipelineEvaluator) -> dict[tuple[str, int], int]:
    """How many times each distinct (step-prefix configuration, fold) ran."""
    return evaluator.prefix_stats()

"""Grid, random, and surrogate-model search over the finite configuration grid.

All three work under both frameworks: whole-pipeline search (no restriction)
and per-path search (restriction to one PathId). Trials are memoized by the
evaluator's ledger, so no search ever executes a configuration twice.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import erf
from sklearn.ensemble import RandomForestRegressor

from .model import Configuration, PipelineSpec, canonical_key, enumerate_grid

TERMINATED_BUDGET = "budget"
TERMINATED_CONVERGENCE = "convergence"
TERMINATED_EXHAUSTION = "exhaustion"


@dataclass(frozen=True)
class SearchBudget:
    """Trial budget and convergence patience.

    ``patience=None`` disables convergence: the search runs to budget or grid
    exhaustion. Convergence counts trials without strict improvement of the
    running best, matching a fixed-iteration unchanging-value stop rule.
    """

    max_trials: int | None = None
    patience: int | None = 50

    def __post_init__(self):
        if self.max_trials is not None and self.max_trials < 1:
            raise ValueError("max_trials must be >= 1")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be >= 1")


@dataclass(frozen=True)
class SearchResult:
    best_key: str
    best_loss: float
    trial_sequence: tuple[str, ...]
    terminated_by: str

    def to_json(self) -> dict:
        return {
            "best_key": self.best_key,
            "best_loss": self.best_loss,
            "trials": len(self.trial_sequence),
            "trial_sequence": list(self.trial_sequence),
            "terminated_by": self.terminated_by,
        }


def _best_of(evaluator, keys) -> tuple[str, float]:
    best_key, record = evaluator.ledger.best(keys)
    return best_key, record.mean_loss


def grid_search(spec: PipelineSpec, evaluator, restrict=None, jobs: int = 1) -> SearchResult:
    """Evaluate every configuration under the restriction exactly once.

    Ties on the minimum break toward the lexicographically smaller canonical
    key. Evaluation order is the enumeration order; with ``jobs > 1`` trials
    run on a thread pool (records are order-independent).
    """
    configs = enumerate_grid(spec, restrict)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(evaluator.evaluate, configs))
    else:
        for config in configs:
            evaluator.evaluate(config)
    sequence = tuple(canonical_key(c) for c in configs)
    best_key, best_loss = _best_of(evaluator, sequence)
    return SearchResult(best_key, best_loss, sequence, TERMINATED_EXHAUSTION)


def random_search(spec: PipelineSpec, evaluator, restrict=None,
                  budget: SearchBudget = SearchBudget(), seed: int = 0) -> SearchResult:
    """Uniform sampling without replacement from the enumerated grid.

    Sampling without replacement makes budget equal coverage: with
    ``max_trials`` equal to the grid size (and patience off) the ledger is
    exactly the grid-search ledger.
    """
    configs = enumerate_grid(spec, restrict)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(configs))
    sequence: list[str] = []
    best: float | None = None
    stall = 0
    terminated = TERMINATED_EXHAUSTION
    for n, idx in enumerate(order):
        record = evaluator.evaluate(configs[idx])
        sequence.append(record.key)
        if best is None or record.mean_loss < best:
            best = record.mean_loss
            stall = 0
        else:
            stall += 1
        if budget.patience is not None and stall >= budget.patience:
            terminated = TERMINATED_CONVERGENCE
            break
        if budget.max_trials is not None and len(sequence) >= budget.max_trials and n + 1 < len(order):
            terminated = TERMINATED_BUDGET
            break
    best_key, best_loss = _best_of(evaluator, sequence)
    return SearchResult(best_key, best_loss, tuple(sequence), terminated)


def encoding_width(spec: PipelineSpec) -> int:
    return len(spec.steps) + len(spec.hyperparameter_slots())


def encode_config(config: Configuration, spec: PipelineSpec) -> np.ndarray:
    """Numeric surrogate encoding: one algorithm-index slot per step, one
    domain-index slot per hyperparameter in the spec, -1 where inactive."""
    vec = np.empty(encoding_width(spec))
    values = config.values
    for step in spec.steps:
        ids = [a.id for a in step.algorithms]
        vec[step.index] = ids.index(config.path[step.index])
    offset = len(spec.steps)
    for slot, (step_index, algo_id, domain) in enumerate(spec.hyperparameter_slots()):
        if config.path[step_index] == algo_id:
            vec[offset + slot] = domain.index_of(values[domain.name])
        else:
            vec[offset + slot] = -1.0
    return vec


def _expected_improvement(mu: np.ndarray, sigma: np.ndarray, incumbent: float) -> np.ndarray:
    gap = incumbent - mu
    out = np.maximum(gap, 0.0)
    positive = sigma > 0.0
    if np.any(positive):
        u = gap[positive] / sigma[positive]
        cdf = 0.5 * (1.0 + erf(u / math.sqrt(2.0)))
        pdf = np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
        out[positive] = gap[positive] * cdf + sigma[positive] * pdf
    return out


def smbo_search(spec: PipelineSpec, evaluator, restrict=None,
                budget: SearchBudget = SearchBudget(), seed: int = 0,
                init_trials: int = 10, surrogate_trees: int = 10,
                candidate_pool: int = 500) -> SearchResult:
    """Sequential model-based search: random-forest surrogate plus expected
    improvement.

    Starts with ``init_trials`` pure random trials, then repeatedly fits a
    regression forest on (encoded configuration -> mean loss), scores a random
    pool of unseen candidates by expected improvement using the across-tree
    mean and sample variance, and evaluates the argmax. Zero-variance
    candidates score max(0, incumbent - mean). Convergence counting starts
    after initialization.
    """
    configs = enumerate_grid(spec, restrict)
    encoded = np.stack([encode_config(c, spec) for c in configs])
    rng = np.random.default_rng(seed)
    unseen = list(range(len(configs)))
    sequence: list[str] = []
    X: list[np.ndarray] = []
    y: list[float] = []
    best = math.inf

    def run_trial(idx: int) -> None:
        nonlocal best
        record = evaluator.evaluate(configs[idx])
        sequence.append(record.key)
        unseen.remove(idx)
        X.append(encoded[idx])
        y.append(record.mean_loss)
        best = min(best, record.mean_loss)

    n_init = min(init_trials, len(configs))
    if budget.max_trials is not None:
        n_init = min(n_init, budget.max_trials)
    for idx in rng.choice(len(configs), size=n_init, replace=False):
        run_trial(int(idx))

    terminated = TERMINATED_EXHAUSTION
    stall = 0
    while True:
        if not unseen:
            terminated = TERMINATED_EXHAUSTION
            break
        if budget.max_trials is not None and len(sequence) >= budget.max_trials:
            terminated = TERMINATED_BUDGET
            break
        forest = RandomForestRegressor(
            n_estimators=surrogate_trees, bootstrap=True, min_samples_leaf=1,
            random_state=int(rng.integers(2 ** 31)), n_jobs=1)
        forest.fit(np.stack(X), np.asarray(y))
        pool_size = min(candidate_pool, len(unseen))
        pool = rng.choice(np.asarray(unseen), size=pool_size, replace=False)
        cand = encoded[pool]
        per_tree = np.stack([tree.predict(cand) for tree in forest.estimators_])
        mu = per_tree.mean(axis=0)
        sigma = per_tree.std(axis=0, ddof=1) if len(per_tree) > 1 else np.zeros_like(mu)
        ei = _expected_improvement(mu, sigma, best)
        previous_best = best
        run_trial(int(pool[int(np.argmax(ei))]))
        if best < previous_best:
            stall = 0
        else:
            stall += 1
        if budget.patience is not None and stall >= budget.patience:
            terminated = TERMINATED_CONVERGENCE
            break
    best_key, best_loss = _best_of(evaluator, sequence)
    return SearchResult(best_key, best_loss, tuple(sequence), terminated)


OPTIMIZERS = ("grid", "random", "smbo")


def run_search(optimizer: str, spec: PipelineSpec, evaluator, restrict=None,
               budget: SearchBudget = SearchBudget(), seed: int = 0,
               jobs: int = 1, **smbo_options) -> SearchResult:
    """Dispatch by optimizer name; grid ignores budget and seed."""
    if optimizer == "grid":
        return grid_search(spec, evaluator, restrict, jobs=jobs)
    if optimizer == "random":
        return random_search(spec, evaluator, restrict, budget=budget, seed=seed)
    if optimizer == "smbo":
        return smbo_search(spec, evaluator, restrict, budget=budget, seed=seed, **smbo_options)
    raise ValueError(f"unknown optimizer {optimizer!r}")

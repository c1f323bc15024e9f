import numpy as np
import pytest

import pipegrader as pg
from pipegrader.evaluate import LookupEvaluator
from pipegrader.model import canonical_key
from pipegrader.optimize import SearchBudget, encode_config, encoding_width

from conftest import fill_table, hash_loss

PATH = ("haralick", "isomap", "rf")


def path_lookup(salt="", planted_min=None):
    spec = pg.default_spec()
    grid = pg.enumerate_grid(spec, PATH)
    table = {canonical_key(c): hash_loss(canonical_key(c), salt, 0.2, 1.0) for c in grid}
    if planted_min is not None:
        table[canonical_key(grid[planted_min])] = 0.01
    return spec, grid, table


def test_grid_search_enumerates_everything_once():
    spec, grid, table = path_lookup(planted_min=123)
    ev = LookupEvaluator(spec, table)
    result = pg.grid_search(spec, ev, PATH)
    assert len(result.trial_sequence) == 900
    assert len(set(result.trial_sequence)) == 900
    assert result.best_key == canonical_key(grid[123])
    assert result.terminated_by == "exhaustion"
    assert len(ev.ledger) == 900


def test_grid_search_breaks_ties_lexicographically():
    spec, grid, table = path_lookup()
    keys = sorted(canonical_key(c) for c in grid)
    table[keys[10]] = 0.005
    table[keys[500]] = 0.005
    result = pg.grid_search(spec, LookupEvaluator(spec, table), PATH)
    assert result.best_key == keys[10]


def test_random_search_exhaustion_equals_grid():
    spec, grid, table = path_lookup(salt="x")
    grid_result = pg.grid_search(spec, LookupEvaluator(spec, table), PATH)
    ev = LookupEvaluator(spec, table)
    result = pg.random_search(spec, ev, PATH,
                              budget=SearchBudget(max_trials=900, patience=None), seed=11)
    assert result.terminated_by == "exhaustion"
    assert set(result.trial_sequence) == set(grid_result.trial_sequence)
    assert result.best_loss == grid_result.best_loss
    assert result.best_key == grid_result.best_key


def test_random_search_deterministic_under_seed():
    spec, grid, table = path_lookup(salt="y")
    r1 = pg.random_search(spec, LookupEvaluator(spec, table), PATH,
                          budget=SearchBudget(50, None), seed=4)
    r2 = pg.random_search(spec, LookupEvaluator(spec, table), PATH,
                          budget=SearchBudget(50, None), seed=4)
    r3 = pg.random_search(spec, LookupEvaluator(spec, table), PATH,
                          budget=SearchBudget(50, None), seed=5)
    assert r1.trial_sequence == r2.trial_sequence
    assert r1.trial_sequence != r3.trial_sequence
    assert r1.terminated_by == "budget"


def test_random_search_hit_rate_matches_hypergeometric():
    # without replacement, P(hit unique optimum in 450 of 900) = 0.5 exactly
    spec, grid, table = path_lookup(salt="z", planted_min=77)
    target = canonical_key(grid[77])
    hits = 0
    runs = 200
    for seed in range(runs):
        ev = LookupEvaluator(spec, table)
        result = pg.random_search(spec, ev, PATH, budget=SearchBudget(450, None), seed=seed)
        hits += result.best_key == target
    assert abs(hits / runs - 0.5) <= 0.07


def test_random_search_convergence_counts_trials():
    spec, grid, table = path_lookup()
    table = {k: 0.5 for k in table}
    result = pg.random_search(spec, LookupEvaluator(spec, table), PATH,
                              budget=SearchBudget(None, patience=7), seed=0)
    assert result.terminated_by == "convergence"
    assert len(result.trial_sequence) == 1 + 7  # first trial improves from +inf


def test_smbo_initialization_is_pure_random():
    spec, grid, table = path_lookup(salt="q")
    short = pg.smbo_search(spec, LookupEvaluator(spec, table), PATH,
                           budget=SearchBudget(10, None), seed=21)
    longer = pg.smbo_search(spec, LookupEvaluator(spec, table), PATH,
                            budget=SearchBudget(15, None), seed=21)
    assert len(short.trial_sequence) == 10
    assert longer.trial_sequence[:10] == short.trial_sequence
    rng = np.random.default_rng(21)
    expected = [canonical_key(grid[int(i)])
                for i in rng.choice(len(grid), size=10, replace=False)]
    assert list(short.trial_sequence) == expected


def test_smbo_constant_objective_converges_after_init_plus_patience():
    spec, grid, table = path_lookup()
    table = {k: 0.5 for k in table}
    result = pg.smbo_search(spec, LookupEvaluator(spec, table), PATH,
                            budget=SearchBudget(None, patience=6), seed=2)
    assert result.terminated_by == "convergence"
    assert len(result.trial_sequence) == 10 + 6


def test_smbo_sequences_stay_inside_grid_without_duplicates():
    spec, grid, table = path_lookup(salt="w")
    keys = {canonical_key(c) for c in grid}
    result = pg.smbo_search(spec, LookupEvaluator(spec, table), PATH,
                            budget=SearchBudget(60, None), seed=3)
    assert len(result.trial_sequence) == 60
    assert len(set(result.trial_sequence)) == 60
    assert set(result.trial_sequence) <= keys


def test_running_minimum_non_increasing():
    spec, grid, table = path_lookup(salt="r")
    ev = LookupEvaluator(spec, table)
    result = pg.random_search(spec, ev, PATH, budget=SearchBudget(120, None), seed=9)
    losses = [ev.ledger.records[k].mean_loss for k in result.trial_sequence]
    running = np.minimum.accumulate(losses)
    assert np.all(np.diff(running) <= 0.0 + 1e-15)
    assert result.best_loss == running[-1]


def test_smbo_finds_smooth_optimum_on_small_grid():
    spec = pg.default_spec()
    grid = pg.enumerate_grid(spec, ("cnn", "isomap", "rf"))  # 225 configurations
    targets = {"n-neighbors": 2.3, "n-components": 0.4, "n-estimators": 3.3,
               "max-features": 1.4}
    domains = {h.name: h for _, _, h in spec.hyperparameter_slots()}

    def bowl(config):
        return sum((domains[n].index_of(config.value(n)) - t) ** 2
                   for n, t in targets.items()) / 30.0

    table = {canonical_key(c): bowl(c) for c in grid}
    best = min(table, key=lambda k: (table[k], k))
    ev = LookupEvaluator(spec, table)
    result = pg.smbo_search(spec, ev, ("cnn", "isomap", "rf"),
                            budget=SearchBudget(120, None), seed=0)
    assert result.best_key == best


def test_encode_config_width_and_sentinels():
    spec = pg.default_spec()
    assert encoding_width(spec) == 3 + 8
    config = pg.Configuration.make(
        ("cnn", "pca", "rf"),
        {"whitening": "true", "n-estimators": "8", "max-features": "0.3"})
    vec = encode_config(config, spec)
    assert len(vec) == 11
    # slot 3 is haralick-distance, inactive on a cnn path
    assert vec[3] == -1.0
    assert vec[0] == 1.0  # cnn is the second algorithm of step 0


def test_encode_config_injective_on_grid():
    spec = pg.default_spec()
    grid = pg.enumerate_grid(spec)
    encoded = {tuple(encode_config(c, spec)) for c in grid}
    assert len(encoded) == len(grid)


def test_budget_validation():
    with pytest.raises(ValueError):
        SearchBudget(max_trials=0)
    with pytest.raises(ValueError):
        SearchBudget(patience=0)
    with pytest.raises(ValueError):
        pg.run_search("annealing", pg.default_spec(), None)

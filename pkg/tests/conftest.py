"""Shared builders: small specs, lookup tables, brute-force oracles."""
from __future__ import annotations

import hashlib
import math

import numpy as np
import pytest

import pipegrader as pg
from pipegrader.model import Restriction, canonical_key


def make_spec(steps, metric="cross-entropy", folds=5):
    return pg.load_spec({"metric": metric, "folds": folds, "steps": steps})


def algo(algo_id, hyperparameters=(), naive=False):
    return {"id": algo_id, "naive": naive, "hyperparameters": list(hyperparameters)}


def hp(name, values, kind="categorical"):
    return {"name": name, "kind": kind, "values": list(values)}


def two_step_spec():
    """Two steps with one naive algorithm each; 2x2-valued hyperparameters."""
    return make_spec([
        {"name": "first", "algorithms": [
            algo("A", [hp("a", ["0", "1"])]),
            algo("B", [hp("b", ["0", "1"])]),
            algo("N0", naive=True)]},
        {"name": "second", "algorithms": [
            algo("C", [hp("c", ["0", "1"])]),
            algo("N1", naive=True)]},
    ])


def fill_table(spec, table, restrict, value):
    """Assign `value` (or value(config)) to every configuration under restrict."""
    for config in pg.enumerate_grid(spec, restrict):
        table[canonical_key(config)] = value(config) if callable(value) else value
    return table


def hash_loss(key: str, salt: str = "", lo: float = 0.0, hi: float = 1.0) -> float:
    """Deterministic pseudo-random loss in [lo, hi) from a configuration key."""
    digest = hashlib.sha256((salt + key).encode()).digest()
    return lo + (hi - lo) * int.from_bytes(digest[:8], "big") / 2 ** 64


def random_small_spec(rng: np.random.Generator):
    """A random 2-3 step pipeline with a naive algorithm per step."""
    steps = []
    for i in range(int(rng.integers(2, 4))):
        algos = []
        for j in range(int(rng.integers(1, 4))):
            domains = []
            for k in range(int(rng.integers(0, 3))):
                size = int(rng.integers(1, 5))
                domains.append(hp(f"h{i}_{j}_{k}", [f"v{z}" for z in range(size)]))
            algos.append(algo(f"s{i}a{j}", domains))
        algos.append(algo(f"s{i}naive", naive=True))
        steps.append({"name": f"step{i}", "algorithms": algos})
    return make_spec(steps)


# --- brute-force oracles over a lookup table (independent of the ledger) ---


def oracle_steps(spec, table):
    """Direct evaluation of the per-step contribution formula on a table."""
    grid = pg.enumerate_grid(spec)
    losses = {canonical_key(c): table[canonical_key(c)] for c in grid}
    reference = min(losses.values())
    out = {}
    for step in spec.steps:
        cell_minima = []
        for a in step.non_naive():
            cell = [losses[canonical_key(c)] for c in grid if c.path[step.index] == a.id]
            cell_minima.append(min(cell))
        out[step.name] = sum(cell_minima) / len(cell_minima) - reference
    return out


def oracle_algorithms(spec, table, path):
    grid = pg.enumerate_grid(spec, path)
    losses = {canonical_key(c): table[canonical_key(c)] for c in grid}
    reference = min(losses.values())
    out = {}
    for step, algo_id in zip(spec.steps, path):
        target = step.algorithm(algo_id)
        names = [h.name for h in target.hyperparameters]
        cell_minima = []
        for z in target.grid():
            cell = [losses[canonical_key(c)] for c in grid
                    if all(c.value(n) == z[n] for n in names)]
            cell_minima.append(min(cell))
        out[algo_id] = sum(cell_minima) / len(cell_minima) - reference
    return out


def oracle_hyperparameters(spec, table, path, targets):
    grid = pg.enumerate_grid(spec, path)
    losses = {canonical_key(c): table[canonical_key(c)] for c in grid}
    reference = min(losses.values())
    domains = {h.name: h.values for step, a in zip(spec.steps, path)
               for h in step.algorithm(a).hyperparameters}
    out = {}
    for name in targets:
        cell_minima = []
        for token in domains[name]:
            cell = [losses[canonical_key(c)] for c in grid if c.value(name) == token]
            cell_minima.append(min(cell))
        out[name] = sum(cell_minima) / len(cell_minima) - reference
    return out


def planted_propagation_table(spec, alpha, gamma, delta_e3, base=0.1):
    """Lookup table whose constrained searches yield a chosen (alpha, gamma).

    Built for two_step_spec() with the first step as the component, via the
    model equations run forward: delta_e1 = alpha * (1 + gamma) and
    delta_e2 = alpha + gamma * (alpha + delta_e3).
    """
    e_oo = base
    e_ao = e_oo + alpha * (1.0 + gamma)
    e_no = base + 0.05
    e_nn = e_no + delta_e3
    e_on = base + 0.02
    e_an = e_on + alpha + gamma * (alpha + delta_e3)
    table: dict[str, float] = {}
    fill_table(spec, table, Restriction.make({0: ("A",)}), e_oo)
    fill_table(spec, table, Restriction.make({0: ("B",)}), 2.0 * e_ao - e_oo)
    fill_table(spec, table, Restriction.make({0: ("A",), 1: ("N1",)}), e_on)
    fill_table(spec, table, Restriction.make({0: ("B",), 1: ("N1",)}), 2.0 * e_an - e_on)
    fill_table(spec, table, Restriction.make({0: ("N0",)}), e_no)
    fill_table(spec, table, Restriction.make({0: ("N0",), 1: ("N1",)}), e_nn)
    expected = {
        "e_opt_opt": e_oo, "e_agnostic_opt": e_ao, "e_naive_opt": e_no,
        "e_opt_naive": e_on, "e_naive_naive": e_nn, "e_agnostic_naive": e_an,
    }
    return table, expected


def path_with_naive_tables(salt: str):
    """Lookup tables covering one HPO path plus all naive-substituted grids.

    Covers every constrained search that step/algorithm/hyperparameter
    propagation on the default path can issue.
    """
    spec = pg.default_spec()
    path = ("haralick", "isomap", "rf")
    naive = {0: "naive-downsample", 1: "identity", 2: "1nn"}
    table: dict[str, float] = {}
    for down_naive in (set(), {1, 2}, {2}):
        for current in ({}, {0: (naive[0],)}, {1: (naive[1],)}, {2: (naive[2],)}):
            steps = {i: (a,) for i, a in enumerate(path)}
            for i in down_naive:
                steps[i] = (naive[i],)
            steps.update(current)
            fill_table(spec, table, Restriction.make(steps),
                       lambda c: hash_loss(canonical_key(c), salt))
    return spec, path, table


def tiny_image_dataset(counts, seed=0, size=4):
    """Minimal labeled dataset for split/fold/evaluator plumbing tests."""
    rng = np.random.default_rng(seed)
    n = sum(counts)
    images = rng.uniform(0.0, 1.0, size=(n, size, size))
    labels = np.repeat(np.arange(len(counts)), counts)
    return pg.ImageDataset(images, labels.astype(np.int64),
                           tuple(f"c{i}" for i in range(len(counts))), seed)

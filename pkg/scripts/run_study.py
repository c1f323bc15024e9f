#!/usr/bin/env python3
"""Run the full desk-scale study: grid versus random search, all scopes.

Writes everything under one directory:

    results/
      grid/     whole-pipeline grid ledger + per-step contributions
      grid-hpo/ path grid ledger + algorithm/hyperparameter contributions
      rand/     seeded random-search counterparts of both
      prop/     propagation reports (steps + algorithms + hyperparameters)
      compare_<scope>.json

Use --quick for a reduced version (2 folds, small budgets) that finishes in a
couple of minutes.
"""
import argparse
import os
import shutil
import sys

from pipegrader.cli import main as cli


def run(*args):
    code = cli(list(args))
    if code != 0:
        sys.exit(code)


def main():
    parser = argparse.ArgumentParser(description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--out", default="results")
    parser.add_argument("--dataset", default="balanced-small")
    parser.add_argument("--seeds", default="5")
    parser.add_argument("--jobs", default="2")
    parser.add_argument("--quick", action="store_true",
                        help="2 folds and small budgets instead of the full study")
    args = parser.parse_args()

    folds = ["--folds", "2"] if args.quick else []
    cash_budget = "60" if args.quick else "1275"
    hpo_budget = "40" if args.quick else "450"
    # grid ignores budgets, so quick mode estimates propagation from random search
    prop = ["--optimizer", "random", "--budget", "25", "--patience", "0",
            "--seeds", "1"] if args.quick else ["--optimizer", "grid"]
    shared = ["--dataset", args.dataset, "--jobs", args.jobs, *folds]

    grid_dir = os.path.join(args.out, "grid")
    grid_hpo_dir = os.path.join(args.out, "grid-hpo")
    rand_dir = os.path.join(args.out, "rand")
    rand_hpo_dir = os.path.join(args.out, "rand-hpo")
    prop_dir = os.path.join(args.out, "prop")

    # gold standard: exhaustive grids
    run("optimize", "--optimizer", "grid", "--framework", "cash", "--out", grid_dir, *shared)
    run("contrib", "--scope", "steps", "--optimizer", "grid", "--out", grid_dir, *shared)
    run("optimize", "--optimizer", "grid", "--framework", "hpo", "--out", grid_hpo_dir, *shared)
    run("contrib", "--scope", "algorithms", "--optimizer", "grid", "--out", grid_hpo_dir, *shared)
    run("contrib", "--scope", "hyperparameters", "--optimizer", "grid", "--out", grid_hpo_dir, *shared)

    # random-search estimates at half budget, averaged over seeds
    run("contrib", "--scope", "steps", "--optimizer", "random", "--run-search",
        "--budget", cash_budget, "--seeds", args.seeds, "--allow-partial",
        "--out", rand_dir, *shared)
    for scope in ("algorithms", "hyperparameters"):
        run("contrib", "--scope", scope, "--optimizer", "random", "--run-search",
            "--budget", hpo_budget, "--seeds", args.seeds, "--allow-partial",
            "--out", rand_hpo_dir, *shared)

    # propagation from the naive-benchmark model (grid = exact)
    for scope in ("steps", "algorithms", "hyperparameters"):
        run("propagate", "--scope", scope, "--out", prop_dir, *shared, *prop)

    # estimator fidelity tables
    run("compare", os.path.join(grid_dir, "contrib_steps.json"),
        os.path.join(rand_dir, "contrib_steps.json"), "--out", args.out)
    shutil.move(os.path.join(args.out, "compare.json"),
                os.path.join(args.out, "compare_steps.json"))
    for scope in ("algorithms", "hyperparameters"):
        run("compare", os.path.join(grid_hpo_dir, f"contrib_{scope}.json"),
            os.path.join(rand_hpo_dir, f"contrib_{scope}.json"), "--out", args.out)
        shutil.move(os.path.join(args.out, "compare.json"),
                    os.path.join(args.out, f"compare_{scope}.json"))
    print(f"study complete; reports under {args.out}/")


if __name__ == "__main__":
    main()

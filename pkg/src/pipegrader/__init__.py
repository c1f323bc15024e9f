"""pipegrader: pipeline optimization with per-component error attribution."""

__version__ = "0.1.0"

from .model import (AlgorithmSpec, Configuration, HyperparameterDomain, PathId,
                    PipelineSpec, Restriction, SpecError, StepSpec, canonical_key,
                    enumerate_grid, enumerate_paths, grid_size, load_spec, read_spec,
                    validate_config, validate_path)
from .data import (DatasetError, FoldPlan, ImageDataset, cross_entropy,
                   generate_texture_dataset, make_folds, split_train_test)
from .components import (ComponentError, DegenerateInputError, default_document,
                         default_spec, frozen_projection_features, haralick_features,
                         isomap_fit_transform, kernel_classifier, naive_components,
                         pca_fit_transform, random_forest)
from .evaluate import (LedgerError, LookupEvaluator, PipelineEvaluator, TrialLedger,
                       TrialRecord, prefix_cache_stats)
from .optimize import (SearchBudget, SearchResult, encode_config, grid_search,
                       random_search, run_search, smbo_search)
from .attribution import (ContributionEntry, ContributionReport, CoverageError,
                          aggregate_over_seeds, contribution_algorithms,
                          contribution_hyperparameters, contribution_steps,
                          default_analysis_path, default_targets, ensure_coverage)
from .propagation import (NaiveErrorSextuple, PropagationResult, PropagationSummary,
                          compute_sextuple, propagation_report, solve_deltas,
                          solve_propagation)
from .reporting import compare_reports, scrub_wall_time, spearman

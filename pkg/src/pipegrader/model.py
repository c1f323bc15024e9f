"""Pipeline topology: steps, algorithms, hyperparameter domains, configurations.

Everything here is immutable after loading and safe to share across threads.
Hyperparameter values are carried as canonical decimal-string tokens so that
configuration keys are bit-exact across runs and platforms; use
:meth:`HyperparameterDomain.runtime` to convert a token back to its Python
value.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import product
from typing import Mapping, Sequence

from .util import stable_digest

KINDS = ("integer", "real-discretized", "boolean", "categorical")


class SpecError(ValueError):
    """A pipeline document violates the schema or an invariant."""


def _tokenize(kind: str, raw: object) -> str:
    if kind == "integer":
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise SpecError(f"integer domain got non-integer value {raw!r}")
        return str(raw)
    if kind == "real-discretized":
        if isinstance(raw, bool):
            raise SpecError(f"real domain got boolean value {raw!r}")
        if isinstance(raw, float):
            return repr(raw)
        if isinstance(raw, int):
            return str(raw)
        if isinstance(raw, str):
            try:
                value = float(raw)
            except ValueError:
                raise SpecError(f"real domain got unparseable value {raw!r}") from None
            if value != value or value in (float("inf"), float("-inf")):
                raise SpecError(f"real domain got non-finite value {raw!r}")
            return raw
        raise SpecError(f"real domain got unsupported value {raw!r}")
    if kind == "boolean":
        if not isinstance(raw, bool):
            raise SpecError(f"boolean domain got non-boolean value {raw!r}")
        return "true" if raw else "false"
    if kind == "categorical":
        if not isinstance(raw, str) or not raw:
            raise SpecError(f"categorical domain got non-string value {raw!r}")
        return raw
    raise SpecError(f"unknown hyperparameter kind {kind!r}")


@dataclass(frozen=True)
class HyperparameterDomain:
    """A named, finite, ordered value domain for one hyperparameter."""

    name: str
    kind: str
    values: tuple[str, ...]  # canonical tokens, document order

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown hyperparameter kind {self.kind!r}")
        if not self.values:
            raise SpecError(f"hyperparameter {self.name!r} has an empty domain")
        if len(set(self.values)) != len(self.values):
            raise SpecError(f"hyperparameter {self.name!r} has duplicate values")
        runtime = [self.runtime(t) for t in self.values]
        if len(set(runtime)) != len(runtime):
            raise SpecError(f"hyperparameter {self.name!r} has numerically duplicate values")

    def runtime(self, token: str) -> object:
        if self.kind == "integer":
            return int(token)
        if self.kind == "real-discretized":
            return float(token)
        if self.kind == "boolean":
            return token == "true"
        return token

    def index_of(self, token: str) -> int:
        return self.values.index(token)

    def document_values(self) -> list:
        return [self.runtime(t) if self.kind != "real-discretized" else float(t) for t in self.values]


@dataclass(frozen=True)
class AlgorithmSpec:
    """One candidate algorithm inside a step, with its hyperparameter domains."""

    id: str
    step_index: int
    hyperparameters: tuple[HyperparameterDomain, ...] = ()
    is_naive: bool = False

    def __post_init__(self):
        if self.is_naive and self.hyperparameters:
            raise SpecError(f"naive algorithm {self.id!r} must not declare hyperparameters")
        names = [h.name for h in self.hyperparameters]
        if len(set(names)) != len(names):
            raise SpecError(f"algorithm {self.id!r} repeats a hyperparameter name")

    def config_count(self) -> int:
        n = 1
        for h in self.hyperparameters:
            n *= len(h.values)
        return n

    def grid(self) -> list[dict[str, str]]:
        """Every full hyperparameter assignment of this algorithm, domain order."""
        names = [h.name for h in self.hyperparameters]
        return [dict(zip(names, combo)) for combo in product(*(h.values for h in self.hyperparameters))]


@dataclass(frozen=True)
class StepSpec:
    name: str
    index: int
    algorithms: tuple[AlgorithmSpec, ...]

    def __post_init__(self):
        if not self.algorithms:
            raise SpecError(f"step {self.name!r} has no algorithms")
        ids = [a.id for a in self.algorithms]
        if len(set(ids)) != len(ids):
            raise SpecError(f"step {self.name!r} has duplicate algorithm ids")
        naives = [a for a in self.algorithms if a.is_naive]
        if len(naives) > 1:
            raise SpecError(f"step {self.name!r} has more than one naive algorithm")
        if not self.non_naive():
            raise SpecError(f"step {self.name!r} has no non-naive algorithm")

    def algorithm(self, algo_id: str) -> AlgorithmSpec:
        for a in self.algorithms:
            if a.id == algo_id:
                return a
        raise SpecError(f"step {self.name!r} has no algorithm {algo_id!r}")

    def non_naive(self) -> tuple[AlgorithmSpec, ...]:
        return tuple(a for a in self.algorithms if not a.is_naive)

    def naive(self) -> AlgorithmSpec | None:
        for a in self.algorithms:
            if a.is_naive:
                return a
        return None


@dataclass(frozen=True)
class PipelineSpec:
    """Validated pipeline topology; steps are in dataflow order."""

    steps: tuple[StepSpec, ...]
    metric: str = "cross-entropy"
    folds: int = 5

    def __post_init__(self):
        if not self.steps:
            raise SpecError("pipeline needs at least one step")
        if self.metric != "cross-entropy":
            raise SpecError(f"unsupported metric {self.metric!r}")
        if not isinstance(self.folds, int) or self.folds < 2:
            raise SpecError("folds must be an integer >= 2")
        seen: dict[str, int] = {}
        for step in self.steps:
            for algo in step.algorithms:
                for hp in algo.hyperparameters:
                    owner = seen.setdefault(hp.name, step.index)
                    if owner != step.index:
                        raise SpecError(
                            f"hyperparameter {hp.name!r} appears in two different steps"
                        )

    def algorithm(self, step_index: int, algo_id: str) -> AlgorithmSpec:
        return self.steps[step_index].algorithm(algo_id)

    def naive_id(self, step_index: int) -> str:
        naive = self.steps[step_index].naive()
        if naive is None:
            raise SpecError(f"step {self.steps[step_index].name!r} has no naive algorithm")
        return naive.id

    def hyperparameter_slots(self) -> tuple[tuple[int, str, HyperparameterDomain], ...]:
        """All (step index, algorithm id, domain) rows in document order."""
        slots = []
        for step in self.steps:
            for algo in step.algorithms:
                for hp in algo.hyperparameters:
                    slots.append((step.index, algo.id, hp))
        return tuple(slots)

    def document(self) -> dict:
        return {
            "metric": self.metric,
            "folds": self.folds,
            "steps": [
                {
                    "name": step.name,
                    "algorithms": [
                        {
                            "id": algo.id,
                            "naive": algo.is_naive,
                            "hyperparameters": [
                                {"name": h.name, "kind": h.kind, "values": h.document_values()}
                                for h in algo.hyperparameters
                            ],
                        }
                        for algo in step.algorithms
                    ],
                }
                for step in self.steps
            ],
        }

    def fingerprint(self) -> str:
        canon = {
            "metric": self.metric,
            "folds": self.folds,
            "steps": [
                [
                    (a.id, a.is_naive, [(h.name, h.kind, list(h.values)) for h in a.hyperparameters])
                    for a in s.algorithms
                ]
                for s in self.steps
            ],
        }
        return stable_digest(json.dumps(canon, sort_keys=True))


PathId = tuple[str, ...]


@dataclass(frozen=True)
class Configuration:
    """One algorithm per step plus a token for every active hyperparameter."""

    path: PathId
    assignments: tuple[tuple[str, str], ...]  # sorted (name, token) pairs

    @classmethod
    def make(cls, path: Sequence[str], values: Mapping[str, str] | None = None) -> "Configuration":
        items = tuple(sorted((values or {}).items()))
        return cls(tuple(path), items)

    @property
    def values(self) -> dict[str, str]:
        return dict(self.assignments)

    def value(self, name: str) -> str:
        for key, token in self.assignments:
            if key == name:
                return token
        raise KeyError(name)


def canonical_key(config: Configuration) -> str:
    """Injective, platform-stable string identity of a configuration."""
    return json.dumps(
        {"path": list(config.path), "values": dict(config.assignments)},
        sort_keys=True,
        separators=(",", ":"),
    )


def _require_keys(obj: Mapping, allowed: set[str], required: set[str], what: str) -> None:
    if not isinstance(obj, Mapping):
        raise SpecError(f"{what} must be an object")
    extra = set(obj) - allowed
    if extra:
        raise SpecError(f"{what} has unknown fields {sorted(extra)}")
    missing = required - set(obj)
    if missing:
        raise SpecError(f"{what} is missing fields {sorted(missing)}")


def load_spec(document: Mapping) -> PipelineSpec:
    """Validate a parsed spec document and build the immutable PipelineSpec.

    Rejects unknown fields at every level; value order inside hyperparameter
    domains is preserved exactly as given.
    """
    _require_keys(document, {"steps", "metric", "folds"}, {"steps", "metric", "folds"}, "document")
    raw_steps = document["steps"]
    if not isinstance(raw_steps, Sequence) or isinstance(raw_steps, (str, bytes)):
        raise SpecError("steps must be an array")
    steps = []
    for i, raw_step in enumerate(raw_steps):
        _require_keys(raw_step, {"name", "algorithms"}, {"name", "algorithms"}, f"step {i}")
        algos = []
        for raw_algo in raw_step["algorithms"]:
            _require_keys(raw_algo, {"id", "naive", "hyperparameters"}, {"id"}, f"algorithm in step {i}")
            domains = []
            for raw_hp in raw_algo.get("hyperparameters", ()):
                _require_keys(raw_hp, {"name", "kind", "values"}, {"name", "kind", "values"},
                              f"hyperparameter of {raw_algo['id']!r}")
                tokens = tuple(_tokenize(raw_hp["kind"], v) for v in raw_hp["values"])
                domains.append(HyperparameterDomain(raw_hp["name"], raw_hp["kind"], tokens))
            algos.append(AlgorithmSpec(
                id=raw_algo["id"],
                step_index=i,
                hyperparameters=tuple(domains),
                is_naive=bool(raw_algo.get("naive", False)),
            ))
        steps.append(StepSpec(name=raw_step["name"], index=i, algorithms=tuple(algos)))
    folds = document["folds"]
    if not isinstance(folds, int) or isinstance(folds, bool):
        raise SpecError("folds must be an integer")
    return PipelineSpec(steps=tuple(steps), metric=document["metric"], folds=folds)


def read_spec(path: str) -> PipelineSpec:
    """Load a spec from a JSON file, keeping reals as their document text."""
    with open(path, "r", encoding="utf-8") as fh:
        document = json.load(fh, parse_float=str)
    return load_spec(document)


@dataclass(frozen=True)
class Restriction:
    """A partial freeze of the search space.

    ``step_algorithms`` narrows the admissible algorithms of a step (naive ids
    allowed here); ``pinned`` fixes a hyperparameter to one token wherever its
    owning algorithm is active. Steps not mentioned default to their non-naive
    algorithms.
    """

    step_algorithms: tuple[tuple[int, tuple[str, ...]], ...] = ()
    pinned: tuple[tuple[str, str], ...] = ()

    @classmethod
    def make(cls, step_algorithms: Mapping[int, Sequence[str]] | None = None,
             pinned: Mapping[str, str] | None = None) -> "Restriction":
        steps = tuple(sorted((i, tuple(ids)) for i, ids in (step_algorithms or {}).items()))
        pins = tuple(sorted((pinned or {}).items()))
        return cls(steps, pins)

    @classmethod
    def for_path(cls, path: Sequence[str]) -> "Restriction":
        return cls.make({i: (algo_id,) for i, algo_id in enumerate(path)})

    @classmethod
    def coerce(cls, restrict: "Restriction | Sequence[str] | None") -> "Restriction":
        if restrict is None:
            return cls()
        if isinstance(restrict, Restriction):
            return restrict
        return cls.for_path(tuple(restrict))

    def key(self) -> str:
        return json.dumps(
            {"steps": {str(i): list(ids) for i, ids in self.step_algorithms},
             "pinned": dict(self.pinned)},
            sort_keys=True, separators=(",", ":"))


def _allowed_algorithms(spec: PipelineSpec, restrict: Restriction) -> list[tuple[AlgorithmSpec, ...]]:
    chosen = dict(restrict.step_algorithms)
    per_step: list[tuple[AlgorithmSpec, ...]] = []
    for step in spec.steps:
        if step.index in chosen:
            ids = chosen[step.index]
            per_step.append(tuple(step.algorithm(a) for a in ids))
        else:
            per_step.append(step.non_naive())
    unknown_steps = set(chosen) - {s.index for s in spec.steps}
    if unknown_steps:
        raise SpecError(f"restriction references unknown steps {sorted(unknown_steps)}")
    known_hp = {hp.name for _, _, hp in spec.hyperparameter_slots()}
    for name, token in restrict.pinned:
        if name not in known_hp:
            raise SpecError(f"restriction references unknown hyperparameter {name!r}")
    return per_step


def enumerate_paths(spec: PipelineSpec, include_naive: bool = False) -> list[PathId]:
    """Cartesian product of per-step algorithm ids in document order."""
    per_step = [
        tuple(a.id for a in (step.algorithms if include_naive else step.non_naive()))
        for step in spec.steps
    ]
    return [tuple(combo) for combo in product(*per_step)]


def enumerate_grid(spec: PipelineSpec,
                   restrict: Restriction | Sequence[str] | None = None) -> list[Configuration]:
    """Full configuration enumeration under a restriction.

    Order is deterministic: path-major (per-step document order), then the
    product over active hyperparameter domains with later domains cycling
    fastest. Naive algorithms only appear when a restriction names them.
    """
    r = Restriction.coerce(restrict)
    per_step = _allowed_algorithms(spec, r)
    pins = dict(r.pinned)
    out: list[Configuration] = []
    for combo in product(*per_step):
        names: list[str] = []
        domains: list[tuple[str, ...]] = []
        for algo in combo:
            for hp in algo.hyperparameters:
                names.append(hp.name)
                if hp.name in pins:
                    token = pins[hp.name]
                    if token not in hp.values:
                        raise SpecError(
                            f"restriction pins {hp.name!r} to {token!r}, not in its domain")
                    domains.append((token,))
                else:
                    domains.append(hp.values)
        path = tuple(a.id for a in combo)
        for values in product(*domains):
            out.append(Configuration.make(path, dict(zip(names, values))))
    return out


def grid_size(spec: PipelineSpec, restrict: Restriction | Sequence[str] | None = None) -> int:
    r = Restriction.coerce(restrict)
    per_step = _allowed_algorithms(spec, r)
    pins = dict(r.pinned)
    total = 1
    for algos in per_step:
        step_total = 0
        for algo in algos:
            n = 1
            for hp in algo.hyperparameters:
                n *= 1 if hp.name in pins else len(hp.values)
            step_total += n
        total *= step_total
    return total


def validate_path(spec: PipelineSpec, path: Sequence[str], allow_naive: bool = False) -> PathId:
    if len(path) != len(spec.steps):
        raise SpecError(f"path has {len(path)} entries for {len(spec.steps)} steps")
    for step, algo_id in zip(spec.steps, path):
        algo = step.algorithm(algo_id)
        if algo.is_naive and not allow_naive:
            raise SpecError(f"path uses naive algorithm {algo_id!r} in step {step.name!r}")
    return tuple(path)


def validate_config(spec: PipelineSpec, config: Configuration) -> None:
    """Raise SpecError unless the configuration is admissible for the spec."""
    path = validate_path(spec, config.path, allow_naive=True)
    expected: dict[str, HyperparameterDomain] = {}
    for step, algo_id in zip(spec.steps, path):
        for hp in step.algorithm(algo_id).hyperparameters:
            expected[hp.name] = hp
    got = config.values
    if set(got) != set(expected):
        missing = sorted(set(expected) - set(got))
        extra = sorted(set(got) - set(expected))
        raise SpecError(f"configuration assignment mismatch (missing {missing}, extra {extra})")
    for name, token in got.items():
        if token not in expected[name].values:
            raise SpecError(f"value {token!r} not in the domain of {name!r}")


def active_values(spec: PipelineSpec, config: Configuration) -> list[dict[str, object]]:
    """Per-step runtime hyperparameter values for the chosen algorithms."""
    out = []
    for step, algo_id in zip(spec.steps, config.path):
        algo = step.algorithm(algo_id)
        values = {hp.name: hp.runtime(config.value(hp.name)) for hp in algo.hyperparameters}
        out.append(values)
    return out

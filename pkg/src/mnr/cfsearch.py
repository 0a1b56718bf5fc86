"""Counterfactual search against a decision-tree oracle.

For an axis-aligned tree the decision boundaries are exactly its split
thresholds, so a finite candidate grid provably contains a minimal
counterfactual: per categorical feature, every admissible value; per
numeric feature, values snapped just off each threshold plus the feature
bounds. Integer-valued features snap to the integer lattice around each
threshold ({floor(t), floor(t)+1}); continuous features use a quantum of
1e-6 of the feature range.

The search is best-first over combinations of single-feature edits. A heap
keyed by (distance, changed-feature count, feature indices, value ranks)
pops candidates in non-decreasing distance, so the first class flip popped
is minimal over the whole grid; the full distance shell at the winning
distance is drained to make tie-breaking deterministic.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

from .tabular import FeatureSchema, Instance, LabeledDataset
from .tree import DecisionTree, collect_thresholds, predict

__all__ = [
    "DistanceConfig",
    "SearchBudget",
    "CounterfactualPair",
    "NotFound",
    "distance",
    "candidate_values",
    "find_counterfactual",
    "generate_pairs",
    "write_pairs_jsonl",
    "read_pairs_jsonl",
]

RANGE_FLOOR = 1e-9
CONTINUOUS_QUANTUM = 1e-6  # fraction of feature range used as the off-threshold step


@dataclass(frozen=True)
class DistanceConfig:
    """Per-feature normalizers (numeric ranges, floored) and weights."""

    numeric_normalizers: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.numeric_normalizers) != len(self.weights):
            raise ValueError("normalizers and weights must have equal length")
        if any(n <= 0 for n in self.numeric_normalizers):
            raise ValueError("normalizers must be positive")
        if any(w < 0 for w in self.weights) or not any(w > 0 for w in self.weights):
            raise ValueError("weights must be non-negative with at least one positive")

    @classmethod
    def for_schema(
        cls,
        schema: FeatureSchema,
        training: LabeledDataset | None = None,
        weights: tuple[float, ...] | None = None,
    ) -> "DistanceConfig":
        """Normalizers from the training-set range per numeric feature
        (falling back to the schema bounds when no data is given)."""
        norms = []
        for i, spec in enumerate(schema.features):
            if spec.is_categorical:
                norms.append(1.0)
                continue
            if training is not None and len(training) > 0:
                vals = [float(row.values[i]) for row in training.rows]
                span = max(vals) - min(vals)
            else:
                span = spec.upper - spec.lower
            norms.append(max(span, RANGE_FLOOR))
        w = weights if weights is not None else tuple(1.0 for _ in schema.features)
        return cls(numeric_normalizers=tuple(norms), weights=tuple(w))


@dataclass(frozen=True)
class SearchBudget:
    max_expansions: int = 100_000
    max_changed_features: int | None = None  # None -> k

    def __post_init__(self):
        if self.max_expansions < 1:
            raise ValueError("max_expansions must be >= 1")
        if self.max_changed_features is not None and self.max_changed_features < 1:
            raise ValueError("max_changed_features must be >= 1")


@dataclass(frozen=True)
class CounterfactualPair:
    """A factual/counterfactual pair with the oracle outcomes for both."""

    factual: Instance
    counterfactual: Instance
    y_fact: str
    y_cf: str
    changed_features: frozenset[str]
    distance: float
    pair_id: str = ""

    def validate(self, schema: FeatureSchema) -> None:
        self.factual.validate(schema)
        self.counterfactual.validate(schema)
        if self.y_fact == self.y_cf:
            raise ValueError("pair is invalid: outcomes are equal")
        if self.factual == self.counterfactual:
            raise ValueError("pair is invalid: factual equals counterfactual")
        diff = {
            spec.name
            for spec, a, b in zip(schema.features, self.factual.values, self.counterfactual.values)
            if a != b
        }
        if not diff:
            raise ValueError("pair is invalid: no changed features")
        if diff != set(self.changed_features):
            raise ValueError(
                f"changed_features {sorted(self.changed_features)} != actual diff {sorted(diff)}"
            )
        if self.distance < 0:
            raise ValueError("distance must be non-negative")


@dataclass(frozen=True)
class NotFound:
    """The no-counterfactual outcome: either the grid was exhausted (proven)
    or the expansion budget ran out first."""

    proven: bool
    expansions: int

    @property
    def reason(self) -> str:
        return "exhausted-grid" if self.proven else "budget-exhausted"


def _feature_distance(spec_is_cat: bool, a, b, normalizer: float) -> float:
    if spec_is_cat:
        return 0.0 if a == b else 1.0
    return abs(float(a) - float(b)) / normalizer


def distance(a: Instance, b: Instance, schema: FeatureSchema, config: DistanceConfig) -> float:
    """Weighted mean of per-feature distances: categorical 0/1 mismatch,
    numeric normalized absolute difference."""
    total = 0.0
    weight_sum = 0.0
    for i, spec in enumerate(schema.features):
        d = _feature_distance(spec.is_categorical, a.values[i], b.values[i], config.numeric_normalizers[i])
        total += config.weights[i] * d
        weight_sum += config.weights[i]
    return total / weight_sum


def _numeric_candidates(spec, thresholds: list[float]) -> list[float]:
    cands: set[float] = {float(spec.lower), float(spec.upper)}
    if spec.integer:
        for t in thresholds:
            cands.add(float(math.floor(t)))
            cands.add(float(math.floor(t)) + 1.0)
    else:
        step = max(spec.upper - spec.lower, RANGE_FLOOR) * CONTINUOUS_QUANTUM
        for t in thresholds:
            cands.add(t - step)
            cands.add(t + step)
    return sorted(v for v in cands if spec.lower <= v <= spec.upper)


def candidate_values(
    x: Instance, schema: FeatureSchema, tree_thresholds: dict[int, list[float]]
) -> list[list]:
    """Per-feature candidate replacement values for *x* (empty for immutable
    features and features with no alternatives)."""
    out: list[list] = []
    for i, spec in enumerate(schema.features):
        if not spec.mutable:
            out.append([])
        elif spec.is_categorical:
            out.append([v for v in spec.values if v != x.values[i]])
        else:
            cands = _numeric_candidates(spec, tree_thresholds.get(i, []))
            out.append([v for v in cands if v != float(x.values[i])])
    return out


def find_counterfactual(
    oracle: DecisionTree,
    x: Instance,
    config: DistanceConfig,
    budget: SearchBudget | None = None,
    pair_id: str = "",
) -> CounterfactualPair | NotFound:
    """Best-first search for the minimally distant class-flipping edit.

    Every popped state costs one oracle call ("expansion"). When a flip is
    found the remaining states at the same distance are drained too, so the
    returned pair is the deterministic tie-break winner: fewest changed
    features, then lowest feature indices, then candidate value order.
    """
    budget = budget or SearchBudget()
    schema = oracle.schema
    x.validate(schema)
    y_fact = predict(oracle, x)
    max_changed = budget.max_changed_features or schema.k

    per_feature = candidate_values(x, schema, collect_thresholds(oracle))
    weight_sum = sum(config.weights)
    # contributions[f] = sorted (cost, value) options for changing feature f
    contributions: list[list[tuple[float, object]]] = []
    for i, values in enumerate(per_feature):
        opts = [
            (
                config.weights[i]
                * _feature_distance(
                    schema.features[i].is_categorical, x.values[i], v, config.numeric_normalizers[i]
                )
                / weight_sum,
                v,
            )
            for v in values
        ]
        opts.sort(key=lambda cv: cv[0])
        contributions.append(opts)

    # Heap states: (distance, n_changed, feature tuple, rank tuple). Each
    # state is reached exactly once: ranks only advance on the last feature,
    # and new features join with a strictly larger index at rank 0.
    heap: list[tuple[float, int, tuple[int, ...], tuple[int, ...]]] = []
    for f, opts in enumerate(contributions):
        if opts:
            heapq.heappush(heap, (opts[0][0], 1, (f,), (0,)))

    expansions = 0
    best: tuple[tuple, CounterfactualPair] | None = None
    while heap:
        dist, n_changed, feats, ranks = heapq.heappop(heap)
        if best is not None and dist > best[0][0] + 1e-12:
            break
        if expansions >= budget.max_expansions:
            if best is not None:
                break  # budget died during tie-shell draining; the pair stands
            return NotFound(proven=False, expansions=expansions)
        expansions += 1

        candidate = x
        for f, r in zip(feats, ranks):
            candidate = candidate.replace(f, contributions[f][r][1])
        y_cf = predict(oracle, candidate)
        if y_cf != y_fact:
            key = (dist, n_changed, feats, ranks)
            if best is None or key < best[0]:
                changed = frozenset(schema.features[f].name for f in feats)
                pair = CounterfactualPair(
                    factual=x,
                    counterfactual=candidate,
                    y_fact=y_fact,
                    y_cf=y_cf,
                    changed_features=changed,
                    distance=dist,
                    pair_id=pair_id,
                )
                best = (key, pair)

        last = feats[-1]
        if ranks[-1] + 1 < len(contributions[last]):
            ndist = dist - contributions[last][ranks[-1]][0] + contributions[last][ranks[-1] + 1][0]
            heapq.heappush(heap, (ndist, n_changed, feats, ranks[:-1] + (ranks[-1] + 1,)))
        if n_changed < max_changed:
            for f in range(last + 1, schema.k):
                if contributions[f]:
                    heapq.heappush(
                        heap,
                        (dist + contributions[f][0][0], n_changed + 1, feats + (f,), ranks + (0,)),
                    )

    if best is not None:
        return best[1]
    return NotFound(proven=True, expansions=expansions)


def generate_pairs(
    oracle: DecisionTree,
    dataset: LabeledDataset,
    config: DistanceConfig,
    budget: SearchBudget | None = None,
) -> tuple[list[CounterfactualPair], list[tuple[int, NotFound]]]:
    """Search every row in order; rows without a counterfactual are reported
    as (row index, NotFound), never dropped silently."""
    if dataset.schema != oracle.schema:
        raise ValueError("dataset schema does not match oracle schema")
    pairs: list[CounterfactualPair] = []
    misses: list[tuple[int, NotFound]] = []
    for i, row in enumerate(dataset.rows):
        result = find_counterfactual(oracle, row, config, budget, pair_id=f"pair-{i:05d}")
        if isinstance(result, NotFound):
            misses.append((i, result))
        else:
            pairs.append(result)
    return pairs, misses


# --- persistence -----------------------------------------------------------


def _pair_record(pair: CounterfactualPair, schema: FeatureSchema) -> dict:
    order = {name: i for i, name in enumerate(schema.feature_names)}
    return {
        "pair_id": pair.pair_id,
        "factual": pair.factual.as_dict(schema),
        "counterfactual": pair.counterfactual.as_dict(schema),
        "y_fact": pair.y_fact,
        "y_cf": pair.y_cf,
        "changed_features": sorted(pair.changed_features, key=order.__getitem__),
        "distance": pair.distance,
    }


def write_pairs_jsonl(pairs: list[CounterfactualPair], schema: FeatureSchema, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for pair in pairs:
            handle.write(json.dumps(_pair_record(pair, schema), sort_keys=True))
            handle.write("\n")


def _instance_from_map(values: dict, schema: FeatureSchema, where: str) -> Instance:
    try:
        raw = [values[name] for name in schema.feature_names]
    except KeyError as exc:
        raise ValueError(f"{where}: missing feature {exc.args[0]!r}") from None
    vals = tuple(
        v if spec.is_categorical else float(v) for spec, v in zip(schema.features, raw)
    )
    instance = Instance(vals)
    instance.validate(schema)
    return instance


def read_pairs_jsonl(path, schema: FeatureSchema) -> list[CounterfactualPair]:
    pairs: list[CounterfactualPair] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: malformed JSON: {exc}") from None
            where = f"{path}:{lineno}"
            pair = CounterfactualPair(
                factual=_instance_from_map(doc["factual"], schema, where),
                counterfactual=_instance_from_map(doc["counterfactual"], schema, where),
                y_fact=str(doc["y_fact"]),
                y_cf=str(doc["y_cf"]),
                changed_features=frozenset(doc["changed_features"]),
                distance=float(doc["distance"]),
                pair_id=str(doc.get("pair_id", f"pair-{lineno - 1:05d}")),
            )
            pair.validate(schema)
            pairs.append(pair)
    return pairs

"""From-scratch binary decision-tree classifier (gini, axis-aligned).

Induction is greedy top-down: at each node the (feature, threshold) pair
minimizing the weighted gini impurity of the two children wins. Candidate
thresholds are midpoints between consecutive distinct sorted values, so the
candidate set is finite and the whole procedure is deterministic. Ties break
toward the lowest feature index, then the lowest threshold.

Categorical features are split on their ordinal encoding, mirroring
integer-coded-category behavior of common tree libraries. Descent sends
``value <= threshold`` to the left child.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .tabular import FeatureSchema, Instance, LabeledDataset, encode

__all__ = [
    "TreeParams",
    "TreeNode",
    "DecisionTree",
    "train",
    "predict",
    "accuracy",
    "save_tree",
    "load_tree",
    "collect_thresholds",
]


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 4
    min_samples_split: int = 2
    criterion: str = "gini"

    def __post_init__(self):
        if self.max_depth < 1:
            raise TrainingError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.min_samples_split < 2:
            raise TrainingError(f"min_samples_split must be >= 2, got {self.min_samples_split}")
        if self.criterion != "gini":
            raise TrainingError(f"unsupported criterion {self.criterion!r}")


@dataclass(frozen=True)
class TreeNode:
    """Internal node (feature_index, threshold, children) or leaf (label, counts)."""

    feature_index: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    label: str | None = None
    class_counts: tuple[int, int] = (0, 0)

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())


@dataclass(frozen=True)
class DecisionTree:
    root: TreeNode
    schema: FeatureSchema
    params: TreeParams = field(default_factory=TreeParams)

    def __post_init__(self):
        if self.root.depth() > self.params.max_depth:
            raise TrainingError(
                f"tree depth {self.root.depth()} exceeds max_depth {self.params.max_depth}"
            )


def _leaf(labels01: np.ndarray, schema: FeatureSchema) -> TreeNode:
    counts = (int(np.sum(labels01 == 0)), int(np.sum(labels01 == 1)))
    # tie -> first label in target_labels
    label = schema.target_labels[1] if counts[1] > counts[0] else schema.target_labels[0]
    return TreeNode(label=label, class_counts=counts)


def _best_split(X: np.ndarray, y: np.ndarray) -> tuple[int, float, float] | None:
    """Minimal weighted child gini over all midpoint candidates.

    Returns (feature_index, threshold, weighted_gini) or None when every
    feature is constant on this node. First feature index, then first
    (lowest) threshold wins ties; np.argmin's first-occurrence rule gives
    the lowest threshold for free because midpoints ascend with the sort.
    """
    n = len(y)
    best: tuple[int, float, float] | None = None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        vals = X[order, f]
        ones = np.cumsum(y[order])
        boundaries = np.nonzero(vals[:-1] != vals[1:])[0]
        if boundaries.size == 0:
            continue
        n_left = boundaries + 1
        n_right = n - n_left
        ones_left = ones[boundaries]
        ones_right = ones[-1] - ones_left
        zeros_left = n_left - ones_left
        zeros_right = n_right - ones_right
        gini_left = 1.0 - (ones_left / n_left) ** 2 - (zeros_left / n_left) ** 2
        gini_right = 1.0 - (ones_right / n_right) ** 2 - (zeros_right / n_right) ** 2
        weighted = (n_left / n) * gini_left + (n_right / n) * gini_right
        pos = int(np.argmin(weighted))
        wg = float(weighted[pos])
        if best is None or wg < best[2]:
            i = boundaries[pos]
            threshold = float((vals[i] + vals[i + 1]) / 2.0)
            best = (f, threshold, wg)
    return best


def _grow(X: np.ndarray, y: np.ndarray, depth: int, params: TreeParams, schema: FeatureSchema) -> TreeNode:
    n = len(y)
    pure = bool(np.all(y == y[0]))
    if depth >= params.max_depth or pure or n < params.min_samples_split:
        return _leaf(y, schema)
    split = _best_split(X, y)
    if split is None:  # all features constant: nothing to split on
        return _leaf(y, schema)
    f, threshold, _ = split
    mask = X[:, f] <= threshold
    return TreeNode(
        feature_index=f,
        threshold=threshold,
        left=_grow(X[mask], y[mask], depth + 1, params, schema),
        right=_grow(X[~mask], y[~mask], depth + 1, params, schema),
    )


def train(dataset: LabeledDataset, params: TreeParams | None = None, seed: int = 0) -> DecisionTree:
    """Fit a tree on *dataset*. Deterministic given dataset order; induction
    has no stochastic choices, so *seed* is accepted for manifest provenance
    only."""
    del seed
    params = params or TreeParams()
    if len(dataset) == 0:
        raise TrainingError("cannot train on an empty dataset")
    schema = dataset.schema
    X = np.array([encode(row, schema) for row in dataset.rows], dtype=np.float64)
    y = np.array([schema.label_index(lbl) for lbl in dataset.labels], dtype=np.int64)
    root = _grow(X, y, 0, params, schema)
    return DecisionTree(root=root, schema=schema, params=params)


def predict(tree: DecisionTree, instance: Instance) -> str:
    vec = encode(instance, tree.schema)
    node = tree.root
    while not node.is_leaf:
        node = node.left if vec[node.feature_index] <= node.threshold else node.right
    return node.label


def accuracy(tree: DecisionTree, dataset: LabeledDataset) -> float:
    if len(dataset) == 0:
        raise TrainingError("accuracy undefined on an empty dataset")
    hits = sum(1 for row, lbl in zip(dataset.rows, dataset.labels) if predict(tree, row) == lbl)
    return hits / len(dataset)


def collect_thresholds(tree: DecisionTree) -> dict[int, list[float]]:
    """Sorted unique split thresholds per feature index (the oracle's decision
    boundaries, which the counterfactual search snaps its candidates to)."""
    found: dict[int, set[float]] = {}
    stack = [tree.root]
    while stack:
        node = stack.pop()
        if node.is_leaf:
            continue
        found.setdefault(node.feature_index, set()).add(node.threshold)
        stack.extend((node.left, node.right))
    return {f: sorted(ts) for f, ts in sorted(found.items())}


# --- persistence -----------------------------------------------------------
#
# Trees serialize to a JSON document with the node list in pre-order:
# internal nodes as {"type": "internal", "feature": i, "threshold": t},
# leaves as {"type": "leaf", "label": ..., "counts": [n0, n1]}. The header
# records params, feature count, and target labels so a load against the
# wrong schema fails loudly. Serialization is byte-deterministic.


def _preorder(node: TreeNode, out: list[dict]) -> None:
    if node.is_leaf:
        out.append({"type": "leaf", "label": node.label, "counts": list(node.class_counts)})
    else:
        out.append({"type": "internal", "feature": node.feature_index, "threshold": node.threshold})
        _preorder(node.left, out)
        _preorder(node.right, out)


def save_tree(tree: DecisionTree, path) -> None:
    nodes: list[dict] = []
    _preorder(tree.root, nodes)
    doc = {
        "format": "mnr-tree/1",
        "params": {
            "max_depth": tree.params.max_depth,
            "min_samples_split": tree.params.min_samples_split,
            "criterion": tree.params.criterion,
        },
        "feature_count": tree.schema.k,
        "target_labels": list(tree.schema.target_labels),
        "nodes": nodes,
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(doc, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _read_preorder(nodes: list[dict], cursor: list[int]) -> TreeNode:
    i = cursor[0]
    cursor[0] += 1
    try:
        entry = nodes[i]
    except IndexError:
        raise TrainingError("tree file truncated: node list ended early") from None
    if entry.get("type") == "leaf":
        counts = entry["counts"]
        return TreeNode(label=entry["label"], class_counts=(int(counts[0]), int(counts[1])))
    if entry.get("type") == "internal":
        left = _read_preorder(nodes, cursor)
        right = _read_preorder(nodes, cursor)
        return TreeNode(
            feature_index=int(entry["feature"]),
            threshold=float(entry["threshold"]),
            left=left,
            right=right,
        )
    raise TrainingError(f"tree file node {i}: unknown type {entry.get('type')!r}")


def load_tree(path, schema: FeatureSchema) -> DecisionTree:
    with open(path, encoding="utf-8") as handle:
        doc = json.load(handle)
    if doc.get("format") != "mnr-tree/1":
        raise TrainingError(f"{path}: not a tree file (format={doc.get('format')!r})")
    if doc["feature_count"] != schema.k:
        raise TrainingError(
            f"{path}: tree expects {doc['feature_count']} features, schema has {schema.k}"
        )
    if tuple(doc["target_labels"]) != schema.target_labels:
        raise TrainingError(f"{path}: target labels {doc['target_labels']} do not match schema")
    params = TreeParams(**doc["params"])
    cursor = [0]
    root = _read_preorder(doc["nodes"], cursor)
    if cursor[0] != len(doc["nodes"]):
        raise TrainingError(f"{path}: {len(doc['nodes']) - cursor[0]} trailing nodes in file")
    return DecisionTree(root=root, schema=schema, params=params)

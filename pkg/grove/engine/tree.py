"""
Single-tree growth and prediction.

Trees are stored as flat node arrays. Node 0 is the root and children are
always numbered after their parent. Terminal nodes have ``split_feature``
-1 and a payload row:

- classification: majority class index (width 1)
- regression: mean response (width 1)
- probability: in-bag class frequencies (width = number of classes)
- survival: Kaplan-Meier curve at the forest's timepoints (width = T)
"""

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import DataError
from .sampling import sample_without_replacement
from .splitting import NodeView, criterion_for, find_best_split

logger = logging.getLogger(__name__)

TERMINAL = -1


class TreeType(enum.IntEnum):
    """Forest type; the integer value is the ``--treetype`` code."""

    CLASSIFICATION = 1
    REGRESSION = 3
    SURVIVAL = 5
    PROBABILITY = 9

    @property
    def label(self):
        return self.name.capitalize()


@dataclass(eq=False)
class TreeModel:
    split_feature: np.ndarray
    split_value: np.ndarray
    left_child: np.ndarray
    right_child: np.ndarray
    payload: np.ndarray
    # per-feature impurity decrease, filled only when Gini importance is requested
    impurity_importance: Optional[np.ndarray] = field(default=None, compare=False)

    @property
    def n_nodes(self):
        return len(self.split_feature)

    def is_terminal(self, node):
        return self.split_feature[node] == TERMINAL

    def terminal_nodes(self):
        return np.flatnonzero(self.split_feature == TERMINAL)

    def validate(self):
        """
        Check structural invariants.

        Raises:
            DataError: Broken child links, unreachable or doubly reached nodes
        """
        n = self.n_nodes
        if n == 0:
            raise DataError('Tree has no nodes')
        reached = np.zeros(n, dtype=np.int64)
        reached[0] = 1
        for node in range(n):
            if self.is_terminal(node):
                continue
            for child in (self.left_child[node], self.right_child[node]):
                if not node < child < n:
                    raise DataError(f'Node {node} has invalid child {child}')
                reached[child] += 1
        if not (reached == 1).all():
            raise DataError('Every node must be reachable from the root exactly once')

    def apply(self, source, rows):
        """
        Terminal node reached by each row.

        Args:
            source: Object with ``feature_values(j, rows)`` (e.g. a Dataset)
            rows: Row indices into ``source``

        Returns:
            np.ndarray: Terminal node id per row
        """
        rows = np.asarray(rows, dtype=np.intp)
        leaves = np.zeros(len(rows), dtype=np.intp)
        stack = [(0, np.arange(len(rows)))]
        while stack:
            node, positions = stack.pop()
            feature = self.split_feature[node]
            if feature == TERMINAL or positions.size == 0:
                leaves[positions] = node
                continue
            go_left = source.feature_values(feature, rows[positions]) <= self.split_value[node]
            stack.append((self.right_child[node], positions[~go_left]))
            stack.append((self.left_child[node], positions[go_left]))
        return leaves

    def predict_payloads(self, source, rows):
        """Payload row of the terminal node reached by each row"""
        return self.payload[self.apply(source, rows)]


def predict_tree(tree, row):
    """
    Payload of the leaf reached by one sample.

    Args:
        tree (TreeModel): Grown tree
        row: Feature values of one sample, in forest feature order

    Returns:
        np.ndarray: Leaf payload row
    """
    row = np.asarray(row, dtype=np.float64)
    node = 0
    while not tree.is_terminal(node):
        feature = tree.split_feature[node]
        if feature >= len(row) or not np.isfinite(row[feature]):
            raise DataError(f'Missing value for feature {feature}')
        node = tree.left_child[node] if row[feature] <= tree.split_value[node] else tree.right_child[node]
    return tree.payload[node]


def terminal_survival_curve(times, statuses, timepoints):
    """
    Kaplan-Meier survival estimate of a node evaluated at ``timepoints``.

    Args:
        times: Survival times of the node members (with multiplicity)
        statuses: 1 = event, 0 = censored
        timepoints: Ascending forest timepoints

    Returns:
        np.ndarray: Non-increasing survival probabilities, one per timepoint
    """
    times = np.asarray(times, dtype=np.float64)
    statuses = np.asarray(statuses)
    timepoints = np.asarray(timepoints, dtype=np.float64)
    event_times, deaths = np.unique(times[statuses == 1], return_counts=True)
    if event_times.size == 0:
        return np.ones(len(timepoints))
    at_risk = len(times) - np.searchsorted(np.sort(times), event_times, side='left')
    survival = np.cumprod(1.0 - deaths / at_risk)
    reached = np.searchsorted(event_times, timepoints, side='right')
    return np.where(reached > 0, survival[np.maximum(reached - 1, 0)], 1.0)


class _TreeBuilder:
    """Growable node arrays for one tree"""

    def __init__(self, width):
        self.width = width
        self.split_feature = []
        self.split_value = []
        self.left_child = []
        self.right_child = []
        self.payloads = []

    def add_node(self):
        self.split_feature.append(TERMINAL)
        self.split_value.append(0.0)
        self.left_child.append(TERMINAL)
        self.right_child.append(TERMINAL)
        self.payloads.append(None)
        return len(self.split_feature) - 1

    def build(self, impurity_importance=None):
        payload = np.zeros((len(self.payloads), self.width))
        for node, row in enumerate(self.payloads):
            if row is not None:
                payload[node] = row
        return TreeModel(
            split_feature=np.asarray(self.split_feature, dtype=np.int32),
            split_value=np.asarray(self.split_value, dtype=np.float64),
            left_child=np.asarray(self.left_child, dtype=np.int32),
            right_child=np.asarray(self.right_child, dtype=np.int32),
            payload=payload,
            impurity_importance=impurity_importance,
        )


def payload_width(tree_type, n_classes=0, n_timepoints=0):
    if tree_type is TreeType.PROBABILITY:
        return n_classes
    if tree_type is TreeType.SURVIVAL:
        return n_timepoints
    return 1


def _is_pure(dataset, tree_type, rows):
    response = dataset.response
    if tree_type in (TreeType.CLASSIFICATION, TreeType.PROBABILITY):
        labels = response.labels[rows]
        return bool((labels == labels[0]).all())
    if tree_type is TreeType.REGRESSION:
        values = response.values[rows]
        return bool((values == values[0]).all())
    # survival: nothing left to separate without an event
    return not bool(response.status[rows].any())


def _leaf_payload(dataset, tree_type, rows, timepoints):
    response = dataset.response
    if tree_type is TreeType.CLASSIFICATION:
        return [float(np.argmax(np.bincount(response.labels[rows], minlength=response.n_classes)))]
    if tree_type is TreeType.PROBABILITY:
        counts = np.bincount(response.labels[rows], minlength=response.n_classes)
        return counts / counts.sum()
    if tree_type is TreeType.REGRESSION:
        return [float(np.mean(response.values[rows]))]
    return terminal_survival_curve(response.time[rows], response.status[rows], timepoints)


def grow_tree(dataset, config, bag, rng, timepoints=None):
    """
    Grow one tree on the in-bag samples of ``bag``.

    A node is split when it holds more than ``min_node_size`` samples, is not
    pure, and some candidate feature has a split with positive gain. The
    ``mtry`` candidates are drawn per node with Algorithm S.

    Args:
        dataset (Dataset): Training data
        config (GrowConfig): Resolved growth configuration
        bag (BagRecord): In-bag multiplicities
        rng: Tree-owned random stream
        timepoints: Forest timepoints (survival only)

    Returns:
        TreeModel: Grown tree
    """
    tree_type = config.tree_type
    response = dataset.response
    if tree_type is TreeType.SURVIVAL and timepoints is None:
        timepoints = response.event_timepoints()
    criterion = criterion_for(response.kind, probability=tree_type is TreeType.PROBABILITY)
    width = payload_width(
        tree_type,
        n_classes=response.n_classes,
        n_timepoints=0 if timepoints is None else len(timepoints),
    )

    samples = bag.inbag_samples()
    if samples.size == 0:
        raise DataError('Bootstrap sample is empty')
    inbag_size = len(samples)
    n_features = dataset.n_features
    importance = np.zeros(n_features) if config.accumulates_gini else None

    builder = _TreeBuilder(width)
    stack = [(builder.add_node(), samples)]
    while stack:
        node, rows = stack.pop()
        split = None
        if len(rows) > config.min_node_size and not _is_pure(dataset, tree_type, rows):
            candidates = sample_without_replacement(n_features, config.mtry, rng)
            split = find_best_split(
                dataset, NodeView(rows), candidates, criterion,
                config.memory_mode, config.split_cutoff,
            )
        if split is None:
            builder.payloads[node] = _leaf_payload(dataset, tree_type, rows, timepoints)
            continue

        go_left = dataset.feature_values(split.feature, rows) <= split.threshold
        left, right = builder.add_node(), builder.add_node()
        builder.split_feature[node] = split.feature
        builder.split_value[node] = split.threshold
        builder.left_child[node] = left
        builder.right_child[node] = right
        if importance is not None:
            importance[split.feature] += len(rows) / inbag_size * split.gain
        stack.append((right, rows[~go_left]))
        stack.append((left, rows[go_left]))

    return builder.build(importance)

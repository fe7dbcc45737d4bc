"""
Forest growth orchestration and ensemble prediction.

Tree t is grown with the stream ``make_rng(seed, t)``: it draws its own
bootstrap and its node candidates from that stream only, so a forest is a
pure function of (dataset, config) whatever the worker count.
"""

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from joblib import Parallel, delayed

from .data_model import MemoryMode, ResponseKind
from .exceptions import ConfigError, DataError
from .sampling import BagRecord, bootstrap, make_rng, random_seed
from .splitting import DEFAULT_SPLIT_CUTOFF
from .tree import TreeModel, TreeType, grow_tree

logger = logging.getLogger(__name__)

DEFAULT_NUM_TREES = 500

DEFAULT_MIN_NODE_SIZE = {
    TreeType.CLASSIFICATION: 1,
    TreeType.REGRESSION: 5,
    TreeType.SURVIVAL: 3,
    TreeType.PROBABILITY: 10,
}

RESPONSE_KIND = {
    TreeType.CLASSIFICATION: ResponseKind.CLASSIFICATION,
    TreeType.PROBABILITY: ResponseKind.CLASSIFICATION,
    TreeType.REGRESSION: ResponseKind.REGRESSION,
    TreeType.SURVIVAL: ResponseKind.SURVIVAL,
}


class ImportanceMode:
    """Variable importance mode; values are the ``--impmeasure`` codes."""

    NONE = 0
    GINI = 1
    PERMUTATION_RAW = 2
    PERMUTATION_SCALED = 3

    LABELS = {
        NONE: 'none',
        GINI: 'impurity',
        PERMUTATION_RAW: 'permutation',
        PERMUTATION_SCALED: 'permutation (scaled)',
    }

    @classmethod
    def validate(cls, mode):
        if mode not in cls.LABELS:
            raise ConfigError(f'Unknown importance mode {mode}')
        return int(mode)


@dataclass(frozen=True)
class GrowConfig:
    """
    Forest growth settings.

    ``mtry`` defaults to floor(sqrt(p)) and ``min_node_size`` to the tree
    type's default; ``resolve`` fills both in for a given dataset.
    """

    tree_type: TreeType = TreeType.CLASSIFICATION
    num_trees: int = DEFAULT_NUM_TREES
    mtry: Optional[int] = None
    min_node_size: Optional[int] = None
    memory_mode: MemoryMode = MemoryMode.RUNTIME
    importance_mode: int = ImportanceMode.NONE
    seed: Optional[int] = None
    worker_count: int = 1
    split_cutoff: int = DEFAULT_SPLIT_CUTOFF

    @property
    def accumulates_gini(self):
        return self.importance_mode == ImportanceMode.GINI

    def resolve(self, n_features):
        """
        Copy with defaults filled in and every field validated.

        Raises:
            ConfigError: Out-of-range trees, mtry, node size or workers
        """
        tree_type = TreeType(self.tree_type)
        mtry = self.mtry if self.mtry is not None else max(1, int(math.floor(math.sqrt(n_features))))
        min_node_size = self.min_node_size if self.min_node_size is not None else DEFAULT_MIN_NODE_SIZE[tree_type]
        if self.num_trees < 1:
            raise ConfigError('Number of trees must be at least 1')
        if mtry < 1:
            raise ConfigError('mtry must be at least 1')
        if mtry > n_features:
            raise ConfigError(f'mtry exceeds feature count ({mtry} > {n_features})')
        if min_node_size < 1:
            raise ConfigError('Target node size must be at least 1')
        if self.worker_count < 1:
            raise ConfigError('Worker count must be at least 1')
        if self.split_cutoff < 1:
            raise ConfigError('Split cutoff must be at least 1')
        return dataclasses.replace(
            self,
            tree_type=tree_type,
            mtry=mtry,
            min_node_size=min_node_size,
            memory_mode=MemoryMode(self.memory_mode),
            importance_mode=ImportanceMode.validate(self.importance_mode),
            seed=random_seed() if self.seed is None else int(self.seed),
        )


@dataclass(eq=False)
class ForestModel:
    """
    Grown forest.

    ``bag_records`` is empty for forests read back from a file; such forests
    predict but cannot report out-of-bag results.
    """

    config: GrowConfig
    feature_names: List[str]
    trees: List[TreeModel]
    bag_records: List[BagRecord] = field(default_factory=list)
    classes: tuple = ()
    timepoints: Optional[np.ndarray] = None
    response_names: tuple = ()

    @property
    def tree_type(self):
        return self.config.tree_type

    @property
    def num_trees(self):
        return len(self.trees)

    @property
    def n_features(self):
        return len(self.feature_names)


def _check_response(dataset, tree_type):
    if dataset.response is None:
        raise DataError('Training data has no response')
    expected = RESPONSE_KIND[tree_type]
    if dataset.response.kind is not expected:
        raise ConfigError(
            f'{tree_type.label} forest needs a {expected.value} response, '
            f'got {dataset.response.kind.value}'
        )


def _grow_trees(dataset, config, timepoints, tree_indices):
    grown = []
    for t in tree_indices:
        rng = make_rng(config.seed, t)
        bag = bootstrap(dataset.n_samples, rng)
        grown.append((grow_tree(dataset, config, bag, rng, timepoints), bag))
        logger.debug('Grew tree %d', t)
    return grown


def split_chunks(indices, n_chunks):
    return [chunk for chunk in np.array_split(np.asarray(indices), n_chunks) if chunk.size]


def grow_forest(dataset, config):
    """
    Grow a random forest.

    Args:
        dataset (Dataset): Training data with a response matching the tree type
        config (GrowConfig): Growth settings

    Returns:
        ForestModel: ``num_trees`` trees with their bag records

    Raises:
        ConfigError: Tree type does not match the response, or mtry > p
    """
    config = config.resolve(dataset.n_features)
    _check_response(dataset, config.tree_type)

    response = dataset.response
    timepoints = response.event_timepoints() if config.tree_type is TreeType.SURVIVAL else None
    if config.memory_mode is MemoryMode.RUNTIME:
        dataset.build_sorted_indices()

    logger.info(
        'Growing %d %s trees (n=%d, p=%d, mtry=%d, seed=%d, workers=%d)',
        config.num_trees, config.tree_type.label.lower(), dataset.n_samples,
        dataset.n_features, config.mtry, config.seed, config.worker_count,
    )
    started = time.perf_counter()
    tree_indices = range(config.num_trees)
    if config.worker_count == 1:
        grown = _grow_trees(dataset, config, timepoints, tree_indices)
    else:
        batches = Parallel(n_jobs=config.worker_count)(
            delayed(_grow_trees)(dataset, config, timepoints, chunk)
            for chunk in split_chunks(tree_indices, config.worker_count)
        )
        grown = [item for batch in batches for item in batch]
    logger.info('Forest grown in %.2f s', time.perf_counter() - started)

    return ForestModel(
        config=config,
        feature_names=dataset.feature_names,
        trees=[tree for tree, _ in grown],
        bag_records=[bag for _, bag in grown],
        classes=response.classes,
        timepoints=timepoints,
        response_names=tuple(n for n in (response.name, response.status_name) if n),
    )


def _aggregate(forest, source, rows):
    rows = np.asarray(rows, dtype=np.intp)
    tree_type = forest.tree_type
    if tree_type is TreeType.CLASSIFICATION:
        votes = np.zeros((len(rows), len(forest.classes)), dtype=np.int64)
        for tree in forest.trees:
            labels = tree.predict_payloads(source, rows)[:, 0].astype(np.intp)
            np.add.at(votes, (np.arange(len(rows)), labels), 1)
        return votes
    total = None
    for tree in forest.trees:
        payloads = tree.predict_payloads(source, rows)
        total = payloads.copy() if total is None else total + payloads
    return total


def _finalise(forest, aggregate):
    if forest.tree_type is TreeType.CLASSIFICATION:
        # argmax keeps the lowest class index on ties
        return np.argmax(aggregate, axis=1)
    mean = aggregate / forest.num_trees
    if forest.tree_type is TreeType.REGRESSION:
        return mean[:, 0]
    return mean


def predict_forest(forest, dataset, worker_count=1):
    """
    Ensemble predictions for every row of ``dataset``.

    Args:
        forest (ForestModel): Grown or loaded forest
        dataset (Dataset): Rows to predict; must contain every forest feature
        worker_count (int): Parallel workers over row chunks

    Returns:
        np.ndarray: Class indices (classification), means (regression),
            class probabilities (probability, rows sum to 1) or mean survival
            curves over ``forest.timepoints`` (survival)

    Raises:
        DataError: Forest features missing from ``dataset``
    """
    source = dataset.select_features(forest.feature_names)
    rows = np.arange(source.n_samples)
    if worker_count <= 1 or len(rows) < 2:
        aggregate = _aggregate(forest, source, rows)
    else:
        parts = Parallel(n_jobs=worker_count)(
            delayed(_aggregate)(forest, source, chunk)
            for chunk in split_chunks(rows, worker_count)
        )
        aggregate = np.concatenate(parts)
    return _finalise(forest, aggregate)


def tree_predictions(forest, tree_index, source, rows):
    """Single-tree predictions in the same form as ``predict_forest``"""
    payloads = forest.trees[tree_index].predict_payloads(source, rows)
    if forest.tree_type is TreeType.CLASSIFICATION:
        return payloads[:, 0].astype(np.intp)
    if forest.tree_type is TreeType.REGRESSION:
        return payloads[:, 0]
    return payloads

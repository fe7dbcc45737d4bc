"""
Out-of-bag error, C index, confusion matrix and variable importance.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from joblib import Parallel, delayed
from sklearn.metrics import confusion_matrix as _sk_confusion_matrix

from .exceptions import DataError, ImportanceModeError, NoOobDataError
from .forest import ImportanceMode, split_chunks, tree_predictions
from .sampling import make_rng, permute
from .tree import TreeType

logger = logging.getLogger(__name__)

# rows per block of the pairwise C index comparison
_PAIR_BLOCK = 1024


@dataclass(eq=False)
class OobSummary:
    """
    Out-of-bag predictions and error.

    ``predictions`` follow ``predict_forest`` conventions; rows that were
    in-bag in every tree have ``has_oob`` False and hold -1 (class index) or
    NaN. ``error`` is the misclassification frequency (classification), mean
    squared error (regression), mean squared error of the true-class
    probability (probability) or 1 - C index (survival).
    """

    tree_type: TreeType
    predictions: np.ndarray
    has_oob: np.ndarray
    error: float

    @property
    def n_oob(self):
        return int(self.has_oob.sum())


@dataclass(eq=False)
class ImportanceReport:
    mode: int
    feature_names: List[str]
    values: np.ndarray
    standard_errors: Optional[np.ndarray] = None

    @property
    def label(self):
        return ImportanceMode.LABELS[self.mode]

    def as_dict(self):
        return dict(zip(self.feature_names, self.values.tolist()))


def survival_risk(curves):
    """Risk score per row: summed estimated mortality over the forest timepoints"""
    return np.sum(1.0 - np.atleast_2d(curves), axis=1)


def c_index(event_times, statuses, risk_scores):
    """
    Harrell's concordance index.

    A pair (i, j) is comparable when i has an event and either
    ``time_i < time_j`` or the times tie and j is censored. It is concordant
    when i has the higher risk; tied risks count one half.

    Returns:
        float: Concordant fraction in [0, 1]

    Raises:
        DataError: Unequal lengths, or no comparable pair
    """
    times = np.asarray(event_times, dtype=np.float64)
    status = np.asarray(statuses)
    risk = np.asarray(risk_scores, dtype=np.float64)
    if not len(times) == len(status) == len(risk):
        raise DataError('C index inputs have different lengths')

    concordant = 0.0
    comparable = 0
    events = np.flatnonzero(status == 1)
    for start in range(0, len(events), _PAIR_BLOCK):
        i = events[start:start + _PAIR_BLOCK]
        earlier = times[i, None] < times[None, :]
        tied = (times[i, None] == times[None, :]) & (status[None, :] == 0)
        usable = earlier | tied
        comparable += int(usable.sum())
        higher = risk[i, None] > risk[None, :]
        same = risk[i, None] == risk[None, :]
        concordant += float((usable & higher).sum()) + 0.5 * float((usable & same).sum())
    if comparable == 0:
        raise DataError('No comparable pairs for the C index')
    return concordant / comparable


def _oob_rows(forest, t):
    if not forest.bag_records:
        raise NoOobDataError('Forest has no bag records; out-of-bag results need the training run')
    return forest.bag_records[t].oob_indices


def oob_error(forest, dataset):
    """
    Out-of-bag predictions and prediction error.

    Each sample is predicted by the trees for which it is out of bag; the
    error is taken over samples with at least one such tree.

    Raises:
        NoOobDataError: No bag records, or no sample was ever out of bag
    """
    response = dataset.response
    source = dataset.select_features(forest.feature_names)
    n = dataset.n_samples
    tree_type = forest.tree_type
    counts = np.zeros(n, dtype=np.int64)
    if tree_type is TreeType.CLASSIFICATION:
        totals = np.zeros((n, len(forest.classes)), dtype=np.int64)
    elif tree_type is TreeType.REGRESSION:
        totals = np.zeros(n)
    else:
        totals = np.zeros((n, forest.trees[0].payload.shape[1]))

    for t in range(forest.num_trees):
        rows = _oob_rows(forest, t)
        if rows.size == 0:
            continue
        predicted = tree_predictions(forest, t, source, rows)
        counts[rows] += 1
        if tree_type is TreeType.CLASSIFICATION:
            totals[rows, predicted] += 1
        else:
            totals[rows] += predicted

    has_oob = counts > 0
    if not has_oob.any():
        raise NoOobDataError('No sample is out of bag in any tree')
    used = np.flatnonzero(has_oob)
    logger.debug('%d of %d samples have out-of-bag predictions', used.size, n)

    if tree_type is TreeType.CLASSIFICATION:
        predictions = np.full(n, -1, dtype=np.intp)
        predictions[used] = np.argmax(totals[used], axis=1)
        error = float(np.mean(predictions[used] != response.labels[used]))
    elif tree_type is TreeType.REGRESSION:
        predictions = np.full(n, np.nan)
        predictions[used] = totals[used] / counts[used]
        error = float(np.mean((predictions[used] - response.values[used]) ** 2))
    else:
        predictions = np.full(totals.shape, np.nan)
        predictions[used] = totals[used] / counts[used, None]
        if tree_type is TreeType.PROBABILITY:
            error = _probability_error(predictions[used], response.labels[used])
        else:
            risk = survival_risk(predictions[used])
            error = 1.0 - c_index(response.time[used], response.status[used], risk)
    return OobSummary(tree_type=tree_type, predictions=predictions, has_oob=has_oob, error=error)


def _probability_error(probabilities, labels):
    true_class = probabilities[np.arange(len(labels)), labels]
    return float(np.mean((1.0 - true_class) ** 2))


def gini_importance(forest):
    """
    Impurity importance: per feature, the summed weighted split gains over
    all trees, divided by the number of trees.

    Raises:
        ImportanceModeError: The forest was grown without impurity accumulation
    """
    if any(tree.impurity_importance is None for tree in forest.trees):
        raise ImportanceModeError('Forest was not grown with impurity importance')
    total = np.sum([tree.impurity_importance for tree in forest.trees], axis=0)
    return ImportanceReport(ImportanceMode.GINI, list(forest.feature_names), total / forest.num_trees)


class _PermutedSource:
    """Out-of-bag rows of one tree with one feature's values shuffled"""

    def __init__(self, dataset, rows, feature, permuted):
        self.dataset = dataset
        self.rows = rows
        self.feature = feature
        self.permuted = permuted

    def feature_values(self, j, local):
        if j == self.feature:
            return self.permuted[local]
        return self.dataset.feature_values(j, self.rows[local])


def _tree_measure(tree_type, response, rows, predicted):
    """Accuracy-type measure of one tree on its OOB rows: larger is better"""
    if tree_type is TreeType.CLASSIFICATION:
        return float(np.mean(predicted == response.labels[rows]))
    if tree_type is TreeType.REGRESSION:
        return -float(np.mean((predicted - response.values[rows]) ** 2))
    if tree_type is TreeType.PROBABILITY:
        return -_probability_error(predicted, response.labels[rows])
    return c_index(response.time[rows], response.status[rows], survival_risk(predicted))


def _permutation_terms(forest, source, seed, tree_indices):
    response = source.response
    tree_type = forest.tree_type
    terms = []
    for t in tree_indices:
        rows = _oob_rows(forest, t)
        if rows.size < 2:
            continue
        try:
            baseline = _tree_measure(tree_type, response, rows, tree_predictions(forest, t, source, rows))
        except DataError:
            # survival OOB set without a comparable pair
            continue
        v = np.zeros(source.n_features)
        local = np.arange(rows.size)
        used = np.unique(forest.trees[t].split_feature[forest.trees[t].split_feature >= 0])
        for j in used:
            rng = make_rng(seed, t, j)
            permuted = permute(source.feature_values(j, rows), rng)
            shuffled = _PermutedSource(source, rows, j, permuted)
            predicted = tree_predictions(forest, t, shuffled, local)
            v[j] = baseline - _tree_measure(tree_type, response, rows, predicted)
        terms.append(v)
    return terms


def permutation_importance(forest, dataset, scaled=False, seed=None, worker_count=1):
    """
    Permutation importance from out-of-bag samples.

    For tree t and feature j, v[t, j] is the tree's OOB accuracy measure
    minus the same measure after shuffling feature j among the tree's OOB
    samples (one shuffle per tree and feature, stream ``(seed, t, j)``).
    Features a tree never splits on get v = 0. Trees with fewer than two
    OOB samples are skipped.

    Args:
        forest (ForestModel): Forest with bag records
        dataset (Dataset): The training data
        scaled (bool): Divide the mean by its standard error sd / sqrt(T)
        seed (int): Permutation master seed, defaults to the forest seed
        worker_count (int): Parallel workers over trees

    Returns:
        ImportanceReport: Raw or scaled importance per feature

    Raises:
        NoOobDataError: No tree contributed a term
    """
    seed = forest.config.seed if seed is None else seed
    source = dataset.select_features(forest.feature_names)
    tree_indices = range(forest.num_trees)
    if worker_count <= 1:
        terms = _permutation_terms(forest, source, seed, tree_indices)
    else:
        batches = Parallel(n_jobs=worker_count)(
            delayed(_permutation_terms)(forest, source, seed, chunk)
            for chunk in split_chunks(tree_indices, worker_count)
        )
        terms = [v for batch in batches for v in batch]
    if not terms:
        raise NoOobDataError('No tree has enough out-of-bag samples for permutation importance')

    terms = np.vstack(terms)
    n_terms = terms.shape[0]
    raw = terms.mean(axis=0)
    sd = terms.std(axis=0, ddof=1) if n_terms > 1 else np.zeros(terms.shape[1])
    standard_errors = sd / np.sqrt(n_terms)
    logger.debug('Permutation importance from %d trees', n_terms)
    if not scaled:
        return ImportanceReport(ImportanceMode.PERMUTATION_RAW, list(forest.feature_names), raw, standard_errors)
    with np.errstate(divide='ignore', invalid='ignore'):
        values = np.where(standard_errors > 0, raw / standard_errors, 0.0)
    return ImportanceReport(ImportanceMode.PERMUTATION_SCALED, list(forest.feature_names), values, standard_errors)


def forest_importance(forest, dataset, worker_count=1):
    """Importance in the mode the forest was grown with, or None"""
    mode = forest.config.importance_mode
    if mode == ImportanceMode.NONE:
        return None
    if mode == ImportanceMode.GINI:
        return gini_importance(forest)
    return permutation_importance(
        forest, dataset, scaled=mode == ImportanceMode.PERMUTATION_SCALED, worker_count=worker_count,
    )


def confusion_matrix(truth, predicted, classes):
    """
    Count matrix with rows = true class and columns = predicted class.

    Raises:
        DataError: A label outside ``classes``
    """
    classes = [str(c) for c in classes]
    truth = np.asarray(truth).astype(str)
    predicted = np.asarray(predicted).astype(str)
    if len(truth) != len(predicted):
        raise DataError('Truth and prediction have different lengths')
    unknown = sorted(set(truth.tolist()).union(predicted.tolist()).difference(classes))
    if unknown:
        raise DataError(f'Unknown class labels: {", ".join(unknown)}')
    return _sk_confusion_matrix(truth, predicted, labels=classes)

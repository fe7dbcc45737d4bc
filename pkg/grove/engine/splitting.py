"""
Split criteria and node-splitting search.

Three search algorithms share one contract: for a node and a candidate
feature, find the threshold (midpoint between adjacent distinct values,
values <= threshold go left) with the largest criterion gain.

- presorted: walks the dataset-wide sorted index of the feature and keeps
  node members; pays O(n) per call but never sorts.
- sort-on-demand: gathers the node's values and sorts them locally.
- fixed-levels: for packed genotypes; buckets node members by level 0/1/2.

All three reduce the node to per-distinct-value sufficient statistics,
accumulated in ascending row order within each value, and evaluate every
boundary with the same code. Gains are therefore bit-identical across
algorithms, which keeps forests independent of memory mode and storage.
"""

import enum
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data_model import GENOTYPE_LEVELS, MemoryMode, ResponseKind, StorageKind
from .exceptions import DataError

logger = logging.getLogger(__name__)

DEFAULT_SPLIT_CUTOFF = 100

# Gains at or below this fraction of the node's impurity (Gini) or centred
# sum of squares (variance) are rounding noise.
_GAIN_RTOL = 1e-12
_MIN_LOGRANK = 1e-9


class Criterion(enum.Enum):
    GINI = 'gini'
    VARIANCE = 'variance'
    LOGRANK = 'logrank'


class SplitStrategy(enum.Enum):
    PRESORTED = 'presorted'
    SORT_ON_DEMAND = 'sort_on_demand'
    FIXED_LEVELS = 'fixed_levels'


@dataclass(frozen=True)
class SplitResult:
    """Best split of a node: samples with value <= threshold go left"""

    feature: int
    threshold: float
    gain: float


class NodeView:
    """
    Samples of one tree node.

    ``sample_indices`` is ascending and repeats each row by its in-bag
    multiplicity, so duplicates weigh into every statistic.
    """

    __slots__ = ('sample_indices', '_multiplicity')

    def __init__(self, sample_indices):
        self.sample_indices = np.asarray(sample_indices, dtype=np.intp)
        if self.sample_indices.size == 0:
            raise DataError('A node needs at least one sample')
        self._multiplicity = None

    @property
    def node_size(self):
        return len(self.sample_indices)

    def multiplicity(self, n_rows):
        """Per-row count of this node's samples over all n_rows dataset rows"""
        if self._multiplicity is None or len(self._multiplicity) != n_rows:
            self._multiplicity = np.bincount(self.sample_indices, minlength=n_rows)
        return self._multiplicity


def criterion_for(response_kind, probability=False):
    """Split criterion used for a response kind"""
    if response_kind is ResponseKind.CLASSIFICATION or probability:
        return Criterion.GINI
    if response_kind is ResponseKind.REGRESSION:
        return Criterion.VARIANCE
    return Criterion.LOGRANK


# ---------------------------------------------------------------------------
# Criterion functions
# ---------------------------------------------------------------------------

def gini_impurity(class_counts):
    """
    Gini impurity 1 - sum_k (count_k / N)^2.

    Raises:
        DataError: All counts are zero
    """
    counts = np.asarray(class_counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise DataError('Gini impurity of an empty node is undefined')
    return float(1.0 - np.sum((counts / total) ** 2))


def gini_decrease(parent_counts, left_counts, right_counts):
    """Impurity decrease imp(P) - N_L/N imp(L) - N_R/N imp(R)"""
    parent = np.asarray(parent_counts, dtype=np.float64)
    left = np.asarray(left_counts, dtype=np.float64)
    right = np.asarray(right_counts, dtype=np.float64)
    if parent.shape != left.shape or parent.shape != right.shape or not np.array_equal(left + right, parent):
        raise DataError('Child class counts do not add up to the parent counts')
    n, n_left, n_right = parent.sum(), left.sum(), right.sum()
    if n_left <= 0 or n_right <= 0:
        raise DataError('Both children must be non-empty')
    return float(
        gini_impurity(parent)
        - n_left / n * gini_impurity(left)
        - n_right / n * gini_impurity(right)
    )


def _population_variance(values):
    centred = values - values.mean()
    return float(np.dot(centred, centred) / len(values))


def variance_decrease(parent_values, left_values, right_values):
    """Var(P) - N_L/N Var(L) - N_R/N Var(R), population variances"""
    parent = np.asarray(parent_values, dtype=np.float64)
    left = np.asarray(left_values, dtype=np.float64)
    right = np.asarray(right_values, dtype=np.float64)
    if len(left) + len(right) != len(parent):
        raise DataError('Child sizes do not add up to the parent size')
    if len(left) == 0 or len(right) == 0:
        raise DataError('Both children must be non-empty')
    n = len(parent)
    return (
        _population_variance(parent)
        - len(left) / n * _population_variance(left)
        - len(right) / n * _population_variance(right)
    )


def _logrank_from_tables(d_left, y_left, d_total, y_total):
    """
    Standardised log-rank statistic from event/at-risk tables.

    The last axis runs over pooled event times; leading axes are candidates.
    Times with at most one sample at risk add no variance.
    """
    d_left = np.asarray(d_left, dtype=np.float64)
    y_left = np.asarray(y_left, dtype=np.float64)
    d_total = np.asarray(d_total, dtype=np.float64)
    y_total = np.asarray(y_total, dtype=np.float64)

    numerator = np.sum(d_left - y_left * d_total / y_total, axis=-1)
    usable = y_total > 1
    share = y_left / y_total
    spread = np.where(usable, (y_total - d_total) / np.where(usable, y_total - 1, 1.0), 0.0)
    variance = np.sum(share * (1.0 - share) * spread * d_total, axis=-1)
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(variance > 0, np.abs(numerator) / np.sqrt(np.where(variance > 0, variance, 1.0)), np.nan)


def logrank_statistic(left_child, right_child):
    """
    Absolute standardised log-rank statistic comparing two children.

    Args:
        left_child: (times, statuses) of the left child
        right_child: (times, statuses) of the right child

    Returns:
        float or None: None when no event time has usable variance
    """
    left_time, left_status = (np.asarray(a, dtype=np.float64) for a in left_child)
    right_time, right_status = (np.asarray(a, dtype=np.float64) for a in right_child)
    if len(left_time) == 0 or len(right_time) == 0:
        raise DataError('Both children must be non-empty')

    time = np.concatenate([left_time, right_time])
    status = np.concatenate([left_status, right_status])
    event_times = np.unique(time[status == 1])
    if event_times.size == 0:
        return None

    d_left = np.array([np.sum((left_time == t) & (left_status == 1)) for t in event_times])
    y_left = np.array([np.sum(left_time >= t) for t in event_times])
    d_total = np.array([np.sum((time == t) & (status == 1)) for t in event_times])
    y_total = np.array([np.sum(time >= t) for t in event_times])

    statistic = float(_logrank_from_tables(d_left, y_left, d_total, y_total))
    return None if np.isnan(statistic) else statistic


# ---------------------------------------------------------------------------
# Boundary evaluation on per-value statistics
# ---------------------------------------------------------------------------

def _gini_gains(group, n_groups, labels, n_classes):
    counts = np.bincount(group * n_classes + labels, minlength=n_groups * n_classes)
    counts = counts.reshape(n_groups, n_classes).astype(np.float64)
    left = np.cumsum(counts, axis=0)[:-1]
    total = counts.sum(axis=0)
    right = total - left
    n = total.sum()
    parent_term = np.sum(total ** 2) / n
    gains = (np.sum(left ** 2, axis=1) / left.sum(axis=1)
             + np.sum(right ** 2, axis=1) / right.sum(axis=1)
             - parent_term) / n
    return gains, parent_term / n


def _variance_gains(group, n_groups, values):
    sizes = np.bincount(group, minlength=n_groups).astype(np.float64)
    n = sizes.sum()
    # centred on the node mean so large offsets do not swamp the gains
    mean = np.bincount(group, weights=values, minlength=n_groups).sum() / n
    centred = values - mean
    sums = np.bincount(group, weights=centred, minlength=n_groups)
    left_sum = np.cumsum(sums)[:-1]
    left_n = np.cumsum(sizes)[:-1]
    total_sum = sums.sum()
    right_sum = total_sum - left_sum
    right_n = n - left_n
    gains = (left_sum ** 2 / left_n + right_sum ** 2 / right_n - total_sum ** 2 / n) / n
    scale = np.bincount(group, weights=centred ** 2, minlength=n_groups).sum() / n
    return gains, scale


def _logrank_gains(group, n_groups, time, status):
    events = status == 1
    event_times = np.unique(time[events])
    n_times = len(event_times)
    if n_times == 0:
        return None, 0.0

    # A sample is at risk at event index i while i < reach.
    reach = np.searchsorted(event_times, time, side='right')
    reach_counts = np.bincount(group * (n_times + 1) + reach, minlength=n_groups * (n_times + 1))
    reach_counts = reach_counts.reshape(n_groups, n_times + 1)
    at_risk = np.cumsum(reach_counts[:, ::-1], axis=1)[:, ::-1][:, 1:]

    death_index = np.searchsorted(event_times, time[events])
    deaths = np.bincount(group[events] * n_times + death_index, minlength=n_groups * n_times)
    deaths = deaths.reshape(n_groups, n_times)

    y_left = np.cumsum(at_risk, axis=0)[:-1]
    d_left = np.cumsum(deaths, axis=0)[:-1]
    gains = _logrank_from_tables(d_left, y_left, deaths.sum(axis=0), at_risk.sum(axis=0))
    return gains, 1.0


def _best_boundary(dataset, rows, group, n_groups, criterion):
    """Index of the best boundary between groups b and b+1 and its gain, or None"""
    if n_groups < 2:
        return None
    response = dataset.response
    if criterion is Criterion.GINI:
        gains, scale = _gini_gains(group, n_groups, response.labels[rows], response.n_classes)
        floor = _GAIN_RTOL * scale
    elif criterion is Criterion.VARIANCE:
        gains, scale = _variance_gains(group, n_groups, response.values[rows])
        floor = _GAIN_RTOL * scale
    else:
        gains, _ = _logrank_gains(group, n_groups, response.time[rows], response.status[rows])
        if gains is None:
            return None
        floor = _MIN_LOGRANK

    valid = np.isfinite(gains) & (gains > floor)
    if not valid.any():
        return None
    gains = np.where(valid, gains, -np.inf)
    boundary = int(np.argmax(gains))
    return boundary, float(gains[boundary])


def _midpoint(lower, upper):
    threshold = (lower + upper) / 2.0
    # adjacent floats: the midpoint may round up onto the upper value
    return threshold if threshold < upper else lower


def _scan_sorted(dataset, j, rows_sorted, values_sorted, criterion):
    starts = np.empty(len(values_sorted), dtype=bool)
    starts[0] = False
    np.not_equal(values_sorted[1:], values_sorted[:-1], out=starts[1:])
    group = np.cumsum(starts)
    n_groups = int(group[-1]) + 1
    found = _best_boundary(dataset, rows_sorted, group, n_groups, criterion)
    if found is None:
        return None
    boundary, gain = found
    distinct = values_sorted[np.concatenate(([0], np.flatnonzero(starts)))]
    return SplitResult(j, _midpoint(distinct[boundary], distinct[boundary + 1]), gain)


def best_split_presorted(dataset, node, j, criterion):
    """
    Best split of ``node`` on feature j using the dataset-wide sorted index.

    Returns:
        SplitResult or None: None when the feature is constant in the node
            or no threshold has positive gain
    """
    order = dataset.sorted_index(j)
    counts = node.multiplicity(dataset.n_samples)
    members = order[counts[order] > 0]
    rows_sorted = np.repeat(members, counts[members])
    values_sorted = dataset.feature_values(j, rows_sorted)
    return _scan_sorted(dataset, j, rows_sorted, values_sorted, criterion)


def best_split_sort_on_demand(dataset, node, j, criterion):
    """Best split of ``node`` on feature j, sorting the node's values locally"""
    rows = node.sample_indices
    values = dataset.feature_values(j, rows)
    order = np.argsort(values, kind='stable')
    return _scan_sorted(dataset, j, rows[order], values[order], criterion)


def best_split_fixed_levels(dataset, node, j, criterion):
    """
    Best split of ``node`` on packed genotype feature j.

    One counting pass buckets samples by level; thresholds are midpoints
    between the levels present (0.5 and 1.5 when all three occur).
    """
    column = dataset.column(j)
    rows = node.sample_indices
    codes = column.take_codes(rows)
    present = np.bincount(codes, minlength=len(GENOTYPE_LEVELS)) > 0
    levels = np.flatnonzero(present)
    group = (np.cumsum(present) - 1)[codes]
    found = _best_boundary(dataset, rows, group, len(levels), criterion)
    if found is None:
        return None
    boundary, gain = found
    return SplitResult(j, _midpoint(float(levels[boundary]), float(levels[boundary + 1])), gain)


SPLITTERS = {
    SplitStrategy.PRESORTED: best_split_presorted,
    SplitStrategy.SORT_ON_DEMAND: best_split_sort_on_demand,
    SplitStrategy.FIXED_LEVELS: best_split_fixed_levels,
}


def select_split_strategy(node_size, memory_mode, storage, split_cutoff=DEFAULT_SPLIT_CUTOFF):
    """
    Search algorithm for a node/feature pair.

    Packed genotypes always use fixed levels. The memory-efficient and GWAS
    modes sort on demand; the runtime mode uses the presorted index for
    nodes larger than ``split_cutoff`` and sorts on demand below it.
    """
    if storage is StorageKind.PACKED:
        return SplitStrategy.FIXED_LEVELS
    if memory_mode is MemoryMode.RUNTIME and node_size > split_cutoff:
        return SplitStrategy.PRESORTED
    return SplitStrategy.SORT_ON_DEMAND


def find_best_split(dataset, node, candidates, criterion,
                    memory_mode=MemoryMode.RUNTIME, split_cutoff=DEFAULT_SPLIT_CUTOFF) -> Optional[SplitResult]:
    """
    Best split over candidate features.

    Ties keep the first candidate in draw order; within a feature the
    lowest threshold wins.
    """
    best = None
    for j in candidates:
        strategy = select_split_strategy(node.node_size, memory_mode, dataset.column(j).storage, split_cutoff)
        result = SPLITTERS[strategy](dataset, node, int(j), criterion)
        if result is not None and (best is None or result.gain > best.gain):
            best = result
    return best

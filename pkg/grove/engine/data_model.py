"""
Dataset representation for forest growth.

Features are stored column-major, either as dense 64-bit reals or as 2-bit
packed genotype codes (minor allele counts 0, 1, 2). The response is typed:
class labels, real values or (time, status) survival pairs.
"""

import enum
import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from sklearn.preprocessing import LabelEncoder

from .exceptions import DataError

logger = logging.getLogger(__name__)

GENOTYPE_LEVELS = (0, 1, 2)
CELLS_PER_BYTE = 4


class StorageKind(enum.Enum):
    DENSE = 'dense'
    PACKED = 'packed'


class MemoryMode(enum.IntEnum):
    """Growth mode; the integer value is the ``--memorymode`` code."""

    RUNTIME = 0
    MEMORY_EFFICIENT = 1
    GWAS = 2


class ResponseKind(enum.Enum):
    CLASSIFICATION = 'classification'
    REGRESSION = 'regression'
    SURVIVAL = 'survival'


def _encode_codes(codes):
    padded_length = -(-len(codes) // CELLS_PER_BYTE) * CELLS_PER_BYTE
    padded = np.zeros(padded_length, dtype=np.uint8)
    padded[:len(codes)] = codes
    quads = padded.reshape(-1, CELLS_PER_BYTE)
    return (quads[:, 0] | (quads[:, 1] << 2) | (quads[:, 2] << 4) | (quads[:, 3] << 6)).astype(np.uint8)


def _decode_codes(packed, rows):
    rows = np.asarray(rows, dtype=np.intp)
    shifts = ((rows & 3) << 1).astype(np.uint8)
    return (packed[rows >> 2] >> shifts) & np.uint8(3)


class FeatureColumn:
    """
    One named feature column.

    Dense columns hold float64 values; packed columns hold genotype codes
    at 2 bits per cell, four cells per byte, lowest bits first.
    """

    def __init__(self, name, n, dense=None, packed=None):
        if (dense is None) == (packed is None):
            raise ValueError('exactly one of dense or packed storage is required')
        self.name = str(name)
        self.n = int(n)
        self._dense = dense
        self._packed = packed

    @classmethod
    def from_values(cls, name, values):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim != 1:
            raise DataError(f'Feature "{name}" must be one-dimensional')
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise DataError(
                f'Feature "{name}" has a non-finite value at index {bad[0]}',
                index=int(bad[0]),
            )
        values.setflags(write=False)
        return cls(name, len(values), dense=values)

    @property
    def storage(self):
        return StorageKind.PACKED if self._packed is not None else StorageKind.DENSE

    @property
    def is_packed(self):
        return self._packed is not None

    @property
    def nbytes(self):
        """Payload size of the stored column in bytes"""
        return (self._packed if self.is_packed else self._dense).nbytes

    @property
    def payload(self):
        return self._packed if self.is_packed else self._dense

    def values(self):
        """All values as float64"""
        if self.is_packed:
            return _decode_codes(self._packed, np.arange(self.n)).astype(np.float64)
        return self._dense

    def take(self, rows):
        """Values at the given row indices as float64"""
        if self.is_packed:
            return _decode_codes(self._packed, rows).astype(np.float64)
        return self._dense[rows]

    def take_codes(self, rows):
        """Genotype codes (uint8) at the given rows; packed columns only"""
        if not self.is_packed:
            raise DataError(f'Feature "{self.name}" is not a packed genotype column')
        return _decode_codes(self._packed, rows)

    def is_genotype(self):
        """True if every value is one of the minor allele counts 0, 1, 2"""
        if self.is_packed:
            return True
        return bool(np.isin(self._dense, GENOTYPE_LEVELS).all())

    def __repr__(self):
        return f'FeatureColumn({self.name!r}, n={self.n}, storage={self.storage.value})'


def pack_genotypes(column, name=None):
    """
    Pack a genotype column into 2-bit codes.

    Args:
        column: FeatureColumn or array of values, each exactly 0, 1 or 2
        name (str): Column name when ``column`` is a plain array

    Returns:
        FeatureColumn: Packed column, 2 bits per cell

    Raises:
        DataError: A value outside {0, 1, 2}; ``index`` names the first offender
    """
    if isinstance(column, FeatureColumn):
        if column.is_packed:
            return column
        name = column.name if name is None else name
        values = column.values()
    else:
        values = np.asarray(column, dtype=np.float64)
    name = 'genotype' if name is None else name

    bad = np.flatnonzero(~np.isin(values, GENOTYPE_LEVELS))
    if bad.size:
        raise DataError(
            f'Feature "{name}" has a non-genotype value {values[bad[0]]!r} at index {bad[0]}',
            index=int(bad[0]),
        )
    packed = _encode_codes(values.astype(np.uint8))
    packed.setflags(write=False)
    return FeatureColumn(name, len(values), packed=packed)


@dataclass(frozen=True)
class Response:
    """
    Typed dependent variable.

    Classification responses carry integer label indices into ``classes``;
    regression responses carry ``values``; survival responses carry
    ``time`` and ``status`` (1 = event, 0 = censored).
    """

    kind: ResponseKind
    name: str
    labels: Optional[np.ndarray] = None
    classes: tuple = ()
    values: Optional[np.ndarray] = None
    time: Optional[np.ndarray] = None
    status: Optional[np.ndarray] = None
    status_name: Optional[str] = None

    @property
    def n(self):
        if self.kind is ResponseKind.CLASSIFICATION:
            return len(self.labels)
        if self.kind is ResponseKind.REGRESSION:
            return len(self.values)
        return len(self.time)

    @property
    def n_classes(self):
        return len(self.classes)

    @classmethod
    def classification(cls, name, labels):
        labels = np.asarray(labels).astype(str)
        encoder = LabelEncoder()
        codes = encoder.fit_transform(labels)
        classes = tuple(str(c) for c in encoder.classes_)
        if len(classes) < 2:
            raise DataError(
                f'Classification target "{name}" has a single class ({classes[0] if classes else "none"})'
            )
        return cls(ResponseKind.CLASSIFICATION, name, labels=codes.astype(np.intp), classes=classes)

    @classmethod
    def regression(cls, name, values):
        values = _numeric(name, values)
        return cls(ResponseKind.REGRESSION, name, values=values)

    @classmethod
    def survival(cls, time_name, time, status_name, status):
        time = _numeric(time_name, time)
        status = _numeric(status_name, status)
        if len(time) != len(status):
            raise DataError('Survival time and status have different lengths')
        if (time < 0).any():
            raise DataError(f'Survival time "{time_name}" has negative values')
        if not np.isin(status, (0, 1)).all():
            raise DataError(f'Survival status "{status_name}" must be coded 0 (censored) or 1 (event)')
        if not (status == 1).any():
            raise DataError(f'Survival status "{status_name}" has no events')
        return cls(
            ResponseKind.SURVIVAL, time_name,
            time=time, status=status.astype(np.intp), status_name=status_name,
        )

    def event_timepoints(self):
        """Ascending distinct event times"""
        return np.unique(self.time[self.status == 1])


def _numeric(name, values):
    try:
        values = pd.to_numeric(pd.Series(values), errors='raise').to_numpy(dtype=np.float64)
    except (ValueError, TypeError) as e:
        raise DataError(f'Column "{name}" is not numeric: {e}') from e
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise DataError(f'Column "{name}" has a non-finite value at index {bad[0]}', index=int(bad[0]))
    return values


class Dataset:
    """
    Immutable column-major dataset.

    ``response`` is None for prediction-only data. The sorted-index cache is
    filled before parallel growth starts and only read afterwards.
    """

    def __init__(self, features: Sequence[FeatureColumn], response: Optional[Response] = None):
        features = list(features)
        if not features:
            raise DataError('Dataset has no feature columns')
        names = [f.name for f in features]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise DataError(f'Duplicate feature names: {", ".join(duplicates)}')
        n = features[0].n
        for column in features:
            if column.n != n:
                raise DataError(f'Feature "{column.name}" has {column.n} values, expected {n}')
        if response is not None and response.n != n:
            raise DataError(f'Response has {response.n} values, expected {n}')

        self.features = features
        self.response = response
        self.sorted_index_cache = {}
        self._positions = {name: j for j, name in enumerate(names)}

    @property
    def n_samples(self):
        return self.features[0].n

    @property
    def n_features(self):
        return len(self.features)

    @property
    def feature_names(self):
        return [f.name for f in self.features]

    def column(self, j):
        return self.features[j]

    def feature_values(self, j, rows):
        return self.features[j].take(rows)

    def sorted_index(self, j):
        """Cached ascending stable sort order of feature j, built on first use"""
        order = self.sorted_index_cache.get(j)
        if order is None:
            order = build_sorted_index(self, j)
        return order

    def build_sorted_indices(self):
        """Fill the sort cache for every dense column"""
        for j, column in enumerate(self.features):
            if not column.is_packed and j not in self.sorted_index_cache:
                build_sorted_index(self, j)
        logger.debug('Sorted index cache holds %d columns', len(self.sorted_index_cache))

    def select_features(self, names):
        """
        Dataset restricted to the named features, in the given order.

        Raises:
            DataError: Listing every name that is absent
        """
        missing = [name for name in names if name not in self._positions]
        if missing:
            raise DataError(f'Missing features: {", ".join(missing)}')
        return Dataset([self.features[self._positions[name]] for name in names], self.response)

    def with_packed_genotypes(self):
        """Copy in which every column with values in {0, 1, 2} is packed"""
        columns = [pack_genotypes(c) if c.is_genotype() else c for c in self.features]
        packed = sum(c.is_packed for c in columns)
        logger.info('Packed %d of %d feature columns as genotypes', packed, len(columns))
        return Dataset(columns, self.response)

    def to_matrix(self, rows=None):
        """Dense float64 matrix (rows x features)"""
        rows = np.arange(self.n_samples) if rows is None else np.asarray(rows)
        return np.column_stack([c.take(rows) for c in self.features])

    def nbytes(self):
        return sum(c.nbytes for c in self.features)

    def __repr__(self):
        kind = self.response.kind.value if self.response is not None else 'none'
        return f'Dataset(n={self.n_samples}, p={self.n_features}, response={kind})'


@dataclass(frozen=True)
class ResponseSpec:
    """Which column(s) form the dependent variable and how to read them"""

    kind: ResponseKind
    name: str
    status_name: Optional[str] = None


def build_dataset(columns: Mapping[str, Sequence], response_spec: ResponseSpec):
    """
    Build a Dataset from named value arrays.

    Args:
        columns: Ordered mapping of column name to values (numbers or strings)
        response_spec (ResponseSpec): Response kind and column name(s)

    Returns:
        Dataset: Features in column order with the response column(s) removed

    Raises:
        DataError: Length mismatch, non-finite or non-numeric feature values,
            unknown response column, single-class classification target
    """
    columns = dict(columns)
    if not columns:
        raise DataError('No columns given')
    lengths = {name: len(values) for name, values in columns.items()}
    if len(set(lengths.values())) > 1:
        detail = ', '.join(f'{name}={length}' for name, length in lengths.items())
        raise DataError(f'Column lengths differ: {detail}')

    response_names = [response_spec.name]
    if response_spec.kind is ResponseKind.SURVIVAL:
        if not response_spec.status_name:
            raise DataError('Survival response needs a status column')
        response_names.append(response_spec.status_name)
    for name in response_names:
        if name not in columns:
            raise DataError(f'Unknown response column "{name}"')

    if response_spec.kind is ResponseKind.CLASSIFICATION:
        response = Response.classification(response_spec.name, columns[response_spec.name])
    elif response_spec.kind is ResponseKind.REGRESSION:
        response = Response.regression(response_spec.name, columns[response_spec.name])
    else:
        response = Response.survival(
            response_spec.name, columns[response_spec.name],
            response_spec.status_name, columns[response_spec.status_name],
        )

    features = build_features(
        {name: values for name, values in columns.items() if name not in response_names}
    )
    return Dataset(features, response)


def build_features(columns: Mapping[str, Sequence]):
    """Dense feature columns from named value arrays; values must be numeric"""
    features = []
    for name, values in columns.items():
        try:
            numeric = pd.to_numeric(pd.Series(values), errors='raise').to_numpy(dtype=np.float64)
        except (ValueError, TypeError) as e:
            raise DataError(f'Non-numeric feature column "{name}": {e}') from e
        features.append(FeatureColumn.from_values(name, numeric))
    return features


def build_sorted_index(dataset, j):
    """
    Stable ascending sort order of feature j, cached on the dataset.

    Returns:
        np.ndarray: Permutation of 0..n-1 along which values are non-decreasing
    """
    if not 0 <= j < dataset.n_features:
        raise IndexError(f'feature index {j} out of range')
    order = np.argsort(dataset.column(j).values(), kind='stable')
    order.setflags(write=False)
    dataset.sorted_index_cache[j] = order
    return order

"""
Random forest engine: classification, regression, probability and survival
forests with runtime, memory-efficient and packed-genotype storage modes.

This package has no Django dependency.
"""

from .data_model import (
    Dataset,
    FeatureColumn,
    MemoryMode,
    Response,
    ResponseKind,
    ResponseSpec,
    StorageKind,
    build_dataset,
    pack_genotypes,
)
from .evaluation import (
    ImportanceReport,
    OobSummary,
    c_index,
    confusion_matrix,
    forest_importance,
    gini_importance,
    oob_error,
    permutation_importance,
)
from .exceptions import (
    ConfigError,
    DataError,
    ForestFileError,
    GroveError,
    ImportanceModeError,
    NoOobDataError,
)
from .forest import ForestModel, GrowConfig, ImportanceMode, grow_forest, predict_forest
from .serialization import deserialize_forest, read_forest, serialize_forest, write_forest
from .simulation import Endpoint, SimSpec, simulate_snp_dataset
from .tree import TreeModel, TreeType, grow_tree, predict_tree

__all__ = [
    'ConfigError',
    'DataError',
    'Dataset',
    'Endpoint',
    'FeatureColumn',
    'ForestFileError',
    'ForestModel',
    'GroveError',
    'GrowConfig',
    'ImportanceMode',
    'ImportanceModeError',
    'ImportanceReport',
    'MemoryMode',
    'NoOobDataError',
    'OobSummary',
    'Response',
    'ResponseKind',
    'ResponseSpec',
    'SimSpec',
    'StorageKind',
    'TreeModel',
    'TreeType',
    'build_dataset',
    'c_index',
    'confusion_matrix',
    'deserialize_forest',
    'forest_importance',
    'gini_importance',
    'grow_forest',
    'grow_tree',
    'oob_error',
    'pack_genotypes',
    'permutation_importance',
    'predict_forest',
    'predict_tree',
    'read_forest',
    'serialize_forest',
    'simulate_snp_dataset',
    'write_forest',
]

"""
Binary forest files.

Layout (all integers little-endian)::

    magic       8 bytes  b"GROVEF1\\0"
    version     u8
    header_len  u32
    header      UTF-8 JSON, sorted keys
    timepoints  float64[n_timepoints]
    per tree    u32 n_nodes, int32 split_feature[n], float64 split_value[n],
                int32 left[n], int32 right[n], float64 payload[n * width],
                float64 impurity_importance[p] when stored
    checksum    8 byte BLAKE2b digest of every preceding byte

Worker count and memory mode are not stored: they never change the forest.
"""

import hashlib
import json
import logging

import numpy as np

from .data_model import MemoryMode
from .exceptions import DataError, ForestFileError
from .forest import ForestModel, GrowConfig
from .tree import TreeModel, TreeType

logger = logging.getLogger(__name__)

MAGIC = b'GROVEF1\0'
VERSION = 1
CHECKSUM_SIZE = 8

_U32 = np.dtype('<u4')
_I32 = np.dtype('<i4')
_F64 = np.dtype('<f8')

HEADER_KEYS = frozenset({
    'tree_type', 'num_trees', 'mtry', 'min_node_size', 'importance_mode', 'split_cutoff', 'seed',
    'feature_names', 'classes', 'response_names', 'payload_width', 'n_timepoints', 'has_importance',
})


def checksum(data):
    return hashlib.blake2b(data, digest_size=CHECKSUM_SIZE).digest()


def _header(forest, width, has_importance):
    config = forest.config
    return {
        'tree_type': int(config.tree_type),
        'num_trees': forest.num_trees,
        'mtry': int(config.mtry),
        'min_node_size': int(config.min_node_size),
        'importance_mode': int(config.importance_mode),
        'split_cutoff': int(config.split_cutoff),
        'seed': int(config.seed),
        'feature_names': list(forest.feature_names),
        'classes': list(forest.classes),
        'response_names': list(forest.response_names),
        'payload_width': int(width),
        'n_timepoints': 0 if forest.timepoints is None else len(forest.timepoints),
        'has_importance': has_importance,
    }


def serialize_forest(forest):
    """
    Encode a forest as bytes.

    Bag records are not stored, so a loaded forest predicts but has no
    out-of-bag data.
    """
    width = forest.trees[0].payload.shape[1]
    has_importance = all(tree.impurity_importance is not None for tree in forest.trees)
    header = json.dumps(_header(forest, width, has_importance), sort_keys=True, separators=(',', ':')).encode('utf-8')

    parts = [MAGIC, bytes([VERSION]), np.array([len(header)], dtype=_U32).tobytes(), header]
    if forest.timepoints is not None:
        parts.append(np.asarray(forest.timepoints, dtype=_F64).tobytes())
    for tree in forest.trees:
        parts.append(np.array([tree.n_nodes], dtype=_U32).tobytes())
        parts.append(tree.split_feature.astype(_I32).tobytes())
        parts.append(tree.split_value.astype(_F64).tobytes())
        parts.append(tree.left_child.astype(_I32).tobytes())
        parts.append(tree.right_child.astype(_I32).tobytes())
        parts.append(np.ascontiguousarray(tree.payload, dtype=_F64).tobytes())
        if has_importance:
            parts.append(tree.impurity_importance.astype(_F64).tobytes())
    body = b''.join(parts)
    return body + checksum(body)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.offset = 0

    def take(self, n_bytes):
        if self.offset + n_bytes > len(self.data):
            raise ForestFileError('Forest file is truncated')
        chunk = self.data[self.offset:self.offset + n_bytes]
        self.offset += n_bytes
        return chunk

    def array(self, dtype, count):
        return np.frombuffer(self.take(dtype.itemsize * count), dtype=dtype, count=count)


def deserialize_forest(data):
    """
    Decode bytes written by ``serialize_forest``.

    Raises:
        ForestFileError: Bad magic, unknown version, checksum mismatch,
            truncation or structurally invalid trees
    """
    data = bytes(data)
    if len(data) < len(MAGIC) or data[:len(MAGIC)] != MAGIC:
        raise ForestFileError('Not a forest file (bad magic)')
    if len(data) < len(MAGIC) + 1 + CHECKSUM_SIZE:
        raise ForestFileError('Forest file is truncated')
    version = data[len(MAGIC)]
    if version != VERSION:
        raise ForestFileError(f'Unknown forest file version {version}')
    body, stored = data[:-CHECKSUM_SIZE], data[-CHECKSUM_SIZE:]
    if checksum(body) != stored:
        raise ForestFileError('Forest file checksum mismatch')

    reader = _Reader(body)
    reader.take(len(MAGIC) + 1)
    header_len = int(reader.array(_U32, 1)[0])
    try:
        header = json.loads(reader.take(header_len).decode('utf-8'))
    except ValueError as e:
        raise ForestFileError(f'Malformed forest file header: {e}') from e
    if not isinstance(header, dict):
        raise ForestFileError('Malformed forest file header: not a JSON object')
    missing = sorted(HEADER_KEYS - header.keys())
    if missing:
        raise ForestFileError(f'Malformed forest file header: missing {", ".join(missing)}')
    try:
        tree_type = TreeType(header['tree_type'])
    except ValueError as e:
        raise ForestFileError(f'Malformed forest file header: {e}') from e

    n_timepoints = header['n_timepoints']
    timepoints = reader.array(_F64, n_timepoints).copy() if tree_type is TreeType.SURVIVAL else None
    width = header['payload_width']
    n_features = len(header['feature_names'])

    trees = []
    for _ in range(header['num_trees']):
        n_nodes = int(reader.array(_U32, 1)[0])
        tree = TreeModel(
            split_feature=reader.array(_I32, n_nodes).astype(np.int32),
            split_value=reader.array(_F64, n_nodes).astype(np.float64),
            left_child=reader.array(_I32, n_nodes).astype(np.int32),
            right_child=reader.array(_I32, n_nodes).astype(np.int32),
            payload=reader.array(_F64, n_nodes * width).astype(np.float64).reshape(n_nodes, width),
            impurity_importance=(
                reader.array(_F64, n_features).astype(np.float64) if header['has_importance'] else None
            ),
        )
        try:
            tree.validate()
        except DataError as e:
            raise ForestFileError(f'Invalid tree in forest file: {e}') from e
        if (tree.split_feature >= n_features).any():
            raise ForestFileError('Tree splits on a feature outside the forest')
        trees.append(tree)
    if reader.offset != len(body):
        raise ForestFileError('Trailing bytes after the last tree')

    config = GrowConfig(
        tree_type=tree_type,
        num_trees=header['num_trees'],
        mtry=header['mtry'],
        min_node_size=header['min_node_size'],
        memory_mode=MemoryMode.RUNTIME,
        importance_mode=header['importance_mode'],
        seed=header['seed'],
        split_cutoff=header['split_cutoff'],
    )
    return ForestModel(
        config=config,
        feature_names=list(header['feature_names']),
        trees=trees,
        classes=tuple(header['classes']),
        timepoints=timepoints,
        response_names=tuple(header['response_names']),
    )


def write_forest(path, forest):
    data = serialize_forest(forest)
    with open(path, 'wb') as handle:
        handle.write(data)
    logger.info('Saved forest (%d trees, %d bytes) to %s', forest.num_trees, len(data), path)


def read_forest(path):
    """
    Load a forest file.

    Raises:
        ForestFileError: Unreadable or invalid file
    """
    try:
        with open(path, 'rb') as handle:
            data = handle.read()
    except OSError as e:
        raise ForestFileError(f'Cannot read forest file {path}: {e}') from e
    forest = deserialize_forest(data)
    logger.info('Loaded %s forest with %d trees from %s', forest.tree_type.label.lower(), forest.num_trees, path)
    return forest

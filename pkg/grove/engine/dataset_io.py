"""
ASCII dataset files in, result files out.

Input files have one header line of column names followed by one line per
sample. Fields are separated by commas when the header contains a comma and
by whitespace otherwise.
"""

import io
import logging
import os

import numpy as np
import pandas as pd

from .data_model import Dataset, MemoryMode, Response, ResponseKind, build_dataset, build_features
from .exceptions import DataError
from .tree import TreeType

logger = logging.getLogger(__name__)


def detect_delimiter(header_line):
    return ',' if ',' in header_line else r'\s+'


def split_fields(line, sep):
    if sep == ',':
        return [field.strip() for field in line.rstrip('\r\n').split(',')]
    return line.split()


def parse_dataset_file(path):
    """
    Read a dataset file into a table of raw string cells.

    Every non-blank line after the header must have exactly as many fields
    as the header; errors name the 1-based physical line.

    Args:
        path (str): Path to the ASCII file

    Returns:
        pd.DataFrame: One column per header field, cells as str

    Raises:
        DataError: Missing or empty file, header without rows, ragged rows
    """
    if not os.path.exists(path):
        raise DataError(f'File not found: {path}')
    with open(path, 'r') as handle:
        lines = handle.readlines()
    if not lines or not lines[0].strip():
        raise DataError(f'Empty file: {path}')

    header = lines[0]
    sep = detect_delimiter(header)
    n_fields = len(split_fields(header, sep))
    rows = []
    for line_number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = split_fields(line, sep)
        if len(fields) != n_fields:
            raise DataError(
                f'{path}: line {line_number} has {len(fields)} fields (header has {n_fields})',
                line=line_number,
            )
        if '' in fields:
            raise DataError(f'{path}: line {line_number} has an empty field', line=line_number)
        rows.append(line)
    if not rows:
        raise DataError(f'{path}: no data rows')

    try:
        table = pd.read_csv(
            io.StringIO(header + ''.join(row if row.endswith('\n') else row + '\n' for row in rows)),
            sep=sep,
            dtype=str,
            index_col=False,
            na_filter=False,
            skipinitialspace=True,
            engine='python' if sep != ',' else 'c',
        )
    except pd.errors.ParserError as e:
        raise DataError(f'Malformed row in {path}: {e}') from e

    table.columns = [str(c).strip() for c in table.columns]
    logger.info('Read %s: %d rows, %d columns', path, table.shape[0], table.shape[1])
    return table


def _columns(table):
    return {name: table[name].to_numpy() for name in table.columns}


def _apply_memory_mode(dataset, memory_mode):
    if MemoryMode(memory_mode) is MemoryMode.GWAS:
        return dataset.with_packed_genotypes()
    return dataset


def load_training_dataset(path, response_spec, memory_mode=MemoryMode.RUNTIME):
    """
    Parse a training file into a Dataset.

    In GWAS memory mode every feature column whose values are all 0, 1 or 2
    is stored packed; other columns stay dense.
    """
    table = parse_dataset_file(path)
    dataset = build_dataset(_columns(table), response_spec)
    return _apply_memory_mode(dataset, memory_mode)


def load_prediction_dataset(path, feature_names, memory_mode=MemoryMode.RUNTIME, classes=(), depvarname=None):
    """
    Parse a file holding new samples for a stored forest.

    Only the forest's features are converted; extra columns are ignored. When
    ``depvarname`` names a present column and ``classes`` is given, the
    column becomes a classification response so a confusion matrix can be
    written.

    Raises:
        DataError: Listing every forest feature absent from the file
    """
    table = parse_dataset_file(path)
    missing = [name for name in feature_names if name not in table.columns]
    if missing:
        raise DataError(f'Missing features: {", ".join(missing)}')

    features = build_features({name: table[name].to_numpy() for name in feature_names})
    response = None
    if depvarname and classes and depvarname in table.columns:
        labels = table[depvarname].astype(str).to_numpy()
        unknown = sorted(set(labels.tolist()).difference(classes))
        if unknown:
            logger.warning('Ignoring %s: unknown classes %s', depvarname, ', '.join(unknown))
        else:
            codes = np.searchsorted(np.asarray(classes), labels)
            response = Response(ResponseKind.CLASSIFICATION, depvarname, labels=codes, classes=tuple(classes))
    return _apply_memory_mode(Dataset(features, response), memory_mode)


def write_predictions(path, forest, predictions):
    """
    Write one prediction per row.

    Classification writes class names; regression one value; probability one
    column per class under a header of class names; survival one column per
    timepoint under a header of timepoints.
    """
    tree_type = forest.tree_type
    if tree_type is TreeType.CLASSIFICATION:
        frame = pd.DataFrame({'prediction': np.asarray(forest.classes)[predictions]})
        header = False
    elif tree_type is TreeType.REGRESSION:
        frame = pd.DataFrame({'prediction': predictions})
        header = False
    elif tree_type is TreeType.PROBABILITY:
        frame = pd.DataFrame(predictions, columns=list(forest.classes))
        header = True
    else:
        frame = pd.DataFrame(predictions, columns=[repr(float(t)) for t in forest.timepoints])
        header = True
    frame.to_csv(path, sep='\t', header=header, index=False, lineterminator='\n')
    logger.info('Wrote %d predictions to %s', len(frame), path)


def write_confusion(path, matrix, classes):
    """Rows are true classes, columns predicted classes"""
    frame = pd.DataFrame(matrix, index=list(classes), columns=list(classes))
    frame.to_csv(path, sep='\t', index_label='true/predicted', lineterminator='\n')


def write_importance(path, report):
    """One ``name<TAB>value`` line per feature in dataset column order"""
    series = pd.Series(report.values, index=report.feature_names)
    series.to_csv(path, sep='\t', header=False, lineterminator='\n')


def write_table(path, frame):
    frame.to_csv(path, sep='\t', index=False, lineterminator='\n')

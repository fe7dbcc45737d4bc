"""
Shared test data: iris with the column names of the R dataset, small toy
datasets, and file helpers.
"""

import os

import numpy as np
import pandas as pd
from sklearn.datasets import load_iris

from grove.engine.data_model import (
    Dataset,
    FeatureColumn,
    Response,
    ResponseKind,
    ResponseSpec,
    build_dataset,
)

IRIS_FEATURES = ['Sepal.Length', 'Sepal.Width', 'Petal.Length', 'Petal.Width']


def iris_frame():
    """Iris as a DataFrame with a string Species column"""
    iris = load_iris()
    frame = pd.DataFrame(iris.data, columns=IRIS_FEATURES)
    frame['Species'] = np.asarray(iris.target_names)[iris.target]
    return frame


def iris_dataset():
    frame = iris_frame()
    columns = {name: frame[name].to_numpy() for name in frame.columns}
    return build_dataset(columns, ResponseSpec(ResponseKind.CLASSIFICATION, 'Species'))


def write_frame(frame, directory, name, sep=','):
    path = os.path.join(directory, name)
    frame.to_csv(path, sep=sep, index=False)
    return path


def classification_dataset(features, labels):
    """Dataset from a dict of feature arrays and a label sequence"""
    columns = [FeatureColumn.from_values(name, values) for name, values in features.items()]
    return Dataset(columns, Response.classification('y', labels))


def regression_dataset(features, values):
    columns = [FeatureColumn.from_values(name, v) for name, v in features.items()]
    return Dataset(columns, Response.regression('y', values))


def survival_dataset(features, time, status):
    columns = [FeatureColumn.from_values(name, v) for name, v in features.items()]
    return Dataset(columns, Response.survival('time', time, 'status', status))

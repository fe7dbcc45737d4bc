"""
Naive reference random forest.

A deliberately plain implementation used as an independent oracle for the
engine's out-of-bag error: recursive growth, exhaustive threshold loops over
every distinct value, no presorting, no packing, numpy ``RandomState``.
Only classification and regression are supported.
"""

import logging

import numpy as np

from .exceptions import ConfigError, NoOobDataError

logger = logging.getLogger(__name__)


def _gini(labels, n_classes):
    counts = np.bincount(labels, minlength=n_classes)
    proportions = counts / len(labels)
    return 1.0 - np.sum(proportions ** 2)


def _node_loss(y, classification, n_classes):
    if classification:
        return _gini(y, n_classes)
    return float(np.var(y))


class NaiveTree:
    def __init__(self, classification, n_classes, mtry, min_node_size, random_state):
        self.classification = classification
        self.n_classes = n_classes
        self.mtry = mtry
        self.min_node_size = min_node_size
        self.random_state = random_state
        self.root = None

    def fit(self, x, y):
        self.root = self._grow(x, y)
        return self

    def _leaf(self, y):
        if self.classification:
            return {'value': int(np.argmax(np.bincount(y, minlength=self.n_classes)))}
        return {'value': float(np.mean(y))}

    def _grow(self, x, y):
        if len(y) <= self.min_node_size or np.all(y == y[0]):
            return self._leaf(y)
        parent = _node_loss(y, self.classification, self.n_classes)
        best = None
        features = self.random_state.choice(x.shape[1], self.mtry, replace=False)
        for j in features:
            levels = np.unique(x[:, j])
            for lower, upper in zip(levels[:-1], levels[1:]):
                threshold = (lower + upper) / 2.0
                left = x[:, j] <= threshold
                n_left = left.sum()
                decrease = parent - (
                    n_left * _node_loss(y[left], self.classification, self.n_classes)
                    + (len(y) - n_left) * _node_loss(y[~left], self.classification, self.n_classes)
                ) / len(y)
                if decrease > 1e-12 and (best is None or decrease > best[0]):
                    best = (decrease, j, threshold)
        if best is None:
            return self._leaf(y)
        _, j, threshold = best
        left = x[:, j] <= threshold
        return {
            'feature': j,
            'threshold': threshold,
            'left': self._grow(x[left], y[left]),
            'right': self._grow(x[~left], y[~left]),
        }

    def predict_one(self, row):
        node = self.root
        while 'value' not in node:
            node = node['left'] if row[node['feature']] <= node['threshold'] else node['right']
        return node['value']


def naive_oob_error(x, y, classification, num_trees=500, mtry=None, min_node_size=None, seed=0):
    """
    Grow a naive forest and return its out-of-bag error.

    Args:
        x (np.ndarray): n x p feature matrix
        y (np.ndarray): Class indices (classification) or real responses
        classification (bool): Misclassification error, else MSE
        num_trees (int): Number of trees
        mtry (int): Candidates per node, default floor(sqrt(p))
        min_node_size (int): Default 1 (classification) or 5 (regression)
        seed (int): RandomState seed

    Returns:
        float: OOB misclassification frequency or mean squared error
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    n, p = x.shape
    mtry = max(1, int(np.sqrt(p))) if mtry is None else mtry
    if not 1 <= mtry <= p:
        raise ConfigError(f'mtry {mtry} outside 1..{p}')
    if min_node_size is None:
        min_node_size = 1 if classification else 5
    n_classes = int(y.max()) + 1 if classification else 0

    random_state = np.random.RandomState(seed)
    votes = np.zeros((n, n_classes)) if classification else np.zeros(n)
    counts = np.zeros(n, dtype=int)
    for _ in range(num_trees):
        drawn = random_state.randint(0, n, size=n)
        inbag = np.zeros(n, dtype=bool)
        inbag[drawn] = True
        tree = NaiveTree(classification, n_classes, mtry, min_node_size, random_state).fit(x[drawn], y[drawn])
        for i in np.flatnonzero(~inbag):
            value = tree.predict_one(x[i])
            if classification:
                votes[i, value] += 1
            else:
                votes[i] += value
            counts[i] += 1

    used = counts > 0
    if not used.any():
        raise NoOobDataError('No sample is out of bag in any reference tree')
    if classification:
        return float(np.mean(np.argmax(votes[used], axis=1) != y[used]))
    return float(np.mean((votes[used] / counts[used] - y[used]) ** 2))

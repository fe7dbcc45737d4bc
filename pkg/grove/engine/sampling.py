"""
All randomness used by forest growth and evaluation.

Streams are numpy ``Generator`` objects on ``PCG64``. A stream for a tree (or
a tree/feature pair) is seeded with ``mix_seed(master_seed, *keys)``, a
chained splitmix64 finaliser, so results never depend on how trees are
scheduled across workers.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError

_MASK64 = (1 << 64) - 1


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def mix_seed(seed, *keys):
    """
    Derive a 64-bit seed from a master seed and integer keys.

    mix(s, k1, k2, ...) = sm(... sm(sm(s) ^ k1) ^ k2 ...), sm = splitmix64.
    """
    state = _splitmix64(int(seed) & _MASK64)
    for key in keys:
        state = _splitmix64(state ^ (int(key) & _MASK64))
    return state


def make_rng(seed, *keys):
    """Independent, reproducible stream for (seed, keys)"""
    return np.random.Generator(np.random.PCG64(mix_seed(seed, *keys)))


def random_seed():
    """Fresh 64-bit master seed from OS entropy"""
    return int(np.random.SeedSequence().entropy) & _MASK64


@dataclass(frozen=True)
class BagRecord:
    """In-bag multiplicities of one tree's bootstrap sample"""

    inbag_counts: np.ndarray
    oob_indices: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, 'oob_indices', np.flatnonzero(self.inbag_counts == 0))

    @property
    def n(self):
        return len(self.inbag_counts)

    @property
    def inbag_size(self):
        return int(self.inbag_counts.sum())

    def inbag_samples(self):
        """Ascending row indices, each repeated by its multiplicity"""
        return np.repeat(np.arange(self.n), self.inbag_counts)


def bootstrap(n, rng):
    """
    Draw n samples uniformly with replacement.

    Returns:
        BagRecord: Counts sum to n; OOB indices are the zero-count rows
    """
    if n < 1:
        raise ConfigError('Bootstrap needs at least one sample')
    draws = rng.integers(0, n, size=n)
    return BagRecord(np.bincount(draws, minlength=n).astype(np.int32))


def sample_without_replacement(n, k, rng):
    """
    Knuth's selection sampling (Algorithm S).

    Scans t = 0..n-1 and selects t with probability
    (k - selected) / (n - t); every k-subset is equally likely.

    Returns:
        np.ndarray: k distinct indices in ascending order
    """
    if k < 0 or k > n:
        raise ConfigError(f'Cannot draw {k} of {n} without replacement')
    selected = np.empty(k, dtype=np.intp)
    if k == 0:
        return selected
    uniforms = rng.random(n)
    chosen = 0
    for t in range(n):
        if (n - t) * uniforms[t] < k - chosen:
            selected[chosen] = t
            chosen += 1
            if chosen == k:
                break
    return selected


def permute(values, rng):
    """Uniform (Fisher-Yates) permutation of a copy of ``values``"""
    return rng.permutation(np.asarray(values))

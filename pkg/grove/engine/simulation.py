"""
Simulated SNP datasets for validation, importance studies and benchmarks.

Each SNP column holds minor allele counts drawn from Binomial(2, maf) with a
per-SNP maf. The first ``n_effect`` SNPs enter a linear predictor
``effect_size * sum(g_j - 2 * maf_j)``; the dichotomous endpoint passes it
through the logistic function, the continuous endpoint adds standard normal
noise.
"""

import enum
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import expit

from .data_model import Dataset, FeatureColumn, Response, pack_genotypes
from .exceptions import ConfigError
from .sampling import make_rng

logger = logging.getLogger(__name__)

DEFAULT_EFFECT_SIZE = 0.5
DEFAULT_MAF_RANGE = (0.05, 0.5)


class Endpoint(enum.Enum):
    DICHOTOMOUS = 'dichotomous'
    CONTINUOUS = 'continuous'


@dataclass(frozen=True)
class SimSpec:
    n: int
    p: int
    n_effect: int = 5
    effect_size: float = DEFAULT_EFFECT_SIZE
    maf_range: Tuple[float, float] = DEFAULT_MAF_RANGE
    endpoint: Endpoint = Endpoint.DICHOTOMOUS
    seed: Optional[int] = None

    def validate(self):
        if self.n < 2 or self.p < 1:
            raise ConfigError(f'Simulation needs n >= 2 and p >= 1 (got n={self.n}, p={self.p})')
        if not 0 <= self.n_effect <= self.p:
            raise ConfigError(f'Effect feature count {self.n_effect} outside 0..{self.p}')
        low, high = self.maf_range
        if not 0 < low <= high <= 0.5:
            raise ConfigError(f'MAF range {self.maf_range} must lie within (0, 0.5]')
        return self


def snp_names(p):
    return [f'snp{j + 1}' for j in range(p)]


@dataclass(frozen=True)
class SnpSample:
    """Simulated genotypes as loaded input: uint8 minor allele counts, samples x SNPs"""

    genotypes: np.ndarray
    response: Response


def simulate_snp_genotypes(spec, rng=None):
    """
    Simulate the raw genotype matrix and response of a SNP design.

    The matrix is one byte per cell, column-major, the compact form a
    genotype file is read into before the engine stores it.

    Args:
        spec (SimSpec): Design
        rng: numpy Generator, defaults to the stream of ``spec.seed``

    Returns:
        SnpSample: Genotypes and a classification response "y" with classes
            "0"/"1" or a regression response "y"
    """
    spec.validate()
    if rng is None:
        rng = make_rng(0 if spec.seed is None else spec.seed)
    low, high = spec.maf_range
    mafs = rng.uniform(low, high, size=spec.p)

    linear = np.zeros(spec.n)
    genotypes = np.empty((spec.n, spec.p), dtype=np.uint8, order='F')
    for j in range(spec.p):
        genotypes[:, j] = rng.binomial(2, mafs[j], size=spec.n)
        if j < spec.n_effect:
            linear += spec.effect_size * (genotypes[:, j] - 2.0 * mafs[j])

    if spec.endpoint is Endpoint.DICHOTOMOUS:
        outcome = (rng.random(spec.n) < expit(linear)).astype(int)
        response = Response.classification('y', outcome.astype(str))
    else:
        response = Response.regression('y', linear + rng.standard_normal(spec.n))
    logger.debug('Simulated %s SNP genotypes n=%d p=%d', spec.endpoint.value, spec.n, spec.p)
    return SnpSample(genotypes, response)


def snp_dataset(sample, packed=False):
    """
    Engine dataset of simulated genotypes, features snp1..snpP.

    With ``packed`` every column is stored 2-bit packed (memory mode gwas),
    otherwise as float64.
    """
    names = snp_names(sample.genotypes.shape[1])
    if packed:
        columns = [pack_genotypes(sample.genotypes[:, j], name) for j, name in enumerate(names)]
    else:
        columns = [FeatureColumn.from_values(name, sample.genotypes[:, j]) for j, name in enumerate(names)]
    return Dataset(columns, sample.response)


def simulate_snp_dataset(spec, rng=None, packed=False):
    """
    Simulate a SNP dataset.

    Args:
        spec (SimSpec): Design
        rng: numpy Generator, defaults to the stream of ``spec.seed``
        packed (bool): Store genotype columns 2-bit packed

    Returns:
        Dataset: Features snp1..snpP with the response of ``simulate_snp_genotypes``
    """
    return snp_dataset(simulate_snp_genotypes(spec, rng), packed=packed)


def simulate_survival_dataset(n, p, n_effect=2, effect_size=1.0, censoring_rate=0.3, rng=None):
    """
    Proportional-hazards toy: standard normal features, exponential event
    times with hazard exp(effect_size * sum of the first ``n_effect``
    features), independent exponential censoring.

    Returns:
        Dataset: Features x1..xP, survival response ("time", "status")
    """
    if rng is None:
        rng = make_rng(0)
    x = rng.standard_normal((n, p))
    hazard = np.exp(effect_size * x[:, :n_effect].sum(axis=1))
    event_time = rng.exponential(1.0 / hazard)
    censor_time = rng.exponential(1.0 / censoring_rate, size=n)
    time = np.minimum(event_time, censor_time)
    status = (event_time <= censor_time).astype(int)
    columns = [FeatureColumn.from_values(f'x{j + 1}', x[:, j]) for j in range(p)]
    return Dataset(columns, Response.survival('time', time, 'status', status))

"""
Benchmark and validation harness.

Runtime scaling sweeps, peak-memory measurement in a fresh child process,
agreement of out-of-bag errors against a reference forest, and repeated
importance studies on simulated SNP data.
"""

import dataclasses
import logging
import multiprocessing
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd

from .data_model import MemoryMode
from .evaluation import gini_importance, oob_error, permutation_importance
from .exceptions import ConfigError, GroveError
from .forest import GrowConfig, ImportanceMode, grow_forest
from .reference import naive_oob_error
from .sampling import mix_seed
from .simulation import Endpoint, SimSpec, simulate_snp_dataset, simulate_snp_genotypes, snp_dataset, snp_names
from .tree import TreeType

logger = logging.getLogger(__name__)

AXES = ('num_trees', 'p', 'n', 'mtry_percent')
REFERENCES = ('naive', 'self')

# node size for regression benchmark forests
REGRESSION_BENCH_NODE_SIZE = 25

# Bland-Altman limits of agreement
AGREEMENT_Z = 1.96


try:
    import resource
except ImportError:  # pragma: no cover - not available on Windows
    resource = None


def _max_rss_bytes():
    if resource is None:
        return None
    peak = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    # kilobytes on Linux, bytes on macOS
    return peak if sys.platform == 'darwin' else peak * 1024


@dataclass(frozen=True)
class BenchBase:
    """Fixed parameters of a scaling sweep; one of them is overridden per point"""

    num_trees: int = 500
    n: int = 1000
    p: int = 1000
    mtry_percent: Optional[float] = None
    tree_type: TreeType = TreeType.CLASSIFICATION
    memory_mode: MemoryMode = MemoryMode.RUNTIME
    worker_count: int = 1
    seed: int = 0

    def with_axis(self, axis, value):
        if axis not in AXES:
            raise ConfigError(f'Unknown benchmark axis "{axis}" (choose from {", ".join(AXES)})')
        if axis == 'mtry_percent':
            return dataclasses.replace(self, mtry_percent=float(value))
        return dataclasses.replace(self, **{axis: int(value)})

    def sim_spec(self, seed):
        endpoint = Endpoint.DICHOTOMOUS if self.tree_type is not TreeType.REGRESSION else Endpoint.CONTINUOUS
        return SimSpec(n=self.n, p=self.p, n_effect=min(5, self.p), endpoint=endpoint, seed=seed)

    def grow_config(self, seed):
        mtry = None
        if self.mtry_percent is not None:
            mtry = min(self.p, max(1, int(round(self.p * self.mtry_percent / 100.0))))
        return GrowConfig(
            tree_type=self.tree_type,
            num_trees=self.num_trees,
            mtry=mtry,
            min_node_size=REGRESSION_BENCH_NODE_SIZE if self.tree_type is TreeType.REGRESSION else 1,
            memory_mode=self.memory_mode,
            seed=seed,
            worker_count=self.worker_count,
        )


@dataclass
class BenchPoint:
    value: float
    times: List[float] = field(default_factory=list)
    peak_bytes: Optional[int] = None
    error: Optional[str] = None

    @property
    def seconds(self):
        return float(np.mean(self.times)) if self.times else float('nan')


@dataclass
class BenchReport:
    axis: str
    points: List[BenchPoint]
    repeats: int

    def to_frame(self):
        return pd.DataFrame({
            self.axis: [p.value for p in self.points],
            'seconds': [p.seconds for p in self.points],
            'peak_bytes': [p.peak_bytes for p in self.points],
            'error': [p.error or '' for p in self.points],
        })

    def plot_frame(self):
        """Long format, one row per (grid point, repeat)"""
        rows = [
            {'axis': self.axis, 'value': p.value, 'repeat': r, 'seconds': seconds}
            for p in self.points
            for r, seconds in enumerate(p.times)
        ]
        return pd.DataFrame(rows, columns=['axis', 'value', 'repeat', 'seconds'])


def _grow_and_measure(sim_spec, config):
    sample = simulate_snp_genotypes(sim_spec)
    # input loaded; what follows is the engine's own storage and growth
    baseline = _max_rss_bytes()
    dataset = snp_dataset(sample, packed=config.memory_mode is MemoryMode.GWAS)
    grow_forest(dataset, config)
    return _max_rss_bytes() - baseline


def measure_peak_memory(sim_spec, config):
    """
    Peak resident memory of growing one forest on simulated data, in bytes.

    The run happens in a freshly spawned process. The baseline is read once
    the simulated input genotypes are loaded (one byte per cell) and before
    the engine stores them in the memory mode's format, so the figure covers
    that storage plus growth but not the input itself.

    Returns:
        int or None: Baseline-subtracted peak, None where the platform has
            no peak-RSS accounting
    """
    if resource is None:
        logger.warning('Peak memory unavailable on %s', sys.platform)
        return None
    context = multiprocessing.get_context('spawn')
    with ProcessPoolExecutor(max_workers=1, mp_context=context) as executor:
        peak = executor.submit(_grow_and_measure, sim_spec, config).result()
    logger.debug('Peak memory %d bytes (mode %s)', peak, MemoryMode(config.memory_mode).name)
    return peak


def run_scaling_benchmark(axis, grid, base=None, repeats=1, measure_memory=False):
    """
    Time forest growth over a grid of one parameter.

    Only growth is timed; each repeat simulates fresh data with its own seed.
    Failures at a grid point are recorded on that point and the sweep goes on.

    Args:
        axis (str): One of num_trees, p, n, mtry_percent
        grid: Values for the axis
        base (BenchBase): Fixed parameters
        repeats (int): Runs per grid point
        measure_memory (bool): Also measure peak memory once per point

    Returns:
        BenchReport: Points in ascending grid order
    """
    base = base or BenchBase()
    grid = sorted(grid)
    if not grid:
        raise ConfigError('Benchmark grid is empty')
    if repeats < 1:
        raise ConfigError('Benchmark needs at least one repeat')

    points = []
    for i, value in enumerate(grid):
        setting = base.with_axis(axis, value)
        point = BenchPoint(value=value)
        try:
            for r in range(repeats):
                seed = mix_seed(base.seed, i, r)
                dataset = simulate_snp_dataset(
                    setting.sim_spec(seed), packed=setting.memory_mode is MemoryMode.GWAS,
                )
                started = time.perf_counter()
                grow_forest(dataset, setting.grow_config(seed))
                point.times.append(time.perf_counter() - started)
            if measure_memory:
                seed = mix_seed(base.seed, i)
                point.peak_bytes = measure_peak_memory(setting.sim_spec(seed), setting.grow_config(seed))
        except (MemoryError, GroveError) as e:
            point.error = f'{type(e).__name__}: {e}'
            logger.warning('Benchmark point %s=%s failed: %s', axis, value, point.error)
        logger.info('%s=%s: %.3f s', axis, value, point.seconds)
        points.append(point)
    return BenchReport(axis=axis, points=points, repeats=repeats)


@dataclass
class ValidationReport:
    """Per-dataset OOB errors of the engine and the reference, with agreement limits"""

    frame: pd.DataFrame

    @property
    def differences(self):
        return self.frame['difference'].to_numpy()

    @property
    def mean_difference(self):
        return float(np.mean(self.differences))

    @property
    def sd_difference(self):
        return float(np.std(self.differences, ddof=1)) if len(self.frame) > 1 else 0.0

    @property
    def limits(self):
        spread = AGREEMENT_Z * self.sd_difference
        return self.mean_difference - spread, self.mean_difference + spread

    def summary(self):
        lower, upper = self.limits
        return {
            'datasets': len(self.frame),
            'mean_difference': self.mean_difference,
            'lower_limit': lower,
            'upper_limit': upper,
        }


def _engine_error(dataset, config):
    forest = grow_forest(dataset, config)
    return oob_error(forest, dataset).error


def run_validation_protocol(n_datasets, spec, config, reference='naive'):
    """
    Compare the engine's OOB error with a reference on simulated datasets.

    Args:
        n_datasets (int): Number of simulated datasets
        spec (SimSpec): Design; the endpoint picks classification or regression
        config (GrowConfig): Engine settings; tree type follows the endpoint
        reference (str): ``naive`` for the reference forest, ``self`` for
            the engine with an independent seed

    Returns:
        ValidationReport: One row per dataset
    """
    if reference not in REFERENCES:
        raise ConfigError(f'Unknown reference "{reference}" (choose from {", ".join(REFERENCES)})')
    classification = spec.endpoint is Endpoint.DICHOTOMOUS
    tree_type = TreeType.CLASSIFICATION if classification else TreeType.REGRESSION
    master = 0 if config.seed is None else config.seed
    sim_master = 0 if spec.seed is None else spec.seed

    rows = []
    for d in range(n_datasets):
        dataset = simulate_snp_dataset(dataclasses.replace(spec, seed=mix_seed(sim_master, d)))
        engine_config = dataclasses.replace(config, tree_type=tree_type, seed=mix_seed(master, d, 0))
        engine = _engine_error(dataset, engine_config)
        if reference == 'self':
            other = _engine_error(dataset, dataclasses.replace(engine_config, seed=mix_seed(master, d, 1)))
        else:
            resolved = engine_config.resolve(dataset.n_features)
            y = dataset.response.labels if classification else dataset.response.values
            other = naive_oob_error(
                dataset.to_matrix(), y, classification,
                num_trees=resolved.num_trees, mtry=resolved.mtry,
                min_node_size=resolved.min_node_size, seed=mix_seed(master, d, 2) % (2 ** 32),
            )
        rows.append({
            'dataset': d,
            'engine_error': engine,
            'reference_error': other,
            'mean': (engine + other) / 2.0,
            'difference': engine - other,
        })
        logger.info('Dataset %d: engine %.4f, reference %.4f', d, engine, other)
    return ValidationReport(pd.DataFrame(rows))


@dataclass
class ImportanceStudy:
    """Per-repetition importances; one row per repetition, one column per feature"""

    gini: pd.DataFrame
    permutation: pd.DataFrame
    n_effect: int

    def medians(self):
        return pd.DataFrame({'gini': self.gini.median(), 'permutation': self.permutation.median()})

    def effect_features_dominate(self):
        """True when every effect feature's median beats every noise feature's, for both measures"""
        medians = self.medians()
        effect, noise = medians.iloc[:self.n_effect], medians.iloc[self.n_effect:]
        if noise.empty:
            return True
        return bool((effect.min() > noise.max()).all())


def run_importance_study(repetitions, spec, config):
    """
    Gini and permutation importance over repeated simulations.

    Each repetition simulates a dataset and grows one forest with impurity
    accumulation; permutation importance comes from the same forest.
    """
    classification = spec.endpoint is Endpoint.DICHOTOMOUS
    tree_type = TreeType.CLASSIFICATION if classification else TreeType.REGRESSION
    master = 0 if config.seed is None else config.seed
    sim_master = 0 if spec.seed is None else spec.seed

    gini_rows, permutation_rows = [], []
    for r in range(repetitions):
        dataset = simulate_snp_dataset(dataclasses.replace(spec, seed=mix_seed(sim_master, r)))
        forest = grow_forest(dataset, dataclasses.replace(
            config, tree_type=tree_type, importance_mode=ImportanceMode.GINI, seed=mix_seed(master, r),
        ))
        gini_rows.append(gini_importance(forest).values)
        permutation_rows.append(
            permutation_importance(forest, dataset, worker_count=config.worker_count).values
        )
        logger.debug('Importance repetition %d done', r)
    names = snp_names(spec.p)
    return ImportanceStudy(
        gini=pd.DataFrame(gini_rows, columns=names),
        permutation=pd.DataFrame(permutation_rows, columns=names),
        n_effect=spec.n_effect,
    )

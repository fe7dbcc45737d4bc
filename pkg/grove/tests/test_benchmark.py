"""
Tests for the scaling benchmark, peak-memory measurement and validation studies
"""

import numpy as np
from django.test import SimpleTestCase, tag

from grove.engine.benchmark import (
    BenchBase,
    measure_peak_memory,
    run_importance_study,
    run_scaling_benchmark,
    run_validation_protocol,
)
from grove.engine.data_model import MemoryMode
from grove.engine.exceptions import ConfigError
from grove.engine.forest import GrowConfig
from grove.engine.reference import naive_oob_error
from grove.engine.simulation import Endpoint, SimSpec
from grove.engine.tree import TreeType


class ScalingBenchmarkTest(SimpleTestCase):
    """Test runtime sweeps"""

    def setUp(self):
        self.base = BenchBase(num_trees=4, n=60, p=8, seed=1)

    def test_points_in_grid_order(self):
        report = run_scaling_benchmark('p', [12, 6], base=self.base, repeats=2)
        self.assertEqual([point.value for point in report.points], [6, 12])
        frame = report.to_frame()
        self.assertEqual(list(frame.columns), ['p', 'seconds', 'peak_bytes', 'error'])
        self.assertTrue((frame['seconds'] > 0).all())
        self.assertEqual(len(report.plot_frame()), 4)

    def test_failed_point_recorded(self):
        """Test that an invalid grid point is reported and the sweep goes on"""
        report = run_scaling_benchmark('n', [1, 40], base=self.base)
        self.assertIn('ConfigError', report.points[0].error)
        self.assertTrue(np.isnan(report.points[0].seconds))
        self.assertIsNone(report.points[1].error)

    def test_mtry_percent_axis(self):
        setting = self.base.with_axis('mtry_percent', 50)
        self.assertEqual(setting.grow_config(0).mtry, 4)
        self.assertEqual(self.base.with_axis('mtry_percent', 1).grow_config(0).mtry, 1)

    def test_regression_node_size(self):
        config = BenchBase(tree_type=TreeType.REGRESSION).grow_config(0)
        self.assertEqual(config.min_node_size, 25)

    def test_invalid_arguments(self):
        with self.assertRaises(ConfigError):
            run_scaling_benchmark('depth', [1], base=self.base)
        with self.assertRaises(ConfigError):
            run_scaling_benchmark('p', [], base=self.base)
        with self.assertRaises(ConfigError):
            run_scaling_benchmark('p', [4], base=self.base, repeats=0)

    @tag('slow')
    def test_runtime_roughly_linear_in_trees(self):
        """Test that doubling the number of trees at n = p = 1000 roughly doubles the time"""
        base = BenchBase(n=1000, p=1000, seed=2)
        report = run_scaling_benchmark('num_trees', [50, 100], base=base, repeats=5)
        ratio = np.median(report.points[1].times) / np.median(report.points[0].times)
        self.assertGreaterEqual(ratio, 1.6)
        self.assertLessEqual(ratio, 2.4)


@tag('slow')
class PeakMemoryTest(SimpleTestCase):
    """Test peak-memory measurement in a child process"""

    def test_small_dataset_small_peak(self):
        """Test that a 10-row design stays under 50 MiB"""
        peak = measure_peak_memory(SimSpec(n=10, p=5, n_effect=1, seed=1), GrowConfig(num_trees=10, seed=1))
        if peak is None:
            self.skipTest('No peak-RSS accounting on this platform')
        self.assertGreaterEqual(peak, 0)
        self.assertLess(peak, 50 * 2 ** 20)

    def test_memory_mode_ordering(self):
        """Test gwas < memory efficient <= runtime on n=2000, p=5000"""
        spec = SimSpec(n=2000, p=5000, seed=1)
        peaks = {
            mode: measure_peak_memory(spec, GrowConfig(num_trees=10, seed=1, memory_mode=mode))
            for mode in MemoryMode
        }
        if None in peaks.values():
            self.skipTest('No peak-RSS accounting on this platform')
        self.assertLess(peaks[MemoryMode.GWAS], peaks[MemoryMode.MEMORY_EFFICIENT])
        self.assertLessEqual(peaks[MemoryMode.MEMORY_EFFICIENT], peaks[MemoryMode.RUNTIME])


class ValidationProtocolTest(SimpleTestCase):
    """Test OOB agreement studies"""

    def setUp(self):
        self.spec = SimSpec(n=80, p=6, n_effect=2, effect_size=1.0, seed=3)
        self.config = GrowConfig(num_trees=15, seed=3)

    def test_self_agreement(self):
        report = run_validation_protocol(3, self.spec, self.config, reference='self')
        self.assertEqual(len(report.frame), 3)
        lower, upper = report.limits
        self.assertLessEqual(lower, report.mean_difference)
        self.assertGreaterEqual(upper, report.mean_difference)
        self.assertTrue(((report.frame['engine_error'] >= 0) & (report.frame['engine_error'] <= 1)).all())

    def test_naive_reference(self):
        report = run_validation_protocol(2, self.spec, self.config, reference='naive')
        self.assertTrue(((report.frame['reference_error'] >= 0) & (report.frame['reference_error'] <= 1)).all())
        self.assertEqual(report.summary()['datasets'], 2)

    def test_regression_endpoint(self):
        spec = SimSpec(n=80, p=6, n_effect=2, endpoint=Endpoint.CONTINUOUS, seed=3)
        report = run_validation_protocol(2, spec, self.config, reference='self')
        self.assertTrue((report.frame['engine_error'] > 0).all())

    def test_unknown_reference(self):
        with self.assertRaises(ConfigError):
            run_validation_protocol(1, self.spec, self.config, reference='other')

    def test_naive_forest_learns(self):
        """Test that the reference forest beats chance on a clear signal"""
        rng = np.random.default_rng(0)
        x = rng.uniform(size=(120, 3))
        y = (x[:, 0] > 0.5).astype(int)
        error = naive_oob_error(x, y, True, num_trees=25, mtry=2, min_node_size=1, seed=1)
        self.assertLess(error, 0.2)

    @tag('slow')
    def test_agreement_with_naive(self):
        """Test agreement with the reference forest on 20 logit datasets"""
        spec = SimSpec(n=500, p=50, n_effect=5, seed=7)
        report = run_validation_protocol(20, spec, GrowConfig(num_trees=500, seed=7), reference='naive')
        lower, upper = report.limits
        self.assertLessEqual(abs(report.mean_difference), 0.01)
        self.assertLess(upper - lower, 0.04)


class ImportanceStudyTest(SimpleTestCase):
    """Test repeated importance estimation"""

    def test_shape(self):
        spec = SimSpec(n=80, p=6, n_effect=2, seed=4)
        study = run_importance_study(2, spec, GrowConfig(num_trees=10, seed=4))
        self.assertEqual(study.gini.shape, (2, 6))
        self.assertEqual(study.permutation.shape, (2, 6))
        self.assertEqual(list(study.medians().columns), ['gini', 'permutation'])

    @tag('slow')
    def test_effect_features_dominate(self):
        """Test that effect SNPs outrank noise SNPs for both measures over 50 repetitions"""
        spec = SimSpec(n=2000, p=50, n_effect=5, effect_size=0.5, seed=5)
        study = run_importance_study(50, spec, GrowConfig(num_trees=100, seed=5))
        self.assertTrue(study.effect_features_dominate())

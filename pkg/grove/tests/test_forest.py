"""
Tests for forest growth, determinism and ensemble prediction
"""

import dataclasses

import numpy as np
from django.test import SimpleTestCase, tag

from grove.engine.data_model import MemoryMode
from grove.engine.exceptions import ConfigError, DataError
from grove.engine.forest import GrowConfig, ImportanceMode, grow_forest, predict_forest
from grove.engine.serialization import serialize_forest
from grove.engine.simulation import (
    Endpoint,
    SimSpec,
    simulate_snp_dataset,
    simulate_snp_genotypes,
    simulate_survival_dataset,
    snp_dataset,
)
from grove.engine.tree import TreeType, predict_tree
from grove.tests.fixtures import iris_dataset, regression_dataset


class GrowConfigTest(SimpleTestCase):
    """Test defaults and validation"""

    def test_defaults(self):
        """Test mtry = floor(sqrt(p)) and per-type node sizes"""
        config = GrowConfig().resolve(4)
        self.assertEqual(config.mtry, 2)
        self.assertEqual(config.num_trees, 500)
        self.assertEqual(config.min_node_size, 1)
        self.assertEqual(GrowConfig(tree_type=TreeType.REGRESSION).resolve(4).min_node_size, 5)
        self.assertEqual(GrowConfig(tree_type=TreeType.SURVIVAL).resolve(4).min_node_size, 3)
        self.assertEqual(GrowConfig(tree_type=TreeType.PROBABILITY).resolve(4).min_node_size, 10)

    def test_mtry_exceeds_features(self):
        with self.assertRaisesRegex(ConfigError, 'mtry exceeds feature count'):
            GrowConfig(mtry=10).resolve(4)

    def test_invalid_counts(self):
        for bad in ({'num_trees': 0}, {'mtry': 0}, {'min_node_size': 0}, {'worker_count': 0}, {'importance_mode': 7}):
            with self.assertRaises(ConfigError):
                GrowConfig(**bad).resolve(4)

    def test_seed_drawn_when_absent(self):
        """Test that a missing seed is drawn and recorded"""
        self.assertIsNotNone(GrowConfig().resolve(4).seed)


class GrowForestTest(SimpleTestCase):
    """Test forest growth"""

    def test_iris_defaults(self):
        """Test that iris gets 500 trees with mtry 2"""
        forest = grow_forest(iris_dataset(), GrowConfig(seed=1))
        self.assertEqual(forest.num_trees, 500)
        self.assertEqual(len(forest.bag_records), 500)
        self.assertEqual(forest.config.mtry, 2)
        for tree in forest.trees[:20]:
            tree.validate()

    def test_type_mismatch(self):
        """Test that a regression forest needs a numeric response"""
        with self.assertRaises(ConfigError):
            grow_forest(iris_dataset(), GrowConfig(tree_type=TreeType.REGRESSION, num_trees=2, seed=1))

    def test_no_response(self):
        dataset = iris_dataset()
        dataset.response = None
        with self.assertRaises(DataError):
            grow_forest(dataset, GrowConfig(num_trees=2, seed=1))

    def test_same_seed_same_forest(self):
        """Test that a forest is a pure function of data and config"""
        config = GrowConfig(num_trees=20, seed=7)
        a = serialize_forest(grow_forest(iris_dataset(), config))
        b = serialize_forest(grow_forest(iris_dataset(), config))
        self.assertEqual(a, b)
        c = serialize_forest(grow_forest(iris_dataset(), dataclasses.replace(config, seed=8)))
        self.assertNotEqual(a, c)

    def test_worker_count_irrelevant(self):
        """Test bit-identical forests with 1 and 4 workers"""
        config = GrowConfig(num_trees=16, seed=3)
        single = serialize_forest(grow_forest(iris_dataset(), config))
        parallel = serialize_forest(grow_forest(iris_dataset(), dataclasses.replace(config, worker_count=4)))
        self.assertEqual(single, parallel)

    @tag('slow')
    def test_worker_count_irrelevant_eight(self):
        """Test bit-identical forests with 1 and 8 workers at full size"""
        config = GrowConfig(num_trees=500, seed=3)
        single = serialize_forest(grow_forest(iris_dataset(), config))
        parallel = serialize_forest(grow_forest(iris_dataset(), dataclasses.replace(config, worker_count=8)))
        self.assertEqual(single, parallel)

    def test_memory_modes_identical(self):
        """Test that runtime and memory-efficient modes grow the same forest"""
        dataset = iris_dataset()
        config = GrowConfig(num_trees=10, seed=5, split_cutoff=20)
        runtime = serialize_forest(grow_forest(dataset, config))
        efficient = serialize_forest(grow_forest(
            iris_dataset(), dataclasses.replace(config, memory_mode=MemoryMode.MEMORY_EFFICIENT),
        ))
        self.assertEqual(runtime, efficient)

    def test_dense_and_packed_identical(self):
        """Test that packed genotypes grow the same forest as dense columns"""
        spec = SimSpec(n=200, p=20, seed=9)
        dense = simulate_snp_dataset(spec)
        packed = simulate_snp_dataset(spec, packed=True)
        config = GrowConfig(num_trees=10, seed=4)
        a = serialize_forest(grow_forest(dense, config))
        b = serialize_forest(grow_forest(packed, dataclasses.replace(config, memory_mode=MemoryMode.GWAS)))
        self.assertEqual(a, b)

    def test_impurity_importance_only_when_requested(self):
        forest = grow_forest(iris_dataset(), GrowConfig(num_trees=3, seed=1))
        self.assertIsNone(forest.trees[0].impurity_importance)
        forest = grow_forest(iris_dataset(), GrowConfig(num_trees=3, seed=1, importance_mode=ImportanceMode.GINI))
        self.assertEqual(len(forest.trees[0].impurity_importance), 4)


class PredictForestTest(SimpleTestCase):
    """Test ensemble aggregation"""

    def test_single_tree_forest(self):
        """Test that a one-tree forest predicts like its tree"""
        dataset = iris_dataset()
        forest = grow_forest(dataset, GrowConfig(num_trees=1, seed=2))
        predicted = predict_forest(forest, dataset)
        matrix = dataset.to_matrix()
        expected = [int(predict_tree(forest.trees[0], row)[0]) for row in matrix[:30]]
        np.testing.assert_array_equal(predicted[:30], expected)

    def test_vote_tie_lowest_class(self):
        """Test majority vote with ties broken toward the lowest class index"""
        dataset = iris_dataset()
        forest = grow_forest(dataset, GrowConfig(num_trees=3, seed=2))
        for tree, label in zip(forest.trees, (0, 0, 1)):
            tree.split_feature[:] = -1
            tree.payload[:] = label
        self.assertTrue(np.all(predict_forest(forest, dataset) == 0))
        for tree, label in zip(forest.trees[:2], (2, 1)):
            tree.payload[:] = label
        forest.trees = forest.trees[:2]
        self.assertTrue(np.all(predict_forest(forest, dataset) == 1))

    def test_probabilities_sum_to_one(self):
        dataset = iris_dataset()
        forest = grow_forest(dataset, GrowConfig(tree_type=TreeType.PROBABILITY, num_trees=25, seed=3))
        probabilities = predict_forest(forest, dataset)
        self.assertEqual(probabilities.shape, (150, 3))
        np.testing.assert_allclose(probabilities.sum(axis=1), 1.0, atol=1e-12)

    def test_regression_mean(self):
        """Test that regression predictions stay within the response range"""
        rng = np.random.default_rng(3)
        x = rng.uniform(size=100)
        dataset = regression_dataset({'x': x, 'noise': rng.uniform(size=100)}, 3 * x + rng.normal(0, 0.1, 100))
        forest = grow_forest(dataset, GrowConfig(tree_type=TreeType.REGRESSION, num_trees=30, seed=3))
        predicted = predict_forest(forest, dataset)
        self.assertTrue(np.all(predicted >= dataset.response.values.min()))
        self.assertTrue(np.all(predicted <= dataset.response.values.max()))
        self.assertGreater(np.corrcoef(predicted, x)[0, 1], 0.9)

    def test_survival_curves_non_increasing(self):
        dataset = simulate_survival_dataset(150, 4, rng=np.random.default_rng(5))
        forest = grow_forest(dataset, GrowConfig(tree_type=TreeType.SURVIVAL, num_trees=20, seed=5))
        curves = predict_forest(forest, dataset)
        self.assertEqual(curves.shape, (150, len(forest.timepoints)))
        self.assertTrue(np.all(np.diff(curves, axis=1) <= 1e-12))
        self.assertTrue(np.all(np.diff(forest.timepoints) > 0))

    def test_parallel_prediction_identical(self):
        dataset = iris_dataset()
        forest = grow_forest(dataset, GrowConfig(tree_type=TreeType.PROBABILITY, num_trees=20, seed=3))
        np.testing.assert_array_equal(predict_forest(forest, dataset), predict_forest(forest, dataset, worker_count=3))

    def test_missing_feature(self):
        dataset = iris_dataset()
        forest = grow_forest(dataset, GrowConfig(num_trees=2, seed=3))
        forest.feature_names = forest.feature_names + ['Stem.Length']
        with self.assertRaisesRegex(DataError, 'Stem.Length'):
            predict_forest(forest, dataset)


class SimulationTest(SimpleTestCase):
    """Test the SNP simulation"""

    def test_dimensions(self):
        dataset = simulate_snp_dataset(SimSpec(n=2000, p=50, n_effect=5, seed=1))
        self.assertEqual((dataset.n_samples, dataset.n_features), (2000, 50))
        self.assertEqual(dataset.feature_names[0], 'snp1')
        self.assertEqual(dataset.response.classes, ('0', '1'))

    def test_reproducible(self):
        spec = SimSpec(n=100, p=10, seed=3, endpoint=Endpoint.CONTINUOUS)
        a, b = simulate_snp_dataset(spec), simulate_snp_dataset(spec)
        np.testing.assert_array_equal(a.to_matrix(), b.to_matrix())
        np.testing.assert_array_equal(a.response.values, b.response.values)

    def test_genotype_frequency(self):
        """Test P(g = 2) = maf^2 at a fixed maf"""
        spec = SimSpec(n=100000, p=1, n_effect=0, maf_range=(0.3, 0.3), seed=4)
        genotypes = simulate_snp_dataset(spec, packed=True).column(0).values()
        self.assertAlmostEqual(np.mean(genotypes == 2), 0.09, delta=0.005)

    def test_genotypes_match_dataset(self):
        """Test that raw genotypes are one byte per cell and carry over to both storages"""
        spec = SimSpec(n=50, p=7, seed=6)
        sample = simulate_snp_genotypes(spec)
        self.assertEqual(sample.genotypes.dtype, np.uint8)
        self.assertEqual(sample.genotypes.nbytes, 50 * 7)
        dense, packed = snp_dataset(sample), snp_dataset(sample, packed=True)
        np.testing.assert_array_equal(dense.to_matrix(), sample.genotypes)
        np.testing.assert_array_equal(packed.to_matrix(), sample.genotypes)
        self.assertTrue(packed.column(0).is_packed)
        np.testing.assert_array_equal(simulate_snp_dataset(spec).to_matrix(), sample.genotypes)

    def test_invalid_design(self):
        with self.assertRaises(ConfigError):
            SimSpec(n=10, p=3, n_effect=5).validate()
        with self.assertRaises(ConfigError):
            SimSpec(n=10, p=3, maf_range=(0.2, 0.7)).validate()

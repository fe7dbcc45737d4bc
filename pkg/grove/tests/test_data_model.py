"""
Tests for dataset storage: dense and packed columns, responses, sort cache
Run tests with: python manage.py test grove
"""

import numpy as np
from django.test import SimpleTestCase

from grove.engine.data_model import (
    FeatureColumn,
    Response,
    ResponseKind,
    ResponseSpec,
    StorageKind,
    build_dataset,
    build_sorted_index,
    pack_genotypes,
)
from grove.engine.exceptions import DataError
from grove.tests.fixtures import classification_dataset, iris_dataset


class PackGenotypesTest(SimpleTestCase):
    """Test 2-bit genotype packing"""

    def test_packed_values_decode(self):
        """Test that packed columns return the original genotypes"""
        column = pack_genotypes([0, 1, 2, 2, 1], name='snp1')
        self.assertTrue(column.is_packed)
        self.assertEqual(column.storage, StorageKind.PACKED)
        np.testing.assert_array_equal(column.values(), [0, 1, 2, 2, 1])
        np.testing.assert_array_equal(column.take([4, 0]), [1.0, 0.0])

    def test_packed_size(self):
        """Test four cells per byte"""
        column = pack_genotypes(np.ones(10))
        self.assertEqual(column.nbytes, 3)
        self.assertEqual(pack_genotypes(np.zeros(8)).nbytes, 2)

    def test_thousand_cells_in_250_bytes(self):
        self.assertEqual(pack_genotypes(np.zeros(1000)).nbytes, 250)

    def test_random_columns_decode(self):
        """Test that random genotype columns of every length up to 40 decode unchanged"""
        rng = np.random.default_rng(8)
        for n in range(1, 41):
            genotypes = rng.integers(0, 3, size=n)
            column = pack_genotypes(genotypes)
            self.assertEqual(column.nbytes, (n + 3) // 4)
            np.testing.assert_array_equal(column.values(), genotypes)
            rows = rng.integers(0, n, size=n)
            np.testing.assert_array_equal(column.take(rows), genotypes[rows])
            np.testing.assert_array_equal(column.take_codes(rows), genotypes[rows])

    def test_first_byte_layout(self):
        """Test lowest bits first: [2, 1, 0, 1] -> 0b01_00_01_10"""
        column = pack_genotypes([2, 1, 0, 1])
        self.assertEqual(int(column.payload[0]), 0b01000110)

    def test_bad_value_names_index(self):
        """Test that a value outside {0, 1, 2} is rejected with its index"""
        with self.assertRaises(DataError) as ctx:
            pack_genotypes([0, 1, 3, 2])
        self.assertEqual(ctx.exception.index, 2)

    def test_fractional_value_rejected(self):
        """Test that 1.5 is not a genotype"""
        with self.assertRaises(DataError):
            pack_genotypes([0, 1.5])

    def test_take_codes_dense_rejected(self):
        """Test that dense columns have no genotype codes"""
        with self.assertRaises(DataError):
            FeatureColumn.from_values('x', [0, 1, 2]).take_codes([0])


class FeatureColumnTest(SimpleTestCase):
    """Test dense columns"""

    def test_non_finite_rejected(self):
        """Test that NaN and inf values name the offending row"""
        with self.assertRaises(DataError) as ctx:
            FeatureColumn.from_values('x', [1.0, np.nan])
        self.assertEqual(ctx.exception.index, 1)
        with self.assertRaises(DataError):
            FeatureColumn.from_values('x', [np.inf])

    def test_is_genotype(self):
        """Test genotype detection on dense columns"""
        self.assertTrue(FeatureColumn.from_values('g', [0, 2, 1]).is_genotype())
        self.assertFalse(FeatureColumn.from_values('g', [0, 2, 3]).is_genotype())


class ResponseTest(SimpleTestCase):
    """Test typed responses"""

    def test_classes_sorted(self):
        """Test lexicographic class coding"""
        response = Response.classification('y', ['b', 'a', 'c', 'a'])
        self.assertEqual(response.classes, ('a', 'b', 'c'))
        np.testing.assert_array_equal(response.labels, [1, 0, 2, 0])

    def test_single_class_rejected(self):
        """Test that one class is not a classification problem"""
        with self.assertRaises(DataError):
            Response.classification('y', ['a', 'a'])

    def test_survival_validation(self):
        """Test survival status coding and event presence"""
        with self.assertRaises(DataError):
            Response.survival('t', [1, 2], 's', [0, 2])
        with self.assertRaises(DataError):
            Response.survival('t', [1, 2], 's', [0, 0])
        with self.assertRaises(DataError):
            Response.survival('t', [-1, 2], 's', [1, 0])

    def test_event_timepoints(self):
        """Test distinct ascending event times, censored times excluded"""
        response = Response.survival('t', [3, 1, 2, 3, 5], 's', [1, 1, 0, 1, 0])
        np.testing.assert_array_equal(response.event_timepoints(), [1, 3])


class DatasetTest(SimpleTestCase):
    """Test dataset construction and views"""

    def test_build_iris(self):
        """Test that iris has 150 rows and 4 features"""
        dataset = iris_dataset()
        self.assertEqual(dataset.n_samples, 150)
        self.assertEqual(dataset.n_features, 4)
        self.assertEqual(dataset.response.classes, ('setosa', 'versicolor', 'virginica'))

    def test_unequal_lengths(self):
        """Test that ragged columns are rejected"""
        with self.assertRaises(DataError):
            build_dataset({'x': [1, 2], 'y': ['a', 'b', 'a']}, ResponseSpec(ResponseKind.CLASSIFICATION, 'y'))

    def test_unknown_response(self):
        """Test that a missing dependent variable is reported"""
        with self.assertRaises(DataError):
            build_dataset({'x': [1, 2]}, ResponseSpec(ResponseKind.REGRESSION, 'y'))

    def test_non_numeric_feature(self):
        """Test that string features are rejected"""
        with self.assertRaises(DataError):
            build_dataset({'x': ['a', 'b'], 'y': [1, 2]}, ResponseSpec(ResponseKind.REGRESSION, 'y'))

    def test_select_features_missing(self):
        """Test that every missing name is listed"""
        dataset = iris_dataset()
        with self.assertRaises(DataError) as ctx:
            dataset.select_features(['Petal.Width', 'Leaf.Size', 'Root.Depth'])
        self.assertIn('Leaf.Size', str(ctx.exception))
        self.assertIn('Root.Depth', str(ctx.exception))

    def test_sorted_index(self):
        """Test stable ascending order and caching"""
        dataset = classification_dataset({'x': [3.0, 1.0, 3.0, 2.0]}, ['a', 'b', 'a', 'b'])
        order = build_sorted_index(dataset, 0)
        np.testing.assert_array_equal(order, [1, 3, 0, 2])
        self.assertIs(dataset.sorted_index(0), order)

    def test_with_packed_genotypes(self):
        """Test that only genotype columns are packed"""
        dataset = classification_dataset(
            {'snp': [0, 1, 2, 1], 'age': [31.5, 40.0, 22.0, 58.0]}, ['a', 'b', 'a', 'b'],
        )
        packed = dataset.with_packed_genotypes()
        self.assertTrue(packed.column(0).is_packed)
        self.assertFalse(packed.column(1).is_packed)
        np.testing.assert_array_equal(packed.to_matrix(), dataset.to_matrix())
        self.assertLess(packed.nbytes(), dataset.nbytes())

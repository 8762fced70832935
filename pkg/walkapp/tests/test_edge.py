import math

import numpy as np

from walkapp.edge import (
    LAMBDA_FLOOR, bulk_edge_check, count_edge_modes, localization, strip_operator, strip_spectrum,
)
from walkapp.exceptions import InvalidArgumentError, NearCriticalError
from walkapp.tests.base import NumericTestCase


class StripOperatorTest(NumericTestCase):
    def test_reflecting_is_unitary(self):
        operator = strip_operator(7 * math.pi / 8, 0.3, 10)
        self.assertArrayClose(operator.conj().T @ operator, np.eye(42), atol=1e-12)

    def test_truncated_loses_norm(self):
        operator = strip_operator(math.pi / 2, 0.3, 10, boundary='truncated')
        self.assertLess(np.linalg.svd(operator, compute_uv=False).min(), 1 - 1e-3)

    def test_open_along_y(self):
        operator = strip_operator(math.pi / 2, -1.0, 9, open_axis='y')
        self.assertEqual(operator.shape, (38, 38))
        self.assertArrayClose(operator.conj().T @ operator, np.eye(38), atol=1e-12)

    def test_validation(self):
        with self.assertRaises(InvalidArgumentError):
            strip_operator(math.pi / 2, 0.0, 7)
        with self.assertRaises(InvalidArgumentError):
            strip_operator(math.pi / 2, 0.0, 10, boundary='absorbing')
        with self.assertRaises(InvalidArgumentError):
            strip_operator(math.pi / 2, 0.0, 10, open_axis='z')


class LocalizationTest(NumericTestCase):
    def test_limits(self):
        N = 8
        vectors = np.zeros((2 * (2 * N + 1), 2))
        vectors[2 * N, 0] = 1.0
        vectors[1, 1] = 1.0
        lam, mean_x = localization(vectors, N)
        self.assertEqual(lam[0], 0.0)
        self.assertEqual(lam[1], LAMBDA_FLOOR)
        self.assertArrayClose(mean_x, [0.0, -N])


class StripSpectrumTest(NumericTestCase):
    def test_shape_and_export(self):
        spectrum = strip_spectrum(math.pi / 2, N=8, q_y_count=6, threads=1)
        self.assertEqual(spectrum.epsilon.shape, (6, 34))
        self.assertTrue(np.all(spectrum.lam <= 0))
        self.assertTrue(np.all(np.abs(spectrum.epsilon) <= math.pi))
        lines = spectrum.to_csv(metadata={'delta': 'pi/2'}).splitlines()
        self.assertEqual(lines[:2], ['# delta: pi/2', 'q_y,epsilon,lambda'])
        self.assertEqual(len(lines), 2 + 6 * 34)

    def test_symmetric_under_negation(self):
        for delta in (math.pi / 2, 7 * math.pi / 8):
            for open_axis in ('x', 'y'):
                spectrum = strip_spectrum(delta, N=10, q_y_count=7, open_axis=open_axis, threads=1)
                self.assertLess(spectrum.symmetry_defect(), 1e-8)

    def test_needs_samples(self):
        with self.assertRaises(InvalidArgumentError):
            strip_spectrum(math.pi / 2, N=8, q_y_count=3)

    def test_bad_gap(self):
        with self.assertRaises(InvalidArgumentError):
            count_edge_modes(None, 'half', 'left')
        with self.assertRaises(InvalidArgumentError):
            count_edge_modes(None, 0, 'top')


class BulkEdgeTest(NumericTestCase):
    def check(self, delta, expected):
        report = bulk_edge_check(delta, N=20, threads=1)
        self.assertEqual((report.invariants.W0, report.invariants.Wpi), expected)
        self.assertTrue(report.holds)
        return report

    def test_trivial(self):
        report = self.check(math.pi / 8, (0, 0))
        self.assertEqual(report.chern_minus, 0)

    def test_chern_phase(self):
        report = self.check(math.pi / 2, (1, 0))
        self.assertEqual(report.chern_minus, 1)
        self.assertEqual(report.chern_minus, report.invariants.W0 - report.invariants.Wpi)
        self.assertEqual(report.summary()['N'], 20)

    def test_anomalous_phase(self):
        report = self.check(7 * math.pi / 8, (1, 1))
        self.assertEqual(report.chern_minus, 0)

    def test_counts_independent_of_width(self):
        for delta in (math.pi / 2, 7 * math.pi / 8):
            narrow = bulk_edge_check(delta, N=20, threads=1).invariants
            wide = bulk_edge_check(delta, N=40, threads=1).invariants
            self.assertEqual((narrow.W0, narrow.Wpi), (wide.W0, wide.Wpi))

    def test_edges_have_opposite_chirality(self):
        for delta in (math.pi / 2, 7 * math.pi / 8):
            invariants = bulk_edge_check(delta, N=20, threads=1).invariants
            self.assertEqual(invariants.right, tuple(-c for c in invariants.left))
            self.assertTrue(any(invariants.left))

    def test_reuses_spectrum(self):
        spectrum = strip_spectrum(math.pi / 2, N=20, q_y_count=201, threads=1)
        report = bulk_edge_check(math.pi / 2, spectrum=spectrum)
        self.assertEqual(report.N, 20)
        self.assertEqual(report.summary()['boundary'], 'reflecting')

    def test_refuses_gap_closing(self):
        with self.assertRaises(NearCriticalError):
            bulk_edge_check(math.pi / 4, N=20)

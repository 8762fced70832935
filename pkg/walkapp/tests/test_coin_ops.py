import math

import numpy as np

from walkapp.coin_ops import (
    DEFAULT_GRATING_PERIOD, IDENTITY, PAULI, CoinOperator, CoinSpinor, PlateDescriptor, bloch_matrices,
    calibration_protocol, g_plate_momentum, half_wave_plate, lc_plate, phase_invariant_distance, protocol_U,
    protocol_U_inverse, step_matrix,
)
from walkapp.exceptions import InvalidArgumentError
from walkapp.tests.base import NumericTestCase


class LCPlateTest(NumericTestCase):
    def test_quarter_wave(self):
        expected = np.array([[1, 1j], [1j, 1]]) / math.sqrt(2.0)
        self.assertArrayClose(lc_plate(math.pi / 2, 0.0).matrix, expected)

    def test_half_wave(self):
        self.assertArrayClose(lc_plate(math.pi, 0.0).matrix, [[0, 1j], [1j, 0]])
        self.assertLess(phase_invariant_distance(half_wave_plate(), PAULI[0]), 1e-12)

    def test_identity_at_zero(self):
        self.assertArrayClose(lc_plate(0.0, 1.3).matrix, IDENTITY)

    def test_unitary(self):
        rng = np.random.default_rng(7)
        for delta, alpha in rng.uniform(-10, 10, size=(50, 2)):
            self.assertLess(lc_plate(delta, alpha).unitarity_error(), 1e-12)

    def test_rejects_non_finite(self):
        with self.assertRaises(InvalidArgumentError):
            lc_plate(math.nan, 0.0)

    def test_non_unitary_operator(self):
        with self.assertRaises(InvalidArgumentError):
            CoinOperator(np.array([[1, 1], [0, 1]]))


class GratingTest(NumericTestCase):
    def test_momentum_form_is_rotated_plate(self):
        for q in (-math.pi, -1.0, 0.0, 0.4, math.pi):
            actual = g_plate_momentum('x', 1.1, 0.2, q).matrix
            self.assertArrayClose(actual, lc_plate(1.1, 0.2 - q / 2).matrix)

    def test_momentum_out_of_zone(self):
        with self.assertRaises(InvalidArgumentError):
            g_plate_momentum('x', 1.0, 0.0, 3.5)

    def test_bad_axis(self):
        with self.assertRaises(InvalidArgumentError):
            g_plate_momentum('z', 1.0, 0.0, 0.0)


class PlateDescriptorTest(NumericTestCase):
    def test_delta_reduced(self):
        self.assertAlmostEqual(PlateDescriptor('uniform', 5 * math.pi).delta, math.pi)

    def test_validation(self):
        with self.assertRaises(InvalidArgumentError):
            PlateDescriptor('grating', 1.0)
        with self.assertRaises(InvalidArgumentError):
            PlateDescriptor('uniform', 1.0, axis='x')
        with self.assertRaises(InvalidArgumentError):
            PlateDescriptor('mirror', 1.0)

    def test_shift_moves_optic_axis(self):
        plate = PlateDescriptor('grating', 1.0, 0.1, axis='x').shifted(DEFAULT_GRATING_PERIOD / 4)
        self.assertAlmostEqual(plate.effective_alpha0(DEFAULT_GRATING_PERIOD), 0.1 + math.pi / 4)


class ProtocolTest(NumericTestCase):
    def test_force_shifts_x_gratings_only(self):
        protocol = protocol_U(math.pi / 2)
        w, tx, ty = protocol.at_step(3, force=0.2)
        self.assertEqual(w.shift, 0.0)
        self.assertAlmostEqual(tx.shift, 3 * 0.2 * protocol.Lambda / (2 * math.pi))
        self.assertEqual(ty.shift, 0.0)

    def test_force_equals_momentum_shift(self):
        protocol = protocol_U(1.2)
        forced = step_matrix(protocol, (0.3, -0.4), t=2, force=0.1).matrix
        self.assertArrayClose(forced, step_matrix(protocol, (0.1, -0.4)).matrix)

    def test_inverse_protocol(self):
        rng = np.random.default_rng(3)
        for delta in (0.3, math.pi / 2, 7 * math.pi / 8, 2.9):
            for q in rng.uniform(-math.pi, math.pi, size=(5, 2)):
                product = step_matrix(protocol_U_inverse(delta), q).matrix @ step_matrix(protocol_U(delta), q).matrix
                self.assertLess(phase_invariant_distance(product, IDENTITY), 1e-10)

    def test_inverse_needs_physical_delta(self):
        with self.assertRaises(InvalidArgumentError):
            protocol_U_inverse(0.0)

    def test_step_order(self):
        delta, q = 0.9, (0.7, -1.9)
        w = lc_plate(math.pi / 2, 0.0).matrix
        tx = g_plate_momentum('x', delta, 0.0, q[0]).matrix
        ty = g_plate_momentum('y', delta, 0.0, q[1]).matrix
        self.assertArrayClose(step_matrix(protocol_U(delta), q).matrix, ty @ tx @ w)

    def test_vectorized_matches_pointwise(self):
        qx, qy = np.meshgrid(np.linspace(-3, 3, 4), np.linspace(-2, 2, 3), indexing='ij')
        matrices = bloch_matrices(protocol_U(0.8), qx, qy)
        self.assertEqual(matrices.shape, (4, 3, 2, 2))
        self.assertArrayClose(matrices[1, 2], step_matrix(protocol_U(0.8), (qx[1, 2], qy[1, 2])).matrix)

    def test_calibration_uses_half_wave(self):
        uniform, grating = calibration_protocol('y').plates
        self.assertAlmostEqual(uniform.delta, math.pi)
        self.assertEqual((grating.axis, grating.delta), ('y', math.pi))


class CoinSpinorTest(NumericTestCase):
    def test_named(self):
        self.assertArrayClose(CoinSpinor.named('h').amplitudes, np.array([1, 1]) / math.sqrt(2))
        self.assertTrue(CoinSpinor.named('A').is_normalized())

    def test_unknown_name(self):
        with self.assertRaises(InvalidArgumentError):
            CoinSpinor.named('Q')

    def test_shape(self):
        with self.assertRaises(InvalidArgumentError):
            CoinSpinor([1, 0, 0])

import math

import numpy as np

from walkapp.bloch import (
    band_gaps, berry_curvature, berry_curvature_plaquette, bloch_hamiltonian, bz_grid, chern_number,
    group_velocity, integrate_curvature, n_vector, phase_diagram, quasi_energy,
)
from walkapp.coin_ops import bloch_matrices, protocol_U, step_matrix
from walkapp.exceptions import NearCriticalError
from walkapp.tests.base import NumericTestCase

DELTAS = (math.pi / 8, math.pi / 2, 7 * math.pi / 8)


class QuasiEnergyTest(NumericTestCase):
    def test_closed_form_matches_trace(self):
        k = np.linspace(-math.pi, math.pi, 101)
        qx, qy = np.meshgrid(k, k, indexing='ij')
        for delta in DELTAS:
            trace = np.trace(bloch_matrices(protocol_U(delta), qx, qy), axis1=-2, axis2=-1)
            expected = np.arccos(np.clip(trace.real / 2, -1, 1))
            self.assertArrayClose(quasi_energy((qx, qy), delta), expected, atol=1e-7)
            self.assertArrayClose(np.cos(quasi_energy((qx, qy), delta)), trace.real / 2, atol=1e-12)

    def test_range(self):
        eps = quasi_energy(np.random.default_rng(0).uniform(-math.pi, math.pi, (2, 200)), 1.7)
        self.assertTrue(np.all((eps >= 0) & (eps <= math.pi)))

    def test_n_vector_reconstructs_step(self):
        rng = np.random.default_rng(1)
        for delta in DELTAS:
            for q in rng.uniform(-math.pi, math.pi, size=(10, 2)):
                sample = bloch_hamiltonian(q, delta, curvature=False)
                self.assertAlmostEqual(np.linalg.norm(sample.n), 1.0, delta=1e-12)
                self.assertArrayClose(sample.reconstruct(), step_matrix(protocol_U(delta), q).matrix, atol=1e-10)
                self.assertLess(sample.residual('+'), 1e-10)
                self.assertLess(sample.residual('-'), 1e-10)

    def test_not_separable(self):
        k = np.linspace(-math.pi, math.pi, 21)
        qx, qy = np.meshgrid(k, k, indexing='ij')
        h = 1e-3

        def eps(dx, dy):
            return quasi_energy((qx + dx, qy + dy), math.pi / 2)

        mixed = (eps(h, h) - eps(h, -h) - eps(-h, h) + eps(-h, -h)) / (4 * h * h)
        self.assertGreater(np.abs(mixed).max(), 0.05)

    def test_n_vector_on_arrays(self):
        qx, qy = np.meshgrid(np.linspace(-3, 3, 5), np.linspace(-3, 3, 4), indexing='ij')
        n = n_vector((qx, qy), math.pi / 2)
        self.assertEqual(n.shape, (5, 4, 3))
        self.assertArrayClose(np.linalg.norm(n, axis=-1), np.ones((5, 4)), atol=1e-12)


class VelocityTest(NumericTestCase):
    def test_upper_band_velocity(self):
        vx, vy = group_velocity((math.pi / 2, math.pi), math.pi / 2, '+')
        self.assertAlmostEqual(vx, 0.0, delta=1e-8)
        self.assertAlmostEqual(vy, -0.5, delta=1e-8)

    def test_bands_move_oppositely(self):
        q = (0.4, -1.1)
        plus, minus = group_velocity(q, 1.0, '+'), group_velocity(q, 1.0, '-')
        self.assertArrayClose(plus, -np.array(minus))


class CurvatureTest(NumericTestCase):
    def test_bands_opposite(self):
        q = (0.3, 2.0)
        self.assertAlmostEqual(berry_curvature(q, 1.2, '+'), -berry_curvature(q, 1.2, '-'), places=12)

    def test_matches_eigenstate_plaquette(self):
        rng = np.random.default_rng(2)
        for q in rng.uniform(-math.pi, math.pi, size=(6, 2)):
            for band in '+-':
                analytic = berry_curvature(q, math.pi / 2, band)
                numeric = berry_curvature_plaquette(q, math.pi / 2, band)
                self.assertAlmostEqual(analytic, numeric, delta=1e-3 * max(1.0, abs(analytic)))


class ChernTest(NumericTestCase):
    def test_phases(self):
        self.assertEqual(chern_number(math.pi / 8).nu, 0)
        self.assertEqual(chern_number(math.pi / 2).nu, 1)
        self.assertEqual(chern_number(7 * math.pi / 8).nu, 0)

    def test_bands_opposite(self):
        self.assertEqual(chern_number(math.pi / 2, '+').nu, -chern_number(math.pi / 2, '-').nu)

    def test_stable_under_refinement(self):
        values = {chern_number(math.pi / 2, grid_n=n).nu for n in (16, 24, 48)}
        self.assertEqual(len(values), 1)

    def test_matches_curvature_integral(self):
        self.assertAlmostEqual(integrate_curvature(math.pi / 2), chern_number(math.pi / 2).nu, delta=1e-3)

    def test_signed_convention(self):
        self.assertAlmostEqual(integrate_curvature(math.pi / 2, '-'), 1.0, delta=1e-3)
        self.assertAlmostEqual(integrate_curvature(math.pi / 2, '+'), -1.0, delta=1e-3)
        grid = bz_grid(math.pi / 2, grid_n=64)
        self.assertAlmostEqual(grid.omega_minus.sum() * (2 * math.pi / 64) ** 2 / (2 * math.pi), 1.0, delta=1e-3)

    def test_refuses_critical_delta(self):
        with self.assertRaises(NearCriticalError):
            chern_number(math.pi / 4)


class GapTest(NumericTestCase):
    def test_closings(self):
        self.assertLess(band_gaps(math.pi / 4).gap_at_0, 1e-6)
        self.assertLess(band_gaps(3 * math.pi / 4).gap_at_pi, 1e-6)
        gaps = band_gaps(math.pi / 2)
        self.assertGreater(min(gaps), 0.1)


class PhaseDiagramTest(NumericTestCase):
    def test_transitions_bracketed(self):
        diagram = phase_diagram(np.linspace(0.05, 3.1, 32), threads=1)
        deltas = sorted(t.delta for t in diagram.transitions)
        self.assertEqual(len(deltas), 2)
        self.assertAlmostEqual(deltas[0], math.pi / 4, delta=1e-3)
        self.assertAlmostEqual(deltas[1], 3 * math.pi / 4, delta=1e-3)
        valid = [row.chern_minus for row in diagram.rows if not row.near_critical]
        self.assertEqual(max(valid), 1)

    def test_csv_header(self):
        text = phase_diagram([0.5, 1.5], grid_n=8, threads=1).to_csv()
        self.assertEqual(text.splitlines()[0], 'delta,chern_minus,gap0,gappi')


class BZGridTest(NumericTestCase):
    def test_export(self):
        grid = bz_grid(math.pi / 2, grid_n=8)
        lines = grid.to_csv().splitlines()
        self.assertEqual(lines[0], 'q_x,q_y,epsilon,n_x,n_y,n_z,omega_minus')
        self.assertEqual(len(lines), 65)

import math

import numpy as np

from walkapp.bloch import band_gaps, chern_number, group_velocity
from walkapp.exceptions import InvalidArgumentError
from walkapp.lattice_walk import localized_state
from walkapp.tests.base import NumericTestCase
from walkapp.transport import (
    ForceConfig, WavepacketSpec, band_averaged_displacement, bz_samples, forced_trajectory, make_wavepacket,
    measure_group_velocity, misalignment_monte_carlo, semiclassical_displacement, velocity_map,
)

HALF_PI = math.pi / 2


class WavepacketTest(NumericTestCase):
    def test_normalized(self):
        state = make_wavepacket(WavepacketSpec((0.3, -1.0), '+', sigma_G=4.0))
        self.assertAlmostEqual(state.norm(), 1.0, delta=1e-12)

    def test_window_must_hold_envelope(self):
        with self.assertRaises(InvalidArgumentError):
            make_wavepacket(WavepacketSpec((0.0, 0.0), sigma_G=5.0), half_width=10)

    def test_narrow_packet_rejected(self):
        with self.assertRaises(InvalidArgumentError):
            WavepacketSpec((0.0, 0.0), sigma_G=1.0)

    def test_inverse_prepares_opposite_band(self):
        self.assertEqual(WavepacketSpec((0.0, 0.0), '-', inverse=True).prepared_band, '+')

    def test_grid_samples(self):
        q = bz_samples(4)
        self.assertArrayClose(q, [-HALF_PI, 0.0, HALF_PI, math.pi], atol=1e-15)


class GroupVelocityTest(NumericTestCase):
    def test_upper_band(self):
        estimate = measure_group_velocity(WavepacketSpec((HALF_PI, math.pi), '+', delta=HALF_PI))
        self.assertAlmostEqual(estimate.vx, 0.0, delta=0.02)
        self.assertAlmostEqual(estimate.vy, -0.5, delta=0.02)

    def test_lower_band(self):
        estimate = measure_group_velocity(WavepacketSpec((HALF_PI, math.pi), '-', delta=HALF_PI))
        self.assertAlmostEqual(estimate.vy, 0.5, delta=0.02)

    def test_follows_dispersion(self):
        q0 = (0.9, -2.2)
        estimate = measure_group_velocity(WavepacketSpec(q0, '-', delta=1.3))
        vx, vy = group_velocity(q0, 1.3, '-')
        self.assertAlmostEqual(estimate.vx, vx, delta=0.02)
        self.assertAlmostEqual(estimate.vy, vy, delta=0.02)

    def test_needs_two_steps(self):
        with self.assertRaises(InvalidArgumentError):
            measure_group_velocity(WavepacketSpec((0.0, 0.0)), steps=1)

    def test_velocity_map(self):
        result = velocity_map(HALF_PI, grid=3, threads=1)
        self.assertEqual(result.measured.shape, (3, 3, 2))
        self.assertLess(result.max_error, 0.05)
        self.assertEqual(result.to_csv().splitlines()[0], 'q_x,q_y,v_x,v_y,v_x_analytic,v_y_analytic')


class ForceTest(NumericTestCase):
    def test_warns_near_gap(self):
        with self.assertLogs('walkapp.transport', 'WARNING'):
            warnings = ForceConfig(0.6, gap=1.0).check()
        self.assertEqual(len(warnings), 1)

    def test_small_force_is_quiet(self):
        self.assertEqual(ForceConfig.for_delta(math.pi / 20, HALF_PI).check(), [])

    def test_semiclassical_prediction(self):
        spec = WavepacketSpec((0.4, 1.2), '-', delta=HALF_PI)
        trajectory = forced_trajectory(spec, math.pi / 20, 5)
        predicted = semiclassical_displacement(spec, math.pi / 20, 5)
        self.assertEqual(predicted.shape, (6, 2))
        self.assertAlmostEqual(trajectory.displacement[-1, 1], predicted[-1, 1], delta=0.1)

    def test_trajectory_csv(self):
        trajectory = forced_trajectory(WavepacketSpec((0.0, 0.0), sigma_G=3.0), 0.1, 2)
        lines = trajectory.to_csv(metadata={'steps': 2}).splitlines()
        self.assertEqual(lines[:2], ['# steps: 2', 't,dx,dy'])
        self.assertEqual(len(lines), 5)


class AnomalousDisplacementTest(NumericTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.reference = band_averaged_displacement(HALF_PI, threads=1)

    def test_measures_chern_number(self):
        result = self.reference
        self.assertEqual(chern_number(HALF_PI).nu, 1)
        self.assertGreaterEqual(result.nu_fit, 0.85)
        self.assertLessEqual(result.nu_fit, 1.15)
        self.assertAlmostEqual(result.combined[-1, 1] / 5, 1 / 40, delta=0.02)
        self.assertGreater(result.combined[-1, 1], 0)

    def test_independent_of_force(self):
        for force in (math.pi / 10, math.pi / 5):
            result = band_averaged_displacement(HALF_PI, force=force, threads=1)
            self.assertAlmostEqual(result.nu_fit, self.reference.nu_fit, delta=0.1)

    def test_inverse_drifts_the_other_way(self):
        result = self.reference
        self.assertGreater(result.direct[-1, 1], 0)
        self.assertLess(result.inverse[-1, 1], 0)
        moving = np.abs(result.points_direct[..., -1, 0]) > 0.5
        self.assertTrue(moving.any())
        self.assertArrayClose(np.sign(result.points_direct[..., -1, 0][moving]),
                              np.sign(result.points_inverse[..., -1, 0][moving]))

    def test_adiabaticity_breaks_down_near_the_gap(self):
        gap = band_gaps(HALF_PI).gap_at_0
        slow = band_averaged_displacement(HALF_PI, force=gap / 10, band_resolved=False, threads=1)
        with self.assertLogs('walkapp.transport', 'WARNING'):
            fast = band_averaged_displacement(HALF_PI, force=gap, band_resolved=False, threads=1)
        self.assertEqual(len(fast.warnings), 1)
        self.assertGreater(abs(fast.nu_fit - 1), abs(slow.nu_fit - 1))

    def test_trivial_phase(self):
        result = band_averaged_displacement(7 * math.pi / 8, threads=1)
        self.assertLessEqual(abs(result.nu_fit), 0.15)

    def test_velocity_averages_out(self):
        result = band_averaged_displacement(HALF_PI, force=0.0, grid=11, steps=3, combine_inverse=False, threads=1)
        self.assertTrue(math.isnan(result.nu_fit))
        drift = np.abs(np.diff(result.direct, axis=0))
        self.assertLess(drift.max(), 0.02)

    def test_summary_and_export(self):
        result = band_averaged_displacement(HALF_PI, grid=2, steps=2, sigma_G=3.0, threads=1)
        self.assertEqual(result.summary()['grid'], 2)
        self.assertTrue(result.summary()['combined'])
        self.assertIn('"nu_fit"', result.to_json(metadata={'command': 'transport'}))

    def test_rejects_bad_grid(self):
        with self.assertRaises(InvalidArgumentError):
            band_averaged_displacement(HALF_PI, grid=0)


class MonteCarloTest(NumericTestCase):
    def run_samples(self, sigma_shift, seed=0, threads=1):
        source = localized_state((0, 0), 'H')
        return misalignment_monte_carlo(HALF_PI, source, 4, sigma_shift, 20, seed, threads=threads)

    def test_no_shift_has_no_spread(self):
        result = self.run_samples(0.0)
        self.assertArrayClose(result.std, np.zeros_like(result.std), atol=1e-12)

    def test_spread_grows_with_shift(self):
        small, large = self.run_samples(0.02), self.run_samples(0.2)
        self.assertGreater(large.std[-1].sum(), small.std[-1].sum())

    def test_deterministic(self):
        first = self.run_samples(0.1, seed=7, threads=1)
        second = self.run_samples(0.1, seed=7, threads=2)
        self.assertArrayClose(first.samples, second.samples, atol=0)

    def test_csv(self):
        lines = self.run_samples(0.1).to_csv().splitlines()
        self.assertEqual(lines[0], 't,mean_x,mean_y,std_x,std_y')
        self.assertEqual(len(lines), 6)

    def test_needs_samples(self):
        with self.assertRaises(InvalidArgumentError):
            misalignment_monte_carlo(HALF_PI, localized_state((0, 0), 'H'), 2, 0.1, 1, 0)

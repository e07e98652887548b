# ----------------------------------------------------------------------------
# Copyright (c) 2024, hardy-ss development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

import numpy as np
import numpy.testing as npt

from . import HardySSTestCase
from .._util import BracketNotPositive, Degenerate, InsufficientRange
from ..core import validate, SelfSimilarProfile, Edge
from .. import phase
from ..shooting import (q1_launch, q5_launch, ssode_rhs, ssode_residual,
                        integrate_shot, shoot, OutcomeKind, XI_START_CHECK,
                        _increasing, _escape_margin, _side,
                        fit_origin_behavior, fit_interface_exponent,
                        verify_no_positive_minima, phase_trace,
                        check_profile_ordering, q5_cross_check,
                        rescale_profile, supersolution_defect)


class LaunchTests(HardySSTestCase):

    def setUp(self):
        super().setUp()
        self.params = validate(2, 1, 3)

    def test_leading_order(self):
        f, fp = q1_launch(self.params, 0.0, 1e-6)
        self.assertAlmostEqual(f, 6.907755, places=6)
        self.assertAlmostEqual(fp, -5e5)

    def test_bracket_not_positive(self):
        with self.assertRaises(BracketNotPositive):
            q1_launch(self.params, -10.0, 1e-6)
        with self.assertRaises(BracketNotPositive):
            q1_launch(self.params, 0.0, 0.0)

    def test_corrected_launch_lies_on_labelled_orbit(self):
        xi = 1e-6
        f, fp = q1_launch(self.params, 3.0, xi, corrected=True)
        z = 1.0 / (self.params.m * f)
        label = phase.center_manifold_label(self.params, z)
        self.assertAlmostEqual(float(label) + 0.5 * np.log(xi), 3.0,
                               places=6)
        self.assertAlmostEqual(xi * fp / f,
                               float(phase.center_manifold_y(self.params, z)),
                               places=6)

    def test_corrected_launch_for_large_K(self):
        # tiny z, where the label is inverted directly
        f, _ = q1_launch(self.params, 1e3, 1e-6, corrected=True)
        z = 1.0 / (self.params.m * f)
        self.assertLess(z, 1e-3)
        self.assertAlmostEqual(
            float(phase.center_manifold_label(self.params, z))
            + 0.5 * np.log(1e-6), 1e3, places=6)

    def test_q5_launch(self):
        f, fp = q5_launch(self.params, 2.0, 1e-4)
        self.assertAlmostEqual(f, 2.0 * 1e-4 ** -0.5)
        self.assertAlmostEqual(fp, -0.5 * f / 1e-4)
        with self.assertRaises(BracketNotPositive):
            q5_launch(self.params, 0.0)


class SelfSimilarODETests(HardySSTestCase):

    def setUp(self):
        super().setUp()
        self.params = validate(2, 1, 3)

    def test_rhs(self):
        fp, gp = ssode_rhs(self.params, 1.0, (1.0, -0.5))
        self.assertAlmostEqual(fp, -0.25)
        self.assertAlmostEqual(gp, -2 * -0.5 - 0.5 * -0.25 - 1.0)

    def test_rhs_below_floor(self):
        with self.assertRaises(Degenerate):
            ssode_rhs(self.params, 1.0, (0.0, -0.5))

    def test_residual_of_interface_shape(self):
        xi0 = 2.0
        xi = np.linspace(1.0, 1.99, 2000)
        f = (xi0 ** 2 - xi ** 2) / 8
        res = ssode_residual(self.params, xi, f)
        exp = -3 * (xi0 ** 2 - xi ** 2) / 16 + f / xi ** 2
        npt.assert_allclose(res[2:-2], exp[2:-2], atol=1e-5)


class AsymptoticFitTests(HardySSTestCase):

    def test_origin_fit_on_leading_branch(self):
        params = validate(2, 1, 3)
        xi = np.logspace(-6, -2, 60)
        f = 2.0 - 0.5 * np.log(xi)
        profile = SelfSimilarProfile(xi, f, Edge.UNBOUNDED, 2.0, params)
        fit = fit_origin_behavior(profile, params, decades=4,
                                  corrected=False)
        self.assertAlmostEqual(fit.slope_est, -0.5)
        self.assertAlmostEqual(fit.K_est, 2.0)
        self.assertLess(fit.slope_error, 1e-10)

    def test_origin_fit_needs_a_decade(self):
        params = validate(2, 1, 3)
        xi = np.linspace(0.1, 0.5, 10)
        profile = SelfSimilarProfile(xi, 3 - xi, Edge.UNBOUNDED, 0.0, params)
        with self.assertRaises(InsufficientRange):
            fit_origin_behavior(profile, params)

    def test_interface_fit_m2(self):
        params = validate(2, 1, 3)
        xi = np.linspace(0.1, 2.0, 400)
        f = (4.0 - xi ** 2) / 8
        profile = SelfSimilarProfile(xi, f, 2.0, 0.0, params)
        fit = fit_interface_exponent(profile, params)
        self.assertAlmostEqual(fit.exponent, 1.0)
        self.assertAlmostEqual(fit.amplitude, 0.125)
        self.assertAlmostEqual(fit.exponent_expected, 1.0)
        self.assertAlmostEqual(fit.amplitude_expected, 0.125)

    def test_interface_fit_m3(self):
        params = validate(3, 2, 4)
        xi = np.linspace(0.1, 3.0, 400)
        f = np.sqrt((9.0 - xi ** 2) / 6)
        profile = SelfSimilarProfile(xi, f, 3.0, 0.0, params)
        fit = fit_interface_exponent(profile, params)
        self.assertAlmostEqual(fit.exponent, 0.5)
        self.assertAlmostEqual(fit.amplitude, 6 ** -0.5)

    def test_interface_fit_needs_compact_support(self):
        params = validate(2, 1, 3)
        xi = np.linspace(0.1, 2.0, 40)
        profile = SelfSimilarProfile(xi, 3 - xi, Edge.UNBOUNDED, 0.0, params)
        with self.assertRaises(InsufficientRange):
            fit_interface_exponent(profile, params)


class QualitativeCheckTests(HardySSTestCase):

    def test_minima(self):
        xi = np.linspace(0.1, 1.0, 6)
        f = np.array([5.0, 4.0, 3.0, 3.5, 2.0, 1.0])
        report = verify_no_positive_minima(
            SelfSimilarProfile(xi, f, Edge.UNBOUNDED, 0.0))
        self.assertFalse(report.ok)
        self.assertEqual([v[0] for v in report.violations], [2])

    def test_no_minima(self):
        xi = np.linspace(0.1, 2.0, 40)
        report = verify_no_positive_minima(
            SelfSimilarProfile(xi, (4 - xi ** 2) / 8, 2.0, 0.0))
        self.assertTrue(report.ok)

    def test_q5_branch_dominates_near_origin(self):
        report = q5_cross_check(validate(2, 1, 3))
        self.assertEqual(report['y_start'], -0.5)
        self.assertTrue(report['diverges'])


class RescalingTests(HardySSTestCase):

    def setUp(self):
        super().setUp()
        self.params = validate(2, 1, 3)
        xi = np.linspace(0.1, 2.0, 40)
        self.profile = SelfSimilarProfile(xi, (4 - xi ** 2) / 8, 2.0, 0.0,
                                          self.params)

    def test_rescale(self):
        scaled = rescale_profile(self.profile, 2.0)
        npt.assert_allclose(scaled.xi, self.profile.xi / 2)
        npt.assert_allclose(scaled.f, self.profile.f / 4)
        self.assertEqual(scaled.xi0, 1.0)

    def test_rescale_rejects_non_positive(self):
        with self.assertRaises(ValueError):
            rescale_profile(self.profile, 0.0)

    def test_defect_sign(self):
        xi = np.array([0.5, 1.0, 1.5])
        defect = supersolution_defect(self.params, self.profile, 0.5, xi)
        self.assertTrue(np.all(defect > 0))
        zero = supersolution_defect(self.params, self.profile, 1.0, xi)
        npt.assert_allclose(zero, 0.0)
        below = supersolution_defect(self.params, self.profile, 2.0,
                                     np.array([0.25, 0.5]))
        self.assertTrue(np.all(below < 0))


class ShotGridTests(HardySSTestCase):

    def test_increasing_drops_repeats_and_reversals(self):
        s = np.array([0.0, 1.0, 1.0 + 1e-13, 2.0, 1.5, 3.0])
        npt.assert_array_equal(_increasing(s),
                               [True, True, False, True, False, True])

    def test_shot_grid_is_strictly_increasing(self):
        params = validate(3, 2, 4)
        for K in (0.0, 0.5, 1.0):
            profile, _ = integrate_shot(params, K)
            self.assertTrue(np.all(np.diff(profile.xi) > 0))

    def test_escape_margin(self):
        margin = _escape_margin(validate(2, 1, 5))
        self.assertAlmostEqual(margin([0.0, -0.2, 3.0]), 0.05)
        self.assertAlmostEqual(margin([0.1, -0.1, 1.0]), 0.0625)
        self.assertLess(margin([0.0, -0.3, 1.0]), 0)
        # Z above N a pushes back toward P1
        self.assertLess(margin([1.0, -0.1, 2.0]), 0)


class _ShootChecks:
    """Checks shared by every parameter triple; subclasses set ``triple``."""

    triple = None

    @classmethod
    def setUpClass(cls):
        cls.params = validate(*cls.triple)
        cls.result = shoot(cls.params, n_samples=32)

    def test_bracket_converged(self):
        self.assertLessEqual(self.result.bracket_width, 1e-8)
        self.assertGreater(self.result.bracket_width, 0)
        self.assertTrue(np.isfinite(self.result.K_star))

    def test_bisection_certificate(self):
        diagnostics = self.result.diagnostics
        self.assertTrue(diagnostics['certificate_ok'])
        self.assertGreater(diagnostics['n_bisection_steps'], 10)
        lo, hi = diagnostics['bracket_final']
        self.assertLess(lo, self.result.K_star)
        self.assertLess(self.result.K_star, hi)

    def test_single_flip(self):
        samples = self.result.diagnostics['classification_samples']
        self.assertEqual(len(samples['K']), 32)
        self.assertEqual(samples['flips'], 1)

    def test_classification_around_K_star(self):
        K = self.result.K_star
        for dK, side in ((-1e-6, OutcomeKind.ZERO_CROSSING),
                         (1e-6, OutcomeKind.POSITIVE_LIMIT)):
            _, outcome = integrate_shot(self.params, K + dK)
            self.assertIs(_side(outcome), side)
            self.assertIsNot(outcome.kind, OutcomeKind.INCONCLUSIVE)

    def test_compact_support(self):
        profile = self.result.profile
        self.assertTrue(profile.is_compact)
        self.assertTrue(0 < self.result.xi0 < 1e3)
        self.assertEqual(profile.f[-1], 0.0)
        self.assertEqual(profile.xi[-1], self.result.xi0)

    def test_origin_fit(self):
        fits = self.result.diagnostics
        deep = fits['origin_fit']
        self.assertLess(deep['slope_error'], 0.02)
        self.assertLess(deep['log_xi_range'][0], -600)
        launch = fits['origin_fit_launch_window']
        self.assertGreater(launch['slope_error'], deep['slope_error'])
        self.assertGreater(launch['correction_expected'],
                           deep['correction_expected'])
        self.assertAlmostEqual(fits['origin_fit_corrected']['K_est'],
                               self.result.K_star, places=3)

    def test_interface_fit(self):
        fit = self.result.diagnostics['interface_fit']
        self.assertLess(abs(fit['exponent'] / fit['exponent_expected'] - 1),
                        0.05)
        self.assertLess(abs(fit['amplitude'] / fit['amplitude_expected']
                            - 1), 0.05)

    def test_profile_shape(self):
        self.assertTrue(verify_no_positive_minima(self.result.profile).ok)
        trace = phase_trace(self.result.profile, self.params)
        self.assertTrue(trace.y_negative)
        self.assertTrue(trace.x_monotone)

    def test_xi_start_stability(self):
        other = shoot(self.params,
                      K_bracket=self.result.diagnostics['bracket_initial'],
                      xi_start=XI_START_CHECK, n_samples=0)
        self.assertGreater(other.diagnostics['n_bisection_steps'], 10)
        self.assertLessEqual(abs(other.K_star - self.result.K_star), 1e-7)

    def test_to_dict(self):
        data = self.result.to_dict()
        self.assertEqual(data['params'], self.params.to_dict())
        self.assertEqual(len(data['grid']), len(data['f']))
        self.assertIn('residual_max', data['diagnostics'])
        self.assertIn('Y_end', data['diagnostics']['shot_at_K_star'])


class ShootTests(_ShootChecks, HardySSTestCase):

    triple = (2, 1, 3)

    def test_far_from_K_star(self):
        K = self.result.K_star
        _, below = integrate_shot(self.params, K - 1.0)
        _, above = integrate_shot(self.params, K + 1.0)
        self.assertIs(below.kind, OutcomeKind.ZERO_CROSSING)
        self.assertIs(above.kind, OutcomeKind.POSITIVE_LIMIT)

    def test_origin_fit_on_profile(self):
        launch = fit_origin_behavior(self.result.profile, self.params)
        self.assertAlmostEqual(launch.slope_error,
                               launch.correction_expected, delta=0.02)
        corrected = fit_origin_behavior(self.result.profile, self.params,
                                        corrected=True)
        self.assertLess(corrected.slope_error, 1e-6)

    def test_ordering(self):
        K = self.result.K_star
        pairs = check_profile_ordering(self.params, [K + 1.0, K - 0.5,
                                                     K + 0.5])
        self.assertEqual([p['K1'] for p in pairs], [K - 0.5, K + 0.5])
        self.assertTrue(all(p['ordered'] for p in pairs))


class ShootSuperlinearSourceTests(_ShootChecks, HardySSTestCase):

    triple = (2, 1.5, 3)


class ShootCubicTests(_ShootChecks, HardySSTestCase):

    triple = (3, 2, 4)


class ShootFiveDimensionalTests(_ShootChecks, HardySSTestCase):

    triple = (2, 1, 5)

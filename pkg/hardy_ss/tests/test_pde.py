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
from .._util import (DomainError, CFLViolation, SupportReachedBoundary,
                     NoDominatingRadius, SupportViolation)
from ..core import validate, SelfSimilarProfile
from ..pde import (RadialGrid, RadialField, make_field, initial_bump, mass,
                   lq_norms, near_origin_growth, evolve, rescale_hardy,
                   undo_hardy, FriendlyGiant, giant_eval, find_tau,
                   check_supersolution_bound, check_eps_monotonicity,
                   RadialTestFunction, weak_residual, self_similarity_track,
                   sphere_area, weak_residual_refinement, restrict,
                   relative_l1, hardy_scaling_check, calibrate_tol_ord)
from ..shooting import shoot


def _zero(r):
    return np.zeros_like(r)


def _bump(r):
    return initial_bump(r, M=0.5, R=1.0)


class GridTests(HardySSTestCase):

    def test_volumes_add_up(self):
        grid = RadialGrid(0.0, 2.0, 16)
        self.assertAlmostEqual(grid.volumes(3).sum(), 8 / 3)
        self.assertEqual(len(grid.centers), 16)
        self.assertEqual(grid.refined().n, 32)

    def test_invalid_grids(self):
        with self.assertRaises(ValueError):
            RadialGrid(1.0, 1.0, 16)
        with self.assertRaises(ValueError):
            RadialGrid(0.0, 1.0, 2)

    def test_field_rejects_negative_values(self):
        grid = RadialGrid(0.0, 1.0, 4)
        with self.assertRaises(ValueError):
            RadialField(grid, [1, -1, 0, 0], 0.0, validate(2, 1, 3))

    def test_sphere_area(self):
        self.assertAlmostEqual(sphere_area(3), 4 * np.pi)
        self.assertAlmostEqual(sphere_area(2), 2 * np.pi)


class DiagnosticsTests(HardySSTestCase):

    def test_norms_of_constant(self):
        grid = RadialGrid(0.0, 1.0, 10)
        field = RadialField(grid, np.ones(10), 0.0, validate(2, 1, 3))
        norms = lq_norms(field)
        self.assertAlmostEqual(norms['1'], 4 * np.pi / 3)
        self.assertAlmostEqual(norms['2'], np.sqrt(4 * np.pi / 3))
        self.assertEqual(norms['inf_delta'], 1.0)
        self.assertAlmostEqual(mass(field), 1 / 3)

    def test_near_origin_growth(self):
        grid = RadialGrid(0.0, 2.0, 20)
        field = make_field(_bump, grid, validate(2, 1, 3), eps=0.1)
        frame = near_origin_growth([field])
        self.assertEqual(list(frame.columns),
                         ['t', 'r_inner', 'u_inner', 'u_max', 'r_argmax'])
        self.assertAlmostEqual(frame['r_argmax'][0], 0.05)


class EvolveTests(HardySSTestCase):

    def setUp(self):
        super().setUp()
        self.params = validate(2, 1, 3)
        self.grid = RadialGrid(0.0, 4.0, 64)

    def test_zero_data_stays_zero(self):
        field = make_field(_zero, self.grid, self.params, eps=0.1)
        snaps = evolve(field, 0.05, times=[0.01, 0.02])
        self.assertEqual([s.t for s in snaps], [0.0, 0.01, 0.02, 0.05])
        for s in snaps:
            npt.assert_equal(s.u, 0.0)

    def test_times_as_array(self):
        field = make_field(_bump, self.grid, self.params, eps=0.1)
        snaps = evolve(field, 0.02, times=np.linspace(0.0, 0.02, 3))
        npt.assert_allclose([s.t for s in snaps], [0.0, 0.01, 0.02])

    def test_pure_diffusion_conserves_mass(self):
        field = make_field(_bump, self.grid, self.params, eps=0.1)
        final = evolve(field, 0.05, reaction=False)[-1]
        self.assertAlmostEqual(mass(final) / mass(field), 1.0, places=8)
        self.assertLess(final.u.max(), field.u.max())

    def test_reaction_adds_mass(self):
        field = make_field(_bump, self.grid, self.params, eps=0.1)
        final = evolve(field, 0.05)[-1]
        self.assertGreater(mass(final), mass(field))
        self.assertTrue(np.all(final.u >= 0))

    def test_large_dt(self):
        field = make_field(_bump, self.grid, self.params, eps=0.1)
        with self.assertRaises(CFLViolation):
            evolve(field, 0.05, dt=1.0)

    def test_support_reaches_boundary(self):
        grid = RadialGrid(0.0, 1.05, 21)
        field = make_field(_bump, grid, self.params, eps=0.1)
        with self.assertRaisesRegex(SupportReachedBoundary, 'enlarge'):
            evolve(field, 0.1, reaction=False)

    def test_singular_potential_needs_offset(self):
        field = make_field(_bump, self.grid, self.params, eps=0.0)
        with self.assertRaises(DomainError):
            evolve(field, 0.01)

    def test_eps_zero_away_from_origin(self):
        grid = RadialGrid(0.05, 4.0, 64)
        field = make_field(_bump, grid, self.params, eps=0.0)
        final = evolve(field, 0.01)[-1]
        self.assertTrue(np.all(np.isfinite(final.u)))

    def test_backwards(self):
        field = make_field(_bump, self.grid, self.params, eps=0.1, t=1.0)
        with self.assertRaises(ValueError):
            evolve(field, 0.5)


class HardyScalingTests(HardySSTestCase):

    def test_scaling_constants(self):
        params = validate(2, 1, 3, 4.0)
        grid = RadialGrid(0.0, 4.0, 32)
        u0 = make_field(_bump, grid, params, eps=0.1)
        unit, v0, lam = rescale_hardy(params, u0)
        self.assertEqual(unit.K_hardy, 1.0)
        self.assertAlmostEqual(lam, 4.0)
        npt.assert_allclose(v0.u, u0.u / 4)
        back = undo_hardy(lam, [v0], params)[0]
        npt.assert_allclose(back.u, u0.u)
        self.assertEqual(back.params.K_hardy, 4.0)

    def test_scaled_run_matches_direct_run(self):
        params = validate(2, 1, 3, 4.0)
        grid = RadialGrid(0.0, 4.0, 32)
        u0 = make_field(_bump, grid, params, eps=0.1)
        direct = evolve(u0, 0.01)[-1]
        unit, v0, lam = rescale_hardy(params, u0)
        scaled = undo_hardy(lam, evolve(v0, 0.01 * lam), params)[-1]
        self.assertAlmostEqual(scaled.t, 0.01)
        npt.assert_allclose(scaled.u, direct.u, rtol=1e-6, atol=1e-12)


class FriendlyGiantTests(HardySSTestCase):

    def setUp(self):
        super().setUp()
        self.params = validate(2, 1, 3)
        xi = np.append(np.logspace(-3, np.log10(1.99), 400), 2.0)
        profile = SelfSimilarProfile(xi, (4 - xi ** 2) / 8, 2.0, 0.0,
                                     self.params)
        self.giant = FriendlyGiant(profile)
        self.grid = RadialGrid(0.0, 4.0, 64)

    def test_eval(self):
        giant = self.giant.shifted(1.0)
        self.assertEqual(giant_eval(giant, 3.0, 0.0), 0.0)
        self.assertAlmostEqual(giant_eval(giant, 1.0, 0.0), 3 / 8,
                               places=4)
        self.assertAlmostEqual(giant_eval(giant, 2.0, 3.0), 3 / 8,
                               places=4)
        out = giant_eval(giant, np.array([0.5, 5.0]), 0.0)
        self.assertEqual(out.shape, (2,))
        self.assertEqual(out[1], 0.0)

    def test_eval_needs_positive_time(self):
        with self.assertRaises(ValueError):
            giant_eval(self.giant, 1.0, 0.0)

    def test_negative_shift(self):
        with self.assertRaises(ValueError):
            self.giant.shifted(-1.0)

    def test_tau_for_zero_data(self):
        u0 = make_field(_zero, self.grid, self.params, eps=0.1)
        self.assertEqual(find_tau(self.giant, u0, margin=0.25), 0.25)

    def test_tau_dominates(self):
        u0 = make_field(lambda r: initial_bump(r, M=0.1), self.grid,
                        self.params, eps=0.1)
        tau = find_tau(self.giant, u0)
        self.assertGreater(tau, 0)
        report = check_supersolution_bound([u0], self.giant.shifted(tau))
        self.assertTrue(report['ok'])
        self.assertEqual(report['tau'], tau)

    def test_no_dominating_radius(self):
        u0 = make_field(lambda r: initial_bump(r, M=10.0), self.grid,
                        self.params, eps=0.1)
        with self.assertRaises(NoDominatingRadius):
            find_tau(self.giant, u0)

    def test_violation_reported(self):
        u0 = make_field(lambda r: initial_bump(r, M=0.1), self.grid,
                        self.params, eps=0.1)
        report = check_supersolution_bound([u0], self.giant.shifted(0.01))
        self.assertFalse(report['ok'])
        self.assertGreater(report['max_excess'], 0)
        self.assertTrue(all(v['U'] < v['u'] for v in report['violations']))

    def test_tracking_starts_on_the_giant(self):
        grid = RadialGrid(0.1, 4.0, 40)
        frame, snaps = self_similarity_track(self.giant, 0.1, 0.01, grid,
                                             self.params, times=[0.005])
        self.assertEqual(list(frame['t']), [0.0, 0.005, 0.01])
        self.assertEqual(frame['deviation'][0], 0.0)
        self.assertLess(frame['deviation'].max(), 0.5)
        self.assertEqual(len(snaps), 3)

    def test_tracking_needs_inner_radius(self):
        with self.assertRaises(DomainError):
            self_similarity_track(self.giant, 0.1, 0.01, self.grid,
                                  self.params)


class EpsOrderingTests(HardySSTestCase):

    def setUp(self):
        super().setUp()
        self.params = validate(2, 1, 3)
        self.grid = RadialGrid(0.0, 4.0, 32)

    def test_ordering(self):
        report, runs = check_eps_monotonicity(_bump, [0.1, 0.2, 0.4], 0.02,
                                              self.grid, self.params,
                                              times=[0.01])
        self.assertTrue(report['ok'], report['violations'])
        self.assertEqual(sorted(runs), [0.1, 0.2, 0.4])
        self.assertGreater(report['tol_ord'], 0)
        self.assertGreaterEqual(mass(runs[0.1][-1]), mass(runs[0.4][-1]))

    def test_identical_eps(self):
        report, runs = check_eps_monotonicity(_bump, [0.1, 0.1], 0.01,
                                              self.grid, self.params,
                                              tol_ord=0.0)
        self.assertTrue(report['ok'])
        self.assertEqual(len(runs), 1)

    def test_decreasing_eps(self):
        with self.assertRaisesRegex(ValueError, 'increasing'):
            check_eps_monotonicity(_bump, [0.2, 0.1], 0.01, self.grid,
                                   self.params, tol_ord=0.0)


class WeakFormTests(HardySSTestCase):

    def setUp(self):
        super().setUp()
        self.params = validate(2, 1, 3)
        self.grid = RadialGrid(0.0, 4.0, 32)

    def test_laplacian_matches_finite_differences(self):
        phi = RadialTestFunction(radius=1.0, center=0.2)
        r, h = 0.6, 1e-4
        d2 = (phi.space(r + h) - 2 * phi.space(r) + phi.space(r - h)) / h ** 2
        d1 = (phi.space(r + h) - phi.space(r - h)) / (2 * h)
        self.assertAlmostEqual(float(phi.laplacian(r, 3)),
                               float(d2 + 2 / r * d1), places=5)

    def test_time_factor(self):
        phi = RadialTestFunction(radius=1.0, omega=2.0)
        self.assertAlmostEqual(phi.time(0.0), 1.0)
        self.assertAlmostEqual(phi.dtime(np.pi / 4), -2.0)

    def test_zero_solution(self):
        field = make_field(_zero, self.grid, self.params, eps=0.1)
        snaps = evolve(field, 0.1, times=[0.05])
        phi = RadialTestFunction(radius=1.5, omega=1.0)
        self.assertEqual(weak_residual(snaps, phi, 0.0, 0.1), 0.0)

    def test_support_outside_grid(self):
        field = make_field(_zero, self.grid, self.params, eps=0.1)
        snaps = evolve(field, 0.1)
        with self.assertRaises(SupportViolation):
            weak_residual(snaps, RadialTestFunction(radius=10.0), 0.0, 0.1)

    def test_missing_snapshot_times(self):
        field = make_field(_zero, self.grid, self.params, eps=0.1)
        snaps = evolve(field, 0.1)
        with self.assertRaises(SupportViolation):
            weak_residual(snaps, RadialTestFunction(radius=1.0), 0.0, 0.05)

    def test_residual_decays_under_refinement(self):
        report = weak_residual_refinement(
            initial_bump, RadialGrid(0.0, 8.0, 64), self.params, 0.05, 0.25,
            RadialTestFunction(radius=1.5, omega=1.0), levels=2)
        self.assertEqual(len(report['residuals']), 2)
        self.assertAlmostEqual(report['dr'][1], report['dr'][0] / 2)
        self.assertLess(report['residuals'][1], report['residuals'][0])
        self.assertGreaterEqual(report['orders'][0], 1.0)


class RefinementTests(HardySSTestCase):

    def setUp(self):
        super().setUp()
        self.params = validate(2, 1, 3)
        self.grid = RadialGrid(0.0, 4.0, 16)

    def test_restrict_conserves_mass(self):
        fine = make_field(_bump, self.grid.refined(), self.params, eps=0.1)
        coarse = restrict(fine)
        self.assertEqual(len(coarse), 16)
        self.assertAlmostEqual(
            float(np.sum(self.grid.volumes(3) * coarse)), mass(fine))

    def test_restrict_constant(self):
        fine = RadialField(self.grid.refined(), np.full(32, 2.0), 0.0,
                           self.params)
        npt.assert_allclose(restrict(fine), 2.0)

    def test_relative_l1(self):
        u = make_field(_bump, self.grid, self.params, eps=0.1).u
        self.assertAlmostEqual(relative_l1(2 * u, u, self.grid, 3), 1.0)
        self.assertEqual(relative_l1(u, u, self.grid, 3), 0.0)

    def test_hardy_scaling_within_discretization_error(self):
        params = validate(2, 1, 3, 4.0)
        report = hardy_scaling_check(_bump, RadialGrid(0.0, 4.0, 32),
                                     params, 0.1, 0.01)
        self.assertTrue(report['ok'], report)
        self.assertAlmostEqual(report['lambda'], 4.0)
        self.assertGreater(report['discretization_L1'],
                           report['relative_L1'])


class ProfileEvolutionTests(HardySSTestCase):

    @classmethod
    def setUpClass(cls):
        cls.params = validate(2, 1, 3)
        cls.profile = shoot(cls.params, n_samples=0).profile
        cls.giant = FriendlyGiant(cls.profile)

    def test_domination_after_evolution(self):
        grid = RadialGrid(0.0, 8.0, 128)
        u0 = make_field(initial_bump, grid, self.params, eps=0.05)
        tau = find_tau(self.giant, u0)
        runs = evolve(u0, 0.25, times=np.linspace(0.0, 0.25, 11))
        tol_ord = calibrate_tol_ord(initial_bump, grid, self.params, 0.05,
                                    0.25)
        report = check_supersolution_bound(runs, self.giant.shifted(tau),
                                           tol_ord)
        self.assertTrue(report['ok'], report['violations'][:5])
        self.assertEqual(len(runs), 11)
        self.assertGreater(runs[-1].t, 0)

    def test_self_similar_tracking(self):
        times = np.linspace(0.0, 0.5, 6)
        worst = []
        for n in (64, 128):
            grid = RadialGrid(0.1, 2.5 * self.profile.xi0, n)
            frame, _ = self_similarity_track(self.giant, 1e-3, 0.5, grid,
                                             self.params, times=times,
                                             delta=0.1)
            self.assertEqual(frame['deviation'][0], 0.0)
            worst.append(frame['deviation'].max())
        self.assertLessEqual(worst[1], 0.05)
        self.assertLessEqual(worst[1], worst[0])

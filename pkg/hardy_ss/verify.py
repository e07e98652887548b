# ----------------------------------------------------------------------------
# Copyright (c) 2024, hardy-ss development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

"""Catalog of invariants checked by ``hardy-ss verify``."""

from dataclasses import dataclass, field
import logging

import numpy as np

from ._util import HardySSError, InsufficientRange
from .core import (validate, profile_to_phase, phase_to_profile,
                   phase_to_chart, chart_to_phase)
from . import phase, shooting, pde

logger = logging.getLogger(__name__)

INVARIANTS = {}

ORIGIN_SLOPE_TOL = 0.02
INTERFACE_TOL = 0.05
STABILITY_FACTOR = 10.0
SPECTRUM_TOL = 1e-10
SELF_SIMILAR_EPS = 1e-3
SELF_SIMILAR_DELTA = 0.1
SELF_SIMILAR_T = 1.0
SELF_SIMILAR_REACH = 2.5
SELF_SIMILAR_TOL = 0.05


def _invariant(name, description):
    def register(check):
        INVARIANTS[name] = (description, check)
        return check
    return register


@dataclass
class VerifyContext:
    """Parameter triple, artifacts and cached runs shared by the checks."""
    params: object
    result: object = None
    grid: object = field(default_factory=lambda: pde.RadialGrid(0.0, 8.0,
                                                                128))
    T: float = 0.25
    eps_list: tuple = (0.05, 0.1, 0.2)
    shoot_controls: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict)

    def shooting_result(self):
        if self.result is None:
            self.result = shooting.shoot(self.params, **self.shoot_controls)
        return self.result

    def cached(self, key, fun):
        if key not in self._cache:
            self._cache[key] = fun()
        return self._cache[key]


# --------------------- core and phase ---------------------------------------
@_invariant('core.variable_roundtrip',
            'profile -> phase -> chart -> phase -> profile is the identity')
def _variable_roundtrip(ctx):
    xi, f, fp = 0.7, 1.3, -0.4
    state = phase_to_chart(profile_to_phase(ctx.params, xi, f, fp))
    f2, fp2 = phase_to_profile(ctx.params, xi, chart_to_phase(state))
    err = max(abs(f2 - f), abs(fp2 - fp))
    return err < 1e-12, {'max_error': err}


@_invariant('phase.closed_form_spectra',
            'linearization eigenvalues equal the closed-form spectra and '
            'the closed-form matrices match numerical Jacobians')
def _closed_form_spectra(ctx):
    spectra, jacobians = {}, {}
    for point in phase.critical_points(ctx.params):
        spectrum = phase.closed_form_spectrum(ctx.params, point)
        if spectrum is None:
            continue
        key = f"{point.label}{'' if point.gamma is None else point.gamma}"
        eigenvalues = phase.linearize(ctx.params, point).eigenvalues
        spectra[key] = float(np.max(np.abs(
            np.sort(eigenvalues.real) - spectrum)))
        numeric = phase.numeric_jacobian(
            phase._field(ctx.params, point.chart), point.coordinates)
        jacobians[key] = float(np.max(np.abs(
            phase._closed_form_matrix(ctx.params, point) - numeric)))
    ok = (max(spectra.values()) < SPECTRUM_TOL and
          max(jacobians.values()) < 1e-6)
    return ok, {'spectrum_error': spectra, 'jacobian_error': jacobians}


@_invariant('phase.critical_points', 'every listed critical point has zero '
            'vector field')
def _critical_points(ctx):
    residuals = {f"{p.label}{'' if p.gamma is None else p.gamma}":
                 phase.fixed_point_residual(ctx.params, p)
                 for p in phase.critical_points(ctx.params)}
    return max(residuals.values()) < phase.FIXED_POINT_TOL, residuals


@_invariant('phase.center_manifolds',
            'tangency residuals at P0 and Q1 decay with order 3')
def _center_manifolds(ctx):
    p0 = phase.center_manifold_p0(ctx.params)
    q1 = phase.center_manifold_q1(ctx.params)
    detail = {'P0_order': p0.observed_order, 'Q1_order': q1.observed_order,
              'Q1_a': q1.a}
    return p0.observed_order > 2.9 and q1.observed_order > 2.9, detail


@_invariant('phase.trajec_w_monotone',
            'the orbit family w(C, z) increases in C and in z')
def _trajec_w_monotone(ctx):
    m, N = ctx.params.m, ctx.params.N
    z = np.linspace(0.05, 1.0, 40) * 2 * (N - 2) / (m - 1)
    Cs = (0.5, 1.0, 2.0)
    w = np.array([phase.trajec_w(ctx.params, C, z)[0] for C in Cs])
    alive = w > 0
    in_C = bool(np.all(np.diff(w, axis=0)[alive[:-1]] > 0))
    in_z = bool(np.all(np.diff(w, axis=1)[alive[:, :-1]] > 0))
    return in_C and in_z, {'increasing_in_C': in_C, 'increasing_in_z': in_z,
                           'z_max': float(z[-1])}


# --------------------- shooting ---------------------------------------------
@_invariant('shooting.convergence',
            'bracket width within tolerance and a single classification flip')
def _convergence(ctx):
    result = ctx.shooting_result()
    samples = result.diagnostics.get('classification_samples', {})
    detail = {'K_star': result.K_star, 'bracket_width': result.bracket_width,
              'flips': samples.get('flips')}
    tol = ctx.shoot_controls.get('tol_K', shooting.TOL_K)
    return (result.bracket_width <= tol * 1.0001 and
            samples.get('flips', 1) <= 1), detail


@_invariant('shooting.bisection_certificate',
            'every bisection bracket has a ZeroCrossing lower end and a '
            'PositiveLimit upper end')
def _bisection_certificate(ctx):
    diagnostics = ctx.shooting_result().diagnostics
    detail = {key: diagnostics.get(key) for key in
              ('bracket_initial', 'bracket_final', 'n_bisection_steps',
               'certificate_ok')}
    return bool(diagnostics.get('certificate_ok')), detail


@_invariant('shooting.xi_start_stability',
            'K* moves by at most 10 tolerances when xi_start is refined')
def _xi_start_stability(ctx):
    result = ctx.shooting_result()
    controls = dict(ctx.shoot_controls,
                    K_bracket=result.diagnostics['bracket_initial'],
                    xi_start=shooting.XI_START_CHECK, n_samples=0)
    refined = ctx.cached('refined', lambda: shooting.shoot(ctx.params,
                                                           **controls))
    tol = ctx.shoot_controls.get('tol_K', shooting.TOL_K)
    shift = abs(refined.K_star - result.K_star)
    return shift <= STABILITY_FACTOR * tol, {
        'shift': shift, 'K_star_refined': refined.K_star,
        'xi_start_refined': shooting.XI_START_CHECK}


@_invariant('shooting.origin_fit',
            'slope of f^(m-p) against log(xi) within 2% of -(m-p)/(m(N-2)) '
            'over one decade deep in the origin branch')
def _origin_fit(ctx):
    profile = ctx.shooting_result().profile
    fit = shooting.fit_origin_behavior(profile, ctx.params,
                                       log_xi_min=shooting.ORIGIN_LOG_XI)
    detail = fit.to_dict()
    try:
        launch = shooting.fit_origin_behavior(profile, ctx.params)
        detail['launch_window'] = launch.to_dict()
    except InsufficientRange as err:
        detail['launch_window'] = {'error': str(err)}
    return fit.slope_error <= ORIGIN_SLOPE_TOL, detail


@_invariant('shooting.interface_fit',
            'interface exponent and amplitude within 5%')
def _interface_fit(ctx):
    fit = shooting.fit_interface_exponent(ctx.shooting_result().profile,
                                          ctx.params)
    ok = (abs(fit.exponent / fit.exponent_expected - 1) <= INTERFACE_TOL and
          abs(fit.amplitude / fit.amplitude_expected - 1) <= INTERFACE_TOL)
    return ok, fit.to_dict()


@_invariant('shooting.q5_cross_check',
            'a launch on the Q5 power branch separates from the logarithmic '
            'branch as xi -> 0')
def _q5_cross_check(ctx):
    report = shooting.q5_cross_check(ctx.params,
                                     K=ctx.shooting_result().K_star)
    return report['diverges'], {'ratio_start': report['ratio'][0],
                                'ratio_end': report['ratio'][-1],
                                'y_start': report['y_start']}


@_invariant('shooting.no_positive_minima',
            'the profile has no positive interior minimum')
def _no_positive_minima(ctx):
    report = shooting.verify_no_positive_minima(ctx.shooting_result().profile)
    return report.ok, {'violations': report.violations}


@_invariant('shooting.phase_monotone',
            'X and Z are non-increasing and Y < 0 along the traced orbit')
def _phase_monotone(ctx):
    trace = shooting.phase_trace(ctx.shooting_result().profile, ctx.params)
    return trace.ok, {'max_increase_X': trace.max_increase_X,
                      'max_increase_Z': trace.max_increase_Z,
                      'y_negative': trace.y_negative}


@_invariant('shooting.profile_ordering',
            'shots are strictly ordered in K on the common positivity set')
def _profile_ordering(ctx):
    K = ctx.shooting_result().K_star
    pairs = shooting.check_profile_ordering(
        ctx.params, K + np.linspace(-0.5, 0.5, 6))
    return all(p['ordered'] for p in pairs), {'pairs': pairs}


@_invariant('shooting.supersolution',
            'rescaled profiles with lam < 1 have positive defect')
def _supersolution(ctx):
    profile = ctx.shooting_result().profile
    minima = {lam: float(shooting.supersolution_defect(
        ctx.params, profile, lam).min()) for lam in (0.5, 0.9)}
    return all(v > 0 for v in minima.values()), minima


# --------------------- evolution --------------------------------------------
def _bump_runs(ctx):
    return ctx.cached('eps', lambda: pde.check_eps_monotonicity(
        pde.initial_bump, ctx.eps_list, ctx.T, ctx.grid, ctx.params,
        times=np.linspace(0.0, ctx.T, 21)))


def _test_function():
    return pde.RadialTestFunction(radius=1.5, omega=1.0)


@_invariant('pde.positivity_and_mass',
            'u >= 0 and the mass is non-decreasing with the source on')
def _positivity_and_mass(ctx):
    _, runs = _bump_runs(ctx)
    masses = [pde.mass(s) for s in runs[ctx.eps_list[0]]]
    minimum = min(float(s.u.min()) for r in runs.values() for s in r)
    ok = minimum >= 0 and all(b >= a for a, b in zip(masses, masses[1:]))
    return ok, {'min_u': minimum, 'mass': masses}


@_invariant('pde.lq_finite',
            'L^1, L^2 and L^inf away from the origin stay finite at every '
            'snapshot')
def _lq_finite(ctx):
    _, runs = _bump_runs(ctx)
    norms = [pde.lq_norms(s) for r in runs.values() for s in r]
    ok = all(np.isfinite(v) for n in norms for v in n.values())
    largest = {q: max(n[q] for n in norms) for q in norms[0]}
    return ok, {'max_norms': largest, 'n_snapshots': len(norms)}


@_invariant('pde.eps_ordering',
            'u_eps1 >= u_eps2 - tol_ord for eps1 < eps2')
def _eps_ordering(ctx):
    report, _ = _bump_runs(ctx)
    return report['ok'], report


@_invariant('pde.giant_domination',
            'u_eps(., t) <= U(., t + tau) at every snapshot')
def _giant_domination(ctx):
    report, runs = _bump_runs(ctx)
    giant = pde.FriendlyGiant(ctx.shooting_result().profile)
    worst = None
    for eps in ctx.eps_list:
        u0 = runs[eps][0]
        tau = pde.find_tau(giant, u0)
        check = pde.check_supersolution_bound(runs[eps], giant.shifted(tau),
                                              report['tol_ord'])
        if worst is None or check['max_excess'] > worst['max_excess']:
            worst = check
    return worst['ok'], worst


@_invariant('pde.weak_residual',
            'very weak formulation residual is small for the computed '
            'solution')
def _weak_residual(ctx):
    _, runs = _bump_runs(ctx)
    eps = ctx.eps_list[0]
    res = pde.weak_residual(runs[eps], _test_function(), 0.0, ctx.T)
    return res < 0.05, {'residual': res}


@_invariant('pde.weak_residual_order',
            'the weak residual decays with order >= 1 as dr and the '
            'snapshot spacing are halved together')
def _weak_residual_order(ctx):
    coarse = pde.RadialGrid(ctx.grid.r_min, ctx.grid.R_max, ctx.grid.n // 2)
    report = pde.weak_residual_refinement(
        pde.initial_bump, coarse, ctx.params, ctx.eps_list[0], ctx.T,
        _test_function(), levels=2)
    return bool(min(report['orders']) >= 1.0), report


@_invariant('pde.self_similarity',
            'evolution from U(., 1) stays within 5% of U(., 1 + t) and the '
            'deviation shrinks under refinement')
def _self_similarity(ctx):
    giant = pde.FriendlyGiant(ctx.shooting_result().profile)
    R_max = SELF_SIMILAR_REACH * giant.profile.xi0
    times = np.linspace(0.0, SELF_SIMILAR_T, 11)
    worst = {}
    for n in (ctx.grid.n // 2, ctx.grid.n):
        grid = pde.RadialGrid(SELF_SIMILAR_DELTA, R_max, n)
        frame, _ = pde.self_similarity_track(
            giant, SELF_SIMILAR_EPS, SELF_SIMILAR_T, grid, ctx.params,
            times=times, delta=SELF_SIMILAR_DELTA)
        worst[n] = float(frame['deviation'].max())
    coarse, fine = (worst[n] for n in sorted(worst))
    ok = fine <= SELF_SIMILAR_TOL and fine <= coarse
    return ok, {'max_deviation': worst}


@_invariant('pde.hardy_scaling',
            'solving with K = 4 through the K = 1 scaling matches K directly '
            'within twice the refinement error')
def _hardy_scaling(ctx):
    params = validate(ctx.params.m, ctx.params.p, ctx.params.N, 4.0)
    grid = pde.RadialGrid(0.0, ctx.grid.R_max, ctx.grid.n // 2)
    report = pde.hardy_scaling_check(pde.initial_bump, grid, params, 0.1,
                                     ctx.T / 4)
    return report['ok'], report


# --------------------- runner -----------------------------------------------
def catalog():
    return {name: description for name, (description, _) in
            INVARIANTS.items()}


def run(ctx, names=None):
    report = []
    for name, (description, check) in INVARIANTS.items():
        if names is not None and name not in names:
            continue
        try:
            passed, detail = check(ctx)
        except HardySSError as err:
            passed, detail = False, {'error': f"{type(err).__name__}: {err}"}
        logger.info("%-32s %s", name, 'pass' if passed else 'FAIL')
        report.append({'name': name, 'description': description,
                       'passed': bool(passed), 'detail': detail})
    return report

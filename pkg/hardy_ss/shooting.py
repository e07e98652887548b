# ----------------------------------------------------------------------------
# Copyright (c) 2024, hardy-ss development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

"""Shooting from the logarithmic branch at the origin.

A shot with constant K starts on the center manifold of Q1 and is integrated
in the chart (y, z, log w), whose time variable is log(xi), until X = 1/w
reaches 1. It then continues in the finite phase space (X, Y, Z) augmented
with s = log(xi), where the interface is the regular point P1 and the
support edge is not a singularity of the equations.
"""

from dataclasses import dataclass, field
import enum
import logging

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.stats import linregress

from ._util import (_validate_params, BracketNotPositive, Degenerate,
                    BracketFailure, NonMonotoneClassification,
                    InsufficientRange)
from .core import SelfSimilarProfile, Edge, profile_to_phase_array
from . import phase

logger = logging.getLogger(__name__)

XI_START = 1e-6
XI_START_CHECK = 1e-7
XI_MAX = 1e3
F_TOL = 1e-10
F_FLOOR = 1e-12
TOL_SLOPE = 1e-6
P0_RADIUS = 1e-2
Y_BIG = 1e4
Z_SERIES = 1e-3
SERIES_ORDER = 8
ETA_MAX = 1e7
ESCAPE_Y = 0.25
GRID_RTOL = 1e-10
ORIGIN_LOG_XI = np.log(1e-300)
SAMPLE_DS = 0.02
N_DENSE = 2000
TOL_K = 1e-8
N_SAMPLES = 32
MAX_EXPAND = 40


class OutcomeKind(enum.Enum):
    POSITIVE_LIMIT = 'PositiveLimit'
    ZERO_CROSSING = 'ZeroCrossing'
    INTERFACE = 'Interface'
    INCONCLUSIVE = 'Inconclusive'


@dataclass(frozen=True)
class ShotOutcome:
    kind: OutcomeKind
    xi_end: float
    f_end: float
    slope_fm_end: float
    Y_end: float = np.nan

    def to_dict(self):
        return {'kind': self.kind.value, 'xi_end': self.xi_end,
                'f_end': self.f_end, 'slope_fm_end': self.slope_fm_end,
                'Y_end': self.Y_end}


@dataclass(frozen=True, eq=False)
class ShootingResult:
    K_star: float
    bracket_width: float
    profile: SelfSimilarProfile
    xi0: float
    params: object
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {'params': self.params.to_dict(),
                'K_star': self.K_star,
                'xi0': self.xi0,
                'bracket_width': self.bracket_width,
                'grid': self.profile.xi.tolist(),
                'f': self.profile.f.tolist(),
                'diagnostics': self.diagnostics}


# --------------------- launches ---------------------------------------------
def _manifold_states(params, K, s):
    """(y, z) at times s = log(xi) on the center manifold orbit with constant
    K, ignoring the exponentially small w component."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    c = params.c_log
    psi_a = phase.center_manifold_label(params, Z_SERIES, SERIES_ORDER)
    y, z = np.empty_like(s), np.empty_like(s)
    direct = K - c * s >= psi_a
    for i in np.flatnonzero(direct):
        target = K - c * s[i]
        z[i] = brentq(lambda v: phase.center_manifold_label(
                          params, v, SERIES_ORDER) - target,
                      Z_SERIES * 1e-12, Z_SERIES, xtol=1e-300, rtol=1e-15)
        y[i] = phase.center_manifold_y(params, z[i], SERIES_ORDER)
    if direct.all():
        return y, z

    slow = np.flatnonzero(~direct)
    slow = slow[np.argsort(s[slow])]
    s_a = (K - psi_a) / c
    y_a = float(phase.center_manifold_y(params, Z_SERIES, SERIES_ORDER))
    m, p, N = params.m, params.p, params.N

    def rhs(t, u):
        return [-(N - 2) * u[0] - u[1] - m * u[0] * u[0],
                -(m - p) * u[0] * u[1]]

    def crossed(t, u):
        return u[0] + Y_BIG
    crossed.terminal = True

    sol = solve_ivp(rhs, (s_a, s[slow[-1]]), [y_a, Z_SERIES],
                    method='LSODA', t_eval=s[slow], rtol=1e-11, atol=1e-14,
                    events=crossed)
    if sol.status != 0:
        raise BracketNotPositive(
            f"The orbit with K={K} leaves the logarithmic branch before "
            f"xi={np.exp(s[slow[-1]]):.3g}; decrease xi_start or increase K")
    y[slow], z[slow] = sol.y
    return y, z


def _manifold_state(params, K, s):
    y, z = _manifold_states(params, K, s)
    return float(y[0]), float(z[0])


@_validate_params
def origin_continuation(params, K, log_xi):
    """f on the logarithmic branch with constant K at xi = exp(log_xi).

    The orbit is followed on the center manifold of Q1, so ``log_xi`` may lie
    far below the smallest representable xi.
    """
    _, z = _manifold_states(params, K, log_xi)
    return (1.0 / (params.m * z)) ** (1.0 / (params.m - params.p))


@_validate_params
def q1_launch(params, K, xi_start=XI_START, corrected=False):
    """Initial data (f, f') at xi_start on the logarithmic branch.

    With ``corrected=False`` this is the leading-order expression
    f = [K - c log xi]^(1/(m-p)). With ``corrected=True`` the point is taken on
    the center manifold of Q1 carrying the same constant K, so that K labels
    one orbit independently of xi_start.
    """
    m, p, N = params.m, params.p, params.N
    bracket = K - params.c_log * np.log(xi_start)
    if not xi_start > 0 or not bracket > 0:
        raise BracketNotPositive(
            f"K - c log(xi_start) = {bracket:.6g} must be positive "
            f"(K={K}, xi_start={xi_start})")
    if not corrected:
        f = bracket ** (1.0 / (m - p))
        fprime = -f ** (1 + p - m) / (m * (N - 2) * xi_start)
        return f, fprime
    y, z = _manifold_state(params, K, np.log(xi_start))
    f = (1.0 / (m * z)) ** (1.0 / (m - p))
    return f, y * f / xi_start


@_validate_params
def q5_launch(params, D, xi_start=XI_START):
    if not D > 0 or not xi_start > 0:
        raise BracketNotPositive("D and xi_start must be positive")
    f = D * xi_start ** (-(params.N - 2) / params.m)
    return f, -(params.N - 2) / params.m * f / xi_start


# --------------------- the ODE ----------------------------------------------
@_validate_params
def ssode_rhs(params, xi, state, f_floor=F_FLOOR):
    """Derivatives of (f, g) with g = (f^m)'."""
    f, g = state
    if not f > f_floor:
        raise Degenerate(f"f={f:.3e} is below the floor {f_floor:.1e}; "
                         "the interface has to be handled by event detection")
    m = params.m
    fprime = g / (m * f ** (m - 1))
    gprime = (-(params.N - 1) / xi * g - 0.5 * xi * fprime
              - xi ** -2 * f ** params.p)
    return np.array([fprime, gprime])


@_validate_params
def ssode_residual(params, xi, f, relative=False):
    xi = np.asarray(xi, dtype=float)
    f = np.asarray(f, dtype=float)
    fm = f ** params.m
    dfm = np.gradient(fm, xi, edge_order=2)
    terms = np.vstack([np.gradient(dfm, xi, edge_order=2),
                       (params.N - 1) / xi * dfm,
                       0.5 * xi * np.gradient(f, xi, edge_order=2),
                       xi ** -2 * f ** params.p])
    residual = terms.sum(axis=0)
    if relative:
        scale = np.max(np.abs(terms), axis=0)
        return np.abs(residual) / np.where(scale > 0, scale, 1.0)
    return residual


# --------------------- a single shot ----------------------------------------
@dataclass(frozen=True, eq=False)
class _Shot:
    xi: np.ndarray
    f: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    outcome: ShotOutcome


def _event(fun, terminal=True, direction=0):
    fun.terminal = terminal
    fun.direction = direction
    return fun


def _escape_margin(params):
    """Positive exactly on the part of {Y > -a} that orbits never leave.

    On the plane Y = -a the flow gives dY = a(1/2 - a) - X(Z - N a), and X, Z
    do not increase while Y < 0, so once this is positive it stays positive
    and f cannot reach zero.
    """
    a, N = ESCAPE_Y, params.N
    floor = a * (0.5 - a)

    def margin(u):
        return min(u[1] + a, floor - u[0] * max(u[2] - N * a, 0.0))
    return margin


def _increasing(s, rtol=GRID_RTOL):
    """Mask keeping a strictly increasing run of xi = exp(s)."""
    s = np.maximum.accumulate(s)
    keep = np.ones(len(s), dtype=bool)
    keep[1:] = np.diff(s) > rtol
    return keep


def _run_shot(params, K, xi_start=XI_START, corrected_launch=True,
              rtol=phase.RTOL, atol=phase.ATOL, xi_max=XI_MAX,
              p0_radius=P0_RADIUS, f_tol=F_TOL, tol_slope=TOL_SLOPE,
              eta_max=ETA_MAX):
    m, p, N = params.m, params.p, params.N
    f0, fp0 = q1_launch(params, K, xi_start, corrected=corrected_launch)
    s0, s_max = np.log(xi_start), np.log(xi_max)

    # chart at infinity, time s = log(xi), state (y, z, log w)
    def rhs_q1(s, u):
        y, z, lw = u
        w = np.exp(min(lw, 50.0))
        return [-(N - 2) * y - z - m * y * y - 0.5 * y * w,
                -(m - p) * y * z,
                2 - (m - 1) * y]

    y0 = xi_start * fp0 / f0
    z0 = f0 ** (p - m) / m
    lw0 = 2 * s0 - np.log(m) + (1 - m) * np.log(f0)
    switch = _event(lambda s, u: u[2], direction=1)
    q3_chart = _event(lambda s, u: u[0] + Y_BIG, direction=-1)
    first = solve_ivp(rhs_q1, (s0, s_max), [y0, z0, lw0], method='DOP853',
                      rtol=rtol, atol=atol, events=[switch, q3_chart],
                      dense_output=True)

    s1 = np.append(np.arange(s0, first.t[-1], SAMPLE_DS), first.t[-1])
    y1, z1, lw1 = first.sol(s1)
    X1 = np.exp(-lw1)
    parts = [np.vstack([s1, X1, y1 * X1, z1 * X1,
                        (1.0 / (m * z1)) ** (1.0 / (m - p))])]

    def done(kind, at=None):
        data = np.hstack(parts)
        s, X, Y, Z, f = data[:, _increasing(data[0])]
        xi = np.exp(s)
        xi_end, f_end, Y_end = (xi[-1], f[-1], Y[-1]) if at is None else at
        outcome = ShotOutcome(kind, float(xi_end), float(f_end),
                              float(Y_end * xi_end * f_end), float(Y_end))
        return _Shot(xi, f, X, Y, Z, outcome)

    if first.status == 1 and len(first.t_events[1]):
        return done(OutcomeKind.ZERO_CROSSING)
    if first.status != 1:
        return done(OutcomeKind.INCONCLUSIVE)

    # finite phase space, time eta, state (X, Y, Z, s)
    def rhs_phase(eta, u):
        return np.append(phase._phase_field(params, u[:3]), u[0])

    def log_f(u):
        return (np.log(max(u[0], 1e-300)) + 2 * u[3] - np.log(m)) / (m - 1)

    margin = _escape_margin(params)
    events = [
        _event(lambda eta, u: u[1] + Y_BIG, direction=-1),
        _event(lambda eta, u: margin(u), direction=1),
        _event(lambda eta, u: np.linalg.norm(u[:3]) - p0_radius,
               direction=-1),
        _event(lambda eta, u: u[3] - s_max, direction=1),
        _event(lambda eta, u: log_f(u) - np.log(f_tol), terminal=False,
               direction=-1),
    ]
    u_switch = first.y[:, -1]
    X_switch = np.exp(-u_switch[2])
    start = [X_switch, u_switch[0] * X_switch, u_switch[1] * X_switch,
             first.t[-1]]
    second = solve_ivp(rhs_phase, (0.0, eta_max), start, method='DOP853',
                       rtol=rtol, atol=atol, events=events,
                       dense_output=True)

    etas = np.union1d(second.t, np.linspace(0.0, second.t[-1], N_DENSE))
    X2, Y2, Z2, s2 = second.sol(etas)
    X2 = np.maximum(X2, 0.0)
    parts.append(np.vstack([s2, X2, Y2, np.maximum(Z2, 0.0),
                            (X2 * np.exp(2 * s2) / m) ** (1.0 / (m - 1))]))

    touch = None
    if len(second.t_events[4]):
        X_t, Y_t, _, s_t = second.y_events[4][0]
        xi_t = np.exp(s_t)
        touch = (xi_t, (max(X_t, 0.0) * xi_t ** 2 / m) ** (1.0 / (m - 1)),
                 Y_t)
    fired = [i for i, t in enumerate(second.t_events[:4]) if len(t)]
    if fired and fired[0] == 0:
        return done(OutcomeKind.ZERO_CROSSING, touch)
    if fired and fired[0] in (1, 2):
        return done(OutcomeKind.POSITIVE_LIMIT)
    if margin(second.y[:, -1]) > 0:
        return done(OutcomeKind.POSITIVE_LIMIT)
    if touch is not None:
        slope = touch[2] * touch[0] * touch[1]
        if abs(slope) <= tol_slope:
            return done(OutcomeKind.INTERFACE, touch)
        if slope < 0:
            return done(OutcomeKind.ZERO_CROSSING, touch)
    return done(OutcomeKind.INCONCLUSIVE)


def _shot_profile(params, K, shot, f_tol=F_TOL):
    """Positive part of a shot; a zero crossing is closed off where the
    linear extrapolation of f^m reaches zero."""
    xi, f, Y = shot.xi, shot.f, shot.Y
    if shot.outcome.kind is not OutcomeKind.ZERO_CROSSING:
        return SelfSimilarProfile(xi, f, Edge.UNBOUNDED, K, params)
    below = np.flatnonzero(f <= f_tol)
    end = int(below[0]) if len(below) else len(f)
    end = max(end, 2)
    xi, f = xi[:end], f[:end]
    slope = Y[end - 1] * xi[-1] * f[-1]
    if slope < 0:
        xi_c = xi[-1] + f[-1] ** params.m / -slope
        if xi_c > xi[-1] * (1 + GRID_RTOL):
            return SelfSimilarProfile(np.append(xi, xi_c), np.append(f, 0.0),
                                      xi_c, K, params)
    return SelfSimilarProfile(xi, f, Edge.UNBOUNDED, K, params)


@_validate_params
def integrate_shot(params, K, xi_start=XI_START, **controls):
    shot = _run_shot(params, K, xi_start, **controls)
    logger.debug("shot K=%.12g -> %s at xi=%.6g", K, shot.outcome.kind.value,
                 shot.outcome.xi_end)
    profile = _shot_profile(params, K, shot, controls.get('f_tol', F_TOL))
    return profile, shot.outcome


def _interface_profile(params, K, shot):
    """Truncate a shot at its closest approach to P1 and extrapolate the
    support edge from the local interface behavior."""
    gap = np.hypot(shot.X, shot.Y + 0.5)
    if params.p > 1:
        gap = np.hypot(gap, shot.Z)
    i = int(np.argmin(gap))
    m = params.m
    xi0 = float(np.sqrt(shot.xi[i] ** 2
                        + 4 * m * shot.f[i] ** (m - 1) / (m - 1)))
    xi = np.append(shot.xi[:i + 1], xi0)
    f = np.append(shot.f[:i + 1], 0.0)
    return SelfSimilarProfile(xi, f, xi0, K, params), float(gap[i])


# --------------------- bisection --------------------------------------------
def _side(outcome):
    """ZeroCrossing or PositiveLimit side of K* for one shot."""
    if outcome is None:
        # already through zero before xi_start
        return OutcomeKind.ZERO_CROSSING
    if outcome.kind is OutcomeKind.INTERFACE and outcome.Y_end != -0.5:
        # P1 splits the two sides along Y
        return (OutcomeKind.ZERO_CROSSING if outcome.Y_end < -0.5
                else OutcomeKind.POSITIVE_LIMIT)
    return outcome.kind


@_validate_params
def shoot(params, K_bracket=(-1.0, 1.0), tol_K=TOL_K, xi_start=XI_START,
          n_samples=N_SAMPLES, strict=True, **controls):
    cache = {}

    def classify(K):
        if K not in cache:
            try:
                outcome = integrate_shot(params, K, xi_start, **controls)[1]
            except BracketNotPositive:
                outcome = None
            cache[K] = _side(outcome)
        return cache[K]

    lo, hi = sorted(float(k) for k in K_bracket)
    lo_min = params.c_log * np.log(xi_start)
    width = max(hi - lo, 1.0)

    for _ in range(MAX_EXPAND):
        if classify(lo) is OutcomeKind.ZERO_CROSSING:
            break
        if lo - lo_min < 1e-9:
            raise BracketFailure("No ZeroCrossing shot was found above the "
                                 f"launch limit K > {lo_min:.6g}")
        logger.warning("Expanding bracket downwards from K=%.6g", lo)
        hi = lo if classify(lo) is OutcomeKind.POSITIVE_LIMIT else hi
        lo = max(lo - width, lo_min + 0.5 * (lo - lo_min))
        width *= 2
    else:
        raise BracketFailure(f"No ZeroCrossing shot found down to K={lo}")

    for _ in range(MAX_EXPAND):
        if classify(hi) is OutcomeKind.POSITIVE_LIMIT:
            break
        logger.warning("Expanding bracket upwards from K=%.6g", hi)
        lo = hi if classify(hi) is OutcomeKind.ZERO_CROSSING else lo
        hi += width
        width *= 2
    else:
        raise BracketFailure(f"No PositiveLimit shot found up to K={hi}")

    logger.info("Bracket [%.10g, %.10g] found for %s", lo, hi,
                params.to_dict())
    bracket0 = (lo, hi)
    certificate = []
    while hi - lo > tol_K:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        kind = classify(mid)
        if kind is OutcomeKind.ZERO_CROSSING:
            lo = mid
        elif kind is OutcomeKind.POSITIVE_LIMIT:
            hi = mid
        else:
            raise BracketFailure(f"Shot at K={mid:.12g} is {kind.value}; "
                                 "increase xi_max or loosen the event "
                                 "thresholds")
        certificate.append((lo, hi, classify(lo).value, classify(hi).value))
        logger.debug("bisection [%.12g, %.12g]", lo, hi)
    if hi - lo > tol_K:
        raise BracketFailure(f"The bracket stalled at width {hi - lo:.3e} "
                             f"above tol_K={tol_K:.1e}")
    certified = all(a == OutcomeKind.ZERO_CROSSING.value and
                    b == OutcomeKind.POSITIVE_LIMIT.value
                    for _, _, a, b in certificate)

    samples = _classification_samples(classify, bracket0, n_samples)
    if samples['flips'] > 1:
        message = ("Classification is not a single step function of K: "
                   f"{samples['kinds']}")
        if strict:
            raise NonMonotoneClassification(message)
        logger.warning(message)

    K_star = 0.5 * (lo + hi)
    shot = _run_shot(params, K_star, xi_start, **controls)
    profile, gap = _interface_profile(params, K_star, shot)
    logger.info("K*=%.12g, xi0=%.10g (bracket width %.2e)", K_star,
                profile.xi0, hi - lo)

    diagnostics = {'xi_start': xi_start,
                   'bracket_initial': list(bracket0),
                   'bracket_final': [lo, hi],
                   'n_bisection_steps': len(certificate),
                   'certificate_ok': certified,
                   'shot_at_K_star': shot.outcome.to_dict(),
                   'closest_approach_P1': gap,
                   'classification_samples': samples,
                   'residual_max': _residual_max(params, profile)}
    fits = (('origin_fit', fit_origin_behavior,
             {'log_xi_min': ORIGIN_LOG_XI}),
            ('origin_fit_launch_window', fit_origin_behavior, {}),
            ('origin_fit_corrected', fit_origin_behavior,
             {'corrected': True}),
            ('interface_fit', fit_interface_exponent, {}))
    for key, fit, options in fits:
        try:
            diagnostics[key] = fit(profile, params, **options).to_dict()
        except (InsufficientRange, BracketNotPositive) as err:
            diagnostics[key] = {'error': str(err)}

    return ShootingResult(K_star=K_star, bracket_width=hi - lo,
                          profile=profile, xi0=profile.xi0, params=params,
                          diagnostics=diagnostics)


def _classification_samples(classify, bracket, n_samples):
    if n_samples < 2:
        return {'K': [], 'kinds': [], 'flips': 0}
    Ks = np.linspace(bracket[0], bracket[1], n_samples)
    kinds = [classify(K).value for K in Ks]
    decided = [k for k in kinds if k != OutcomeKind.INTERFACE.value]
    flips = sum(a != b for a, b in zip(decided, decided[1:]))
    return {'K': Ks.tolist(), 'kinds': kinds, 'flips': int(flips)}


def _residual_max(params, profile, lower=1e-4, upper=0.99):
    keep = (profile.xi >= lower) & (profile.xi <= upper * profile.xi0) & \
        profile.positive
    if keep.sum() < 3:
        return None
    r = ssode_residual(params, profile.xi[keep], profile.f[keep],
                       relative=True)
    return float(np.max(r[1:-1]))


# --------------------- asymptotic fits --------------------------------------
@dataclass(frozen=True)
class OriginFit:
    slope_est: float
    K_est: float
    slope_expected: float
    intercept_stderr: float
    n_points: int
    log_xi_range: tuple = (np.nan, np.nan)
    correction_expected: float = 0.0

    @property
    def slope_error(self):
        return abs(self.slope_est / self.slope_expected - 1.0)

    def to_dict(self):
        return {'slope_est': self.slope_est, 'K_est': self.K_est,
                'slope_expected': self.slope_expected,
                'slope_error': self.slope_error,
                'intercept_stderr': self.intercept_stderr,
                'n_points': self.n_points,
                'log_xi_range': list(self.log_xi_range),
                'correction_expected': self.correction_expected}


@_validate_params
def fit_origin_behavior(profile, params, decades=1.0, corrected=False,
                        log_xi_min=None, n_points=40):
    """Regress f^(m-p) against log(xi) over ``decades`` of small xi.

    Near xi_start the slope still carries a relative correction of about
    p / ((N-2)^2 m f^(m-p)), reported as ``correction_expected``. Passing
    ``log_xi_min`` follows the profile's own orbit (constant
    ``profile.K_const``) down to xi = exp(log_xi_min) and fits there, where
    the correction is small. With ``corrected`` the center-manifold invariant
    of the orbit is regressed instead of f^(m-p).
    """
    q = params.m - params.p
    if log_xi_min is None:
        pos = profile.positive & (profile.xi > 0)
        xi, f = profile.xi[pos], profile.f[pos]
        if len(xi) < 3 or xi[-1] / xi[0] < 10:
            raise InsufficientRange("The profile covers less than one decade "
                                    "of small xi")
        keep = xi <= xi[0] * 10 ** decades
        log_xi, f = np.log(xi[keep]), f[keep]
    else:
        log_xi = np.linspace(log_xi_min, log_xi_min + decades * np.log(10),
                             n_points)
        f = origin_continuation(params, profile.K_const, log_xi)
    if corrected:
        target = phase.center_manifold_label(params, f ** -q / params.m,
                                             SERIES_ORDER)
    else:
        target = f ** q
    fit = linregress(log_xi, target)
    correction = 0.0 if corrected else float(
        params.p / ((params.N - 2) ** 2 * params.m * np.mean(f ** q)))
    return OriginFit(slope_est=float(fit.slope), K_est=float(fit.intercept),
                     slope_expected=-params.c_log,
                     intercept_stderr=float(fit.intercept_stderr),
                     n_points=int(len(log_xi)),
                     log_xi_range=(float(log_xi[0]), float(log_xi[-1])),
                     correction_expected=correction)


@dataclass(frozen=True)
class InterfaceFit:
    exponent: float
    amplitude: float
    exponent_expected: float
    amplitude_expected: float
    n_points: int

    def to_dict(self):
        return {'exponent': self.exponent, 'amplitude': self.amplitude,
                'exponent_expected': self.exponent_expected,
                'amplitude_expected': self.amplitude_expected,
                'n_points': self.n_points}


@_validate_params
def fit_interface_exponent(profile, params, window=0.1):
    if not profile.is_compact:
        raise InsufficientRange("The profile has no finite support edge")
    xi0 = profile.xi0
    keep = (profile.xi > (1 - window) * xi0) & (profile.xi < xi0) & \
        profile.positive
    if keep.sum() < 3:
        raise InsufficientRange(f"Fewer than three samples in "
                                f"({1 - window:g} xi0, xi0)")
    gap = xi0 ** 2 - profile.xi[keep] ** 2
    fit = linregress(np.log(gap), np.log(profile.f[keep]))
    m = params.m
    return InterfaceFit(exponent=float(fit.slope),
                        amplitude=float(np.exp(fit.intercept)),
                        exponent_expected=1.0 / (m - 1),
                        amplitude_expected=((m - 1) / (4 * m)) ** (
                            1.0 / (m - 1)),
                        n_points=int(keep.sum()))


# --------------------- qualitative checks -----------------------------------
@dataclass(frozen=True)
class MinimaReport:
    violations: list

    @property
    def ok(self):
        return not self.violations


def verify_no_positive_minima(profile):
    f = profile.f
    inner = np.arange(1, len(f) - 1)
    dips = inner[(f[inner] > 0) & (f[inner] < f[inner - 1]) &
                 (f[inner] < f[inner + 1])]
    return MinimaReport([(int(i), float(profile.xi[i]), float(f[i]))
                         for i in dips])


@dataclass(frozen=True, eq=False)
class PhaseTrace:
    frame: object
    x_monotone: bool
    z_monotone: bool
    y_negative: bool
    max_increase_X: float
    max_increase_Z: float

    @property
    def ok(self):
        return self.x_monotone and self.z_monotone and self.y_negative


@_validate_params
def phase_trace(profile, params, tol=1e-9):
    pos = profile.positive & (profile.xi > 0)
    xi, f = profile.xi[pos], profile.f[pos]
    fprime = np.gradient(f, np.log(xi), edge_order=2) / xi
    X, Y, Z = profile_to_phase_array(params, xi, f, fprime)
    frame = pd.DataFrame({'xi': xi, 'X': X, 'Y': Y, 'Z': Z})
    inc_X = float(np.max(np.diff(X) / np.maximum(X[:-1], 1e-300)))
    inc_Z = float(np.max(np.diff(Z) / np.maximum(Z[:-1], 1e-300)))
    return PhaseTrace(frame=frame,
                      x_monotone=inc_X <= tol,
                      z_monotone=inc_Z <= tol,
                      y_negative=bool(np.all(Y < 0)),
                      max_increase_X=inc_X, max_increase_Z=inc_Z)


@_validate_params
def check_profile_ordering(params, K_values, xi_start=XI_START, **controls):
    """Shots at increasing K must be strictly ordered on the positivity set
    of the smaller one."""
    K_values = sorted(K_values)
    profiles = [integrate_shot(params, K, xi_start, **controls)[0]
                for K in K_values]
    pairs = []
    for (K1, low), (K2, high) in zip(zip(K_values, profiles),
                                     zip(K_values[1:], profiles[1:])):
        keep = low.positive & (low.xi <= high.xi[high.positive][-1])
        gap = high.evaluate(low.xi[keep]) - low.f[keep]
        pairs.append({'K1': K1, 'K2': K2, 'ordered': bool(np.all(gap > 0)),
                      'min_gap': float(np.min(gap))})
    return pairs


@_validate_params
def q5_cross_check(params, D=1.0, K=0.0, xi_start=XI_START, decades=2.0,
                   threshold=10.0):
    """Compare the power branch launched from Q5 with the logarithmic branch:
    the ratio of their X coordinates grows without bound as xi -> 0."""
    m, p, N = params.m, params.p, params.N
    xi = np.logspace(np.log10(xi_start), np.log10(xi_start) + decades, 50)
    f5, _ = q5_launch(params, D, xi_start)

    def rhs(s, u):
        y, z, lw = u
        return [-(N - 2) * y - z - m * y * y - 0.5 * y * np.exp(lw),
                -(m - p) * y * z, 2 - (m - 1) * y]

    s0 = np.log(xi_start)
    u0 = [-(N - 2) / m, f5 ** (p - m) / m,
          2 * s0 - np.log(m) + (1 - m) * np.log(f5)]
    sol = solve_ivp(rhs, (s0, np.log(xi[-1])), u0, method='DOP853',
                    rtol=phase.RTOL, atol=phase.ATOL, dense_output=True)
    lw5 = sol.sol(np.log(xi))[2]
    f_log = np.array([q1_launch(params, K, x)[0] for x in xi])
    X_log = m * xi ** -2 * f_log ** (m - 1)
    ratio = np.exp(-lw5) / X_log
    return {'xi': xi.tolist(), 'ratio': ratio.tolist(),
            'y_start': u0[0],
            'diverges': bool(ratio[0] > threshold and
                             np.all(np.diff(ratio) < 0))}


# --------------------- rescaling and supersolutions -------------------------
def rescale_profile(profile, lam):
    """f_lam(xi) = lam^(-2/(m-1)) f(lam xi)."""
    if not 0 < lam:
        raise ValueError(f"lam must be positive, got {lam}")
    params = profile.params
    factor = lam ** (-2.0 / (params.m - 1))
    xi0 = profile.xi0 / lam if profile.is_compact else profile.xi0
    return SelfSimilarProfile(profile.xi / lam, factor * profile.f, xi0,
                              profile.K_const, params)


@_validate_params
def supersolution_defect(params, profile, lam, xi=None, t=1.0,
                         numeric=False):
    """Defect dU - Lap(U^m) - |x|^-2 U^p of U = f_lam(|x| t^-1/2) at the
    self-similar variable xi; positive for 0 < lam < 1."""
    scaled = rescale_profile(profile, lam)
    if xi is None:
        keep = scaled.positive & (scaled.xi > 0)
        xi = scaled.xi[keep]
    xi = np.asarray(xi, dtype=float)
    f_lam = scaled.evaluate(xi)
    if numeric:
        return -ssode_residual(params, xi, f_lam) / t
    kappa = 2 * (params.p - params.m) / (params.m - 1)
    return xi ** -2 * f_lam ** params.p * (lam ** kappa - 1.0) / t

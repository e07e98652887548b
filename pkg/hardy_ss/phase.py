# ----------------------------------------------------------------------------
# Copyright (c) 2024, hardy-ss development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

"""Autonomous systems satisfied by the self-similar profiles.

Three coordinate systems are used:

``phase``
    (X, Y, Z) = (m xi^-2 f^(m-1), m xi^-1 f^(m-2) f', xi^-2 f^(p-1)), quadratic
    system in the time eta with d(eta)/d(xi) = xi f^(1-m) / m.
``q1``
    (y, z, w) = (Y/X, Z/X, 1/X), the chart at infinity holding Q1 and Q5.
    Its time variable coincides with log(xi).
``q2`` / ``q3``
    (x, z, w) = (X/Y, Z/Y, 1/Y) with the orientation sign -1 (Q2) or +1 (Q3).
"""

from dataclasses import dataclass
import logging

import numpy as np
import pandas as pd
import scipy.linalg
from scipy.integrate import DOP853

from ._util import (_validate_params, NotAFixedPoint, DomainError,
                    StepFailure, BlowupDetected)
from .core import PhaseState, ChartState

logger = logging.getLogger(__name__)

RTOL = 1e-10
ATOL = 1e-12
FIXED_POINT_TOL = 1e-12
LINEARIZE_TOL = 1e-10
EIGEN_TOL = 1e-10
PROXIMITY = 1e-6
PROXIMITY_STEPS = 10
MAX_NORM = 1e8
JACOBIAN_STEP = 1e-6
DEFAULT_GAMMAS = (0.5, 1.0, 2.0)

CHART_COLUMNS = {
    'phase': ('X', 'Y', 'Z'),
    'q1': ('y', 'z', 'w'),
    'q2': ('x', 'z', 'w'),
    'q3': ('x', 'z', 'w'),
}

# components that stay nonnegative by invariance of coordinate planes
_NONNEGATIVE = {'phase': (0, 2), 'q1': (1, 2), 'q2': (), 'q3': ()}


# --------------------- right-hand sides -------------------------------------
def _phase_field(params, u):
    X, Y, Z = u[0], u[1], u[2]
    m, p, N = params.m, params.p, params.N
    return np.array([X * ((m - 1) * Y - 2 * X),
                     -Y * Y - 0.5 * Y - N * X * Y - X * Z,
                     Z * ((p - 1) * Y - 2 * X)])


def _q1_field(params, u):
    y, z, w = u[0], u[1], u[2]
    m, p, N = params.m, params.p, params.N
    return np.array([-(N - 2) * y - z - m * y * y - 0.5 * y * w,
                     -(m - p) * y * z,
                     2 * w - (m - 1) * y * w])


def _q23_field(params, u, sign):
    x, z, w = u[0], u[1], u[2]
    m, p, N = params.m, params.p, params.N
    return sign * np.array([
        -m * x - (N - 2) * x * x - 0.5 * x * w - x * x * z,
        -p * z - 0.5 * z * w - (N - 2) * x * z - x * z * z,
        -w - 0.5 * w * w - N * x * w - x * z * w])


def _field(params, chart):
    if chart == 'phase':
        return lambda u: _phase_field(params, u)
    if chart == 'q1':
        return lambda u: _q1_field(params, u)
    if chart == 'q2':
        return lambda u: _q23_field(params, u, -1)
    if chart == 'q3':
        return lambda u: _q23_field(params, u, +1)
    raise ValueError(f"Unknown chart {chart!r}, expected one of "
                     f"{sorted(CHART_COLUMNS)}")


def _as_array(state):
    if isinstance(state, (PhaseState, ChartState)):
        return state.as_array()
    return np.asarray(state, dtype=float)


@_validate_params
def phase_rhs(params, state):
    return _phase_field(params, _as_array(state))


@_validate_params
def chart_rhs_q1(params, state):
    return _q1_field(params, _as_array(state))


@_validate_params
def chart_rhs_q23(params, state, sign):
    if sign not in (-1, 1):
        raise ValueError(f"sign must be -1 (Q2 chart) or +1 (Q3 chart), got "
                         f"{sign}")
    return _q23_field(params, _as_array(state), sign)


# --------------------- critical points --------------------------------------
@dataclass(frozen=True, eq=False)
class CriticalPoint:
    label: str
    coordinates: np.ndarray
    chart: str
    gamma: float = None
    poincare: np.ndarray = None

    @property
    def at_infinity(self):
        return self.poincare is not None


def _poincare_system(params, v):
    Xb, Yb, Zb = v[0], v[1], v[2]
    m, p, N = params.m, params.p, params.N
    return np.array([Xb * (Xb * Zb + (N - 2) * Xb * Yb + m * Yb * Yb),
                     (p - m) * Xb * Yb * Zb,
                     Zb * (p * Yb * Yb + (N - 2) * Xb * Yb + Xb * Zb)])


@_validate_params
def poincare_residual(params, point):
    if not point.at_infinity:
        raise DomainError(f"{point.label} is a finite critical point")
    v = point.poincare
    sphere = abs(np.dot(v[:3], v[:3]) - 1.0)
    return max(np.max(np.abs(_poincare_system(params, v))), sphere, abs(v[3]))


@_validate_params
def critical_points(params, gammas=DEFAULT_GAMMAS):
    m, N = params.m, params.N
    points = [CriticalPoint('P0', np.zeros(3), 'phase')]

    if params.p == 1:
        for g in gammas:
            points.append(CriticalPoint('P1_gamma', np.array([0., -.5, g]),
                                        'phase', gamma=g))
    else:
        points.append(CriticalPoint('P1', np.array([0., -.5, 0.]), 'phase'))

    for g in gammas:
        points.append(CriticalPoint('P_gamma', np.array([0., 0., g]),
                                    'phase', gamma=g))

    norm = np.hypot(N - 2, m)
    points += [
        CriticalPoint('Q1', np.zeros(3), 'q1',
                      poincare=np.array([1., 0., 0., 0.])),
        CriticalPoint('Q2', np.zeros(3), 'q2',
                      poincare=np.array([0., 1., 0., 0.])),
        CriticalPoint('Q3', np.zeros(3), 'q3',
                      poincare=np.array([0., -1., 0., 0.])),
        CriticalPoint('Q4', np.array([0., 0., 1., 0.]), 'poincare',
                      poincare=np.array([0., 0., 1., 0.])),
        CriticalPoint('Q5', np.array([-(N - 2) / m, 0., 0.]), 'q1',
                      poincare=np.array([m / norm, -(N - 2) / norm, 0., 0.])),
    ]
    return points


@_validate_params
def fixed_point_residual(params, point):
    if point.chart == 'poincare':
        return poincare_residual(params, point)
    return float(np.max(np.abs(_field(params, point.chart)(
        point.coordinates))))


# --------------------- linearization ----------------------------------------
@dataclass(frozen=True, eq=False)
class Linearization:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    stable_dim: int
    unstable_dim: int
    center_dim: int


def _closed_form_matrix(params, point):
    m, p, N = params.m, params.p, params.N
    g = 0.0 if point.gamma is None else point.gamma
    if point.label == 'P0':
        return np.diag([0., -.5, 0.])
    if point.label in ('P1', 'P1_gamma'):
        return np.array([[-(m - 1) / 2, 0., 0.],
                         [N / 2 - g, .5, 0.],
                         [-2 * g, 0., -(p - 1) / 2]])
    if point.label == 'P_gamma':
        return np.array([[0., 0., 0.],
                         [-g, -.5, 0.],
                         [-2 * g, (p - 1) * g, 0.]])
    if point.label == 'Q1':
        return np.array([[-(N - 2.), -1., 0.],
                         [0., 0., 0.],
                         [0., 0., 2.]])
    if point.label == 'Q5':
        return np.array([[N - 2., -1., (N - 2) / (2 * m)],
                         [0., (m - p) * (N - 2) / m, 0.],
                         [0., 0., 2 + (m - 1) * (N - 2) / m]])
    return None


@_validate_params
def closed_form_spectrum(params, point):
    """Eigenvalues of the linearization at ``point`` in closed form, sorted;
    None for the points at infinity without a finite chart."""
    m, p, N = params.m, params.p, params.N
    spectra = {
        'P0': (0., -.5, 0.),
        'P1': (-(m - 1) / 2, .5, -(p - 1) / 2),
        'P1_gamma': (-(m - 1) / 2, .5, 0.),
        'P_gamma': (0., -.5, 0.),
        'Q1': (-(N - 2.), 0., 2.),
        'Q5': (N - 2., (m - p) * (N - 2) / m, 2 + (m - 1) * (N - 2) / m),
    }
    if point.label not in spectra:
        return None
    return np.sort(np.array(spectra[point.label]))


def numeric_jacobian(fun, point, step=JACOBIAN_STEP):
    point = np.asarray(point, dtype=float)
    h = step * max(1.0, np.linalg.norm(point))
    jac = np.empty((len(point), len(point)))
    for j in range(len(point)):
        e = np.zeros_like(point)
        e[j] = h
        jac[:, j] = (fun(point + e) - fun(point - e)) / (2 * h)
    return jac


@_validate_params
def linearize(params, point):
    if point.chart == 'poincare':
        raise DomainError(f"{point.label} has no finite chart in which it "
                          "can be linearized")
    residual = fixed_point_residual(params, point)
    if residual > LINEARIZE_TOL:
        raise NotAFixedPoint(f"{point.label} at {point.coordinates} has "
                             f"residual {residual:.3e}")

    matrix = _closed_form_matrix(params, point)
    if matrix is None:
        matrix = numeric_jacobian(_field(params, point.chart),
                                  point.coordinates)

    eigenvalues, eigenvectors = scipy.linalg.eig(matrix)
    real = eigenvalues.real
    return Linearization(matrix=matrix,
                         eigenvalues=eigenvalues,
                         eigenvectors=eigenvectors,
                         stable_dim=int(np.sum(real < -EIGEN_TOL)),
                         unstable_dim=int(np.sum(real > EIGEN_TOL)),
                         center_dim=int(np.sum(np.abs(real) <= EIGEN_TOL)))


# --------------------- center manifolds -------------------------------------
@dataclass(frozen=True)
class QuadraticManifold:
    """Y = a X^2 + b X Z + c Z^2 near P0, with the observed order of the
    tangency residual along the diagonal ray."""
    a: float
    b: float
    c: float
    observed_order: float


@_validate_params
def tangency_residual_p0(params, X, Z, a=0.0, b=-2.0, c=0.0):
    h = a * X * X + b * X * Z + c * Z * Z
    hX = 2 * a * X + b * Z
    hZ = b * X + 2 * c * Z
    dX, dY, dZ = _phase_field(params, np.array([X, h, Z]))
    return dY - hX * dX - hZ * dZ


def _observed_order(residual, hs):
    r = np.abs([residual(h) for h in hs])
    return float(np.polyfit(np.log(hs), np.log(r), 1)[0])


@_validate_params
def center_manifold_p0(params, hs=(1e-2, 1e-3, 1e-4)):
    a, b, c = 0.0, -2.0, 0.0
    order = _observed_order(
        lambda h: tangency_residual_p0(params, h, h, a, b, c), hs)
    return QuadraticManifold(a, b, c, order)


@dataclass(frozen=True)
class CenterManifoldQ1:
    """(N-2) y + z = a z^2 + O(z^3) with w = w_coeff z^2 + O(z^3); the
    reduced flow is dz = reduced_coeff z^2."""
    a: float
    w_coeff: float
    reduced_coeff: float
    observed_order: float


@_validate_params
def tangency_residual_q1(params, z, a=None):
    if a is None:
        a = -params.p / (params.N - 2) ** 2
    n2 = params.N - 2
    y = (a * z * z - z) / n2
    dy, dz, _ = _q1_field(params, np.array([y, z, 0.0]))
    return n2 * dy + dz - 2 * a * z * dz


@_validate_params
def center_manifold_q1(params, hs=(1e-2, 1e-3, 1e-4)):
    n2 = params.N - 2
    a = -params.p / n2 ** 2
    order = _observed_order(lambda h: tangency_residual_q1(params, h, a), hs)
    return CenterManifoldQ1(a=a, w_coeff=0.0,
                            reduced_coeff=(params.m - params.p) / n2,
                            observed_order=order)


@_validate_params
def center_manifold_series(params, order=8):
    """Coefficients a_1..a_order of y = sum a_k z^k, the center manifold of Q1
    inside the invariant plane {w = 0}."""
    m, p, N = params.m, params.p, params.N
    a = np.zeros(order + 1)
    a[1] = -1.0 / (N - 2)
    for n in range(2, order + 1):
        weighted = sum(j * a[j] * a[n - j] for j in range(1, n))
        plain = sum(a[j] * a[n - j] for j in range(1, n))
        a[n] = ((m - p) * weighted - m * plain) / (N - 2)
    return a[1:]


@_validate_params
def center_manifold_y(params, z, order=8):
    coeffs = center_manifold_series(params, order)
    z = np.asarray(z, dtype=float)
    return sum(c * z ** (k + 1) for k, c in enumerate(coeffs))


@_validate_params
def center_manifold_label(params, z, order=8):
    """Invariant Psi(z) of the reduced flow: K = Psi(z) + c_log * log(xi) is
    constant along every orbit on the center manifold of Q1 (w = 0).

    Normalised so that Psi(z) - 1/(m z) + (d_1/m) log z vanishes as z -> 0,
    where d_1 = -p/(N-2)^2.
    """
    m = params.m
    coeffs = center_manifold_series(params, order)
    r = coeffs[1:] / coeffs[0]
    d = np.zeros(order)
    d[0] = 1.0
    for n in range(1, order):
        d[n] = -sum(r[k - 1] * d[n - k] for k in range(1, n + 1))
    z = np.asarray(z, dtype=float)
    psi = 1.0 / (m * z) - d[1] / m * np.log(z)
    for n in range(2, order):
        psi = psi - d[n] * z ** (n - 1) / ((n - 1) * m)
    return psi


# --------------------- reduced flows ----------------------------------------
@_validate_params
def reduced_flow_p0(params, X, Z):
    return -2 * X * X, -2 * X * Z


@_validate_params
def reduced_flow_q1(params, z, w):
    n2 = params.N - 2
    return ((params.m - params.p) / n2 * z * z,
            2 * w + (params.m - 1) / n2 * z * w)


@_validate_params
def trajec_w(params, C, z):
    """w = C z^((m-1)/(m-p)) exp(-2(N-2)/((m-p) z)).

    Returns ``(w, underflow)``; ``underflow`` marks entries below the
    smallest positive double, which are returned as exact zeros.
    """
    if not C > 0:
        raise DomainError(f"C must be positive, got C={C}")
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise DomainError("z must be positive")
    q = params.m - params.p
    logw = (np.log(C) + (params.m - 1) / q * np.log(z)
            - 2 * (params.N - 2) / (q * z))
    underflow = logw < np.log(np.finfo(float).tiny)
    w = np.where(underflow, 0.0, np.exp(np.maximum(logw, -745.0)))
    if w.ndim == 0:
        return float(w), bool(underflow)
    return w, underflow


# --------------------- integration ------------------------------------------
@dataclass(frozen=True, eq=False)
class Trajectory:
    eta: np.ndarray
    states: np.ndarray
    chart: str
    termination: str
    nearest: str
    distance: float

    def to_frame(self):
        frame = pd.DataFrame(self.states, columns=CHART_COLUMNS[self.chart])
        frame.insert(0, 'eta', self.eta)
        return frame

    def run_record(self):
        return {'chart': self.chart,
                'termination': self.termination,
                'nearest_critical_point': self.nearest,
                'distance': self.distance,
                'eta_end': float(self.eta[-1]),
                'n_steps': int(len(self.eta) - 1)}


def _nearest_critical(params, chart, u):
    if chart == 'phase':
        X, Y, Z = u
        candidates = {'P0': np.linalg.norm(u)}
        if params.p == 1:
            candidates['P1_gamma'] = np.hypot(X, Y + 0.5)
        else:
            candidates['P1'] = np.linalg.norm(u - np.array([0., -.5, 0.]))
        if Z > 0:
            candidates['P_gamma'] = np.hypot(X, Y)
    elif chart == 'q1':
        q5 = np.array([-(params.N - 2) / params.m, 0., 0.])
        candidates = {'Q1': np.linalg.norm(u),
                      'Q5': np.linalg.norm(u - q5)}
    else:
        candidates = {chart.upper(): np.linalg.norm(u)}
    label = min(candidates, key=candidates.get)
    return label, float(candidates[label])


@_validate_params
def integrate_phase(params, initial, chart='phase', eta_span=(0.0, 50.0),
                    rtol=RTOL, atol=ATOL, max_norm=MAX_NORM,
                    on_blowup='raise', proximity=PROXIMITY,
                    proximity_steps=PROXIMITY_STEPS, max_step=np.inf):
    if on_blowup not in ('raise', 'stop'):
        raise ValueError("on_blowup must be 'raise' or 'stop'")
    fun = _field(params, chart)
    u0 = _as_array(initial).copy()
    eta0, eta1 = float(eta_span[0]), float(eta_span[1])

    if np.max(np.abs(fun(u0))) <= FIXED_POINT_TOL:
        label, dist = _nearest_critical(params, chart, u0)
        return Trajectory(np.array([eta0, eta1]), np.vstack([u0, u0]), chart,
                          'fixed point', label, dist)

    nonneg = list(_NONNEGATIVE[chart])
    solver = DOP853(lambda t, u: fun(u), eta0, u0, eta1, rtol=rtol,
                    atol=atol, max_step=max_step)
    etas, states = [eta0], [u0]
    termination = 'eta_end'
    streak = 0

    while solver.status == 'running':
        message = solver.step()
        if solver.status == 'failed':
            raise StepFailure(f"Integrator failed at eta={solver.t:.6g}: "
                              f"{message}")
        if nonneg:
            solver.y[nonneg] = np.maximum(solver.y[nonneg], 0.0)
        etas.append(solver.t)
        states.append(solver.y.copy())

        if not np.all(np.isfinite(solver.y)) or \
                np.linalg.norm(solver.y) > max_norm:
            if on_blowup == 'raise':
                raise BlowupDetected(f"State norm exceeded {max_norm:.3g} at "
                                     f"eta={solver.t:.6g}")
            termination = 'blowup'
            break

        label, dist = _nearest_critical(params, chart, solver.y)
        streak = streak + 1 if dist < proximity else 0
        if streak >= proximity_steps:
            termination = f'entered {label}'
            break

    states = np.array(states)
    label, dist = _nearest_critical(params, chart, states[-1])
    logger.debug("orbit in chart %s ended (%s) near %s at distance %.3e",
                 chart, termination, label, dist)
    return Trajectory(np.array(etas), states, chart, termination, label, dist)


@_validate_params
def limit_orbit_w0(params, eta_end=1e4, delta=1e-3):
    """Orbit leaving Q1 inside {w = 0}, tangent to (N-2) y + z = 0; it runs
    towards Q3 (y -> -inf, z -> +inf)."""
    start = np.array([-delta, (params.N - 2) * delta, 0.0])
    return integrate_phase(params, start, chart='q1',
                           eta_span=(0.0, eta_end), on_blowup='stop')


@_validate_params
def limit_orbit_z0(params, eta_end=50.0, delta=1e-6):
    """Orbit leaving Q1 inside {z = 0}; it stays on the w axis, which is the
    X axis entering P0 in the finite phase space."""
    start = np.array([0.0, 0.0, delta])
    return integrate_phase(params, start, chart='q1',
                           eta_span=(0.0, eta_end), on_blowup='stop')

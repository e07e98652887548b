# ----------------------------------------------------------------------------
# Copyright (c) 2024, hardy-ss development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

"""Radially symmetric evolution of the regularized problem

    u_t = Lap(u^m) + K (|x| + eps)^-2 u^p

with cell-centered finite volumes in r and explicit time stepping, together
with the comparison checks against the self-similar solution.
"""

from dataclasses import dataclass, field, replace
import logging

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid
from scipy.special import gamma

from ._util import (_validate_params, DomainError, CFLViolation,
                    SupportReachedBoundary, NoDominatingRadius,
                    SupportViolation)

logger = logging.getLogger(__name__)

CFL_DIFFUSION = 0.45
REACTION_FRACTION = 0.1
SUPPORT_TOL = 1e-10
NEGATIVE_TOL = 1e-10
MAX_STEPS = 10_000_000
TAU_MARGIN = 0.1
TAU_RETRIES = 10
ORDER_SAFETY = 3.0
TOL_ORD_FLOOR = 1e-12
DELTA = 0.1


def sphere_area(N):
    return 2 * np.pi ** (N / 2) / gamma(N / 2)


# --------------------- grids and fields -------------------------------------
@dataclass(frozen=True)
class RadialGrid:
    r_min: float
    R_max: float
    n: int

    def __post_init__(self):
        if not 0 <= self.r_min < self.R_max:
            raise ValueError(f"Need 0 <= r_min < R_max, got r_min={self.r_min}"
                             f", R_max={self.R_max}")
        if int(self.n) != self.n or self.n < 4:
            raise ValueError(f"The grid needs at least 4 cells, got {self.n}")
        object.__setattr__(self, 'n', int(self.n))

    @property
    def dr(self):
        return (self.R_max - self.r_min) / self.n

    @property
    def faces(self):
        return np.linspace(self.r_min, self.R_max, self.n + 1)

    @property
    def centers(self):
        f = self.faces
        return 0.5 * (f[1:] + f[:-1])

    def volumes(self, N):
        """Cell measures of r^(N-1) dr."""
        f = self.faces
        return (f[1:] ** N - f[:-1] ** N) / N

    def refined(self, factor=2):
        return RadialGrid(self.r_min, self.R_max, self.n * factor)

    def to_dict(self):
        return {'r_min': self.r_min, 'R_max': self.R_max, 'n': self.n}


@dataclass(frozen=True, eq=False)
class RadialField:
    grid: RadialGrid
    u: np.ndarray
    t: float
    params: object
    eps: float = 0.0
    inner: object = None

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.shape != (self.grid.n,):
            raise ValueError(f"Expected {self.grid.n} cell values, got "
                             f"{u.shape}")
        if np.any(u < 0) or not np.all(np.isfinite(u)):
            raise ValueError("Field values must be finite and nonnegative")
        if self.eps < 0:
            raise ValueError(f"eps must be nonnegative, got {self.eps}")
        object.__setattr__(self, 'u', u)

    @property
    def r(self):
        return self.grid.centers

    def evolved(self, u, t):
        return replace(self, u=u, t=t)

    def to_frame(self):
        return pd.DataFrame({'r': self.r, 'u': self.u})


@_validate_params
def make_field(initial, grid, params, eps=0.0, t=0.0, inner=None):
    return RadialField(grid, initial(grid.centers), t, params, eps, inner)


def initial_bump(r, M=1.0, R=1.0):
    r = np.asarray(r, dtype=float)
    return M * np.maximum(0.0, 1 - (r / R) ** 2) ** 2


def mass(field):
    """Integral of u r^(N-1) dr."""
    return float(np.sum(field.grid.volumes(field.params.N) * field.u))


def lq_norms(field, delta=DELTA):
    area = sphere_area(field.params.N)
    vol = field.grid.volumes(field.params.N)
    away = field.r >= delta
    return {'1': float(area * np.sum(vol * field.u)),
            '2': float(np.sqrt(area * np.sum(vol * field.u ** 2))),
            'inf_delta': float(field.u[away].max()) if away.any() else 0.0}


def near_origin_growth(snapshots, n_cells=3):
    rows = []
    for s in snapshots:
        rows.append({'t': s.t, 'r_inner': float(s.r[0]),
                     'u_inner': float(s.u[:n_cells].mean()),
                     'u_max': float(s.u.max()),
                     'r_argmax': float(s.r[np.argmax(s.u)])})
    return pd.DataFrame(rows)


# --------------------- explicit scheme --------------------------------------
def _secant(a, b, m):
    """(a^m - b^m)/(a - b), the face coefficient of the degenerate flux."""
    diff = a - b
    close = np.abs(diff) <= 1e-14 * np.maximum(np.abs(a), 1.0)
    safe = np.where(close, 1.0, diff)
    mean = 0.5 * (a + b)
    return np.where(close, m * mean ** (m - 1), (a ** m - b ** m) / safe)


class _Scheme:
    def __init__(self, field, reaction=True):
        g, params = field.grid, field.params
        self.m, self.p = params.m, params.p
        self.dr = g.dr
        self.area = g.faces ** (params.N - 1)
        self.volume = g.volumes(params.N)
        self.inner = field.inner
        self.zero_flux = field.inner is None
        if reaction:
            self.potential = params.K_hardy * (g.centers + field.eps) ** -2
        else:
            self.potential = np.zeros(g.n)

    def _ghosts(self, u, t):
        left = u[0] if self.zero_flux else float(self.inner(t))
        return left, 0.0

    def rhs(self, u, t):
        m = self.m
        left, right = self._ghosts(u, t)
        um = u ** m
        flux = np.empty(len(u) + 1)
        flux[1:-1] = self.area[1:-1] * np.diff(um) / self.dr
        flux[0] = 0.0 if self.zero_flux else \
            self.area[0] * (um[0] - left ** m) / (0.5 * self.dr)
        flux[-1] = self.area[-1] * (right ** m - um[-1]) / (0.5 * self.dr)
        return np.diff(flux) / self.volume + self.potential * u ** self.p

    def stable_dt(self, u, t, cfl=CFL_DIFFUSION):
        m = self.m
        left, right = self._ghosts(u, t)
        coef = np.empty(len(u) + 1)
        coef[1:-1] = _secant(u[1:], u[:-1], m) / self.dr
        coef[0] = 0.0 if self.zero_flux else \
            _secant(u[0], left, m) / (0.5 * self.dr)
        coef[-1] = _secant(u[-1], right, m) / (0.5 * self.dr)
        coef *= self.area
        diffusion = (coef[1:] + coef[:-1]) / self.volume
        reaction = self.potential * u ** (self.p - 1)
        bound = np.inf
        if diffusion.max() > 0:
            bound = cfl / diffusion.max()
        if reaction.max() > 0:
            bound = min(bound, REACTION_FRACTION / reaction.max())
        return bound


def dt_policy(cfl=CFL_DIFFUSION):
    return {'scheme': 'explicit Euler, finite volumes',
            'diffusion': f'dt <= {cfl} / max_i (sum of face secants '
                         '* face area / (cell measure * face spacing))',
            'reaction': f'dt <= {REACTION_FRACTION} / '
                        'max(K (r+eps)^-2 u^(p-1))'}


def evolve(field, T_end, times=None, dt=None, cfl=CFL_DIFFUSION,
           reaction=True, support_tol=SUPPORT_TOL, max_steps=MAX_STEPS):
    """Advance ``field`` to ``T_end`` and return the snapshots at ``times``
    (always including the initial field and ``T_end``)."""
    if field.eps <= 0 and field.grid.r_min <= 0:
        raise DomainError("Runs with eps = 0 need a grid starting at "
                          "r_min > 0")
    if not T_end >= field.t:
        raise ValueError(f"T_end={T_end} precedes the field time {field.t}")
    times = () if times is None else times
    targets = sorted({float(t) for t in times if field.t < t < T_end}
                     | {float(T_end)})
    scheme = _Scheme(field, reaction)
    u, t = field.u.copy(), field.t
    snapshots = [field]
    steps = 0
    for target in targets:
        while target - t > 1e-14 * max(1.0, abs(target)):
            bound = scheme.stable_dt(u, t, cfl)
            if dt is not None:
                if dt > bound:
                    raise CFLViolation(f"dt={dt:.3e} exceeds the stability "
                                       f"bound {bound:.3e} at t={t:.6g}")
                step = dt
            else:
                step = bound
            step = min(step, target - t)
            u = u + step * scheme.rhs(u, t)
            t += step
            steps += 1
            if u.min() < -NEGATIVE_TOL * max(u.max(), 1.0):
                raise CFLViolation(f"Negative values after the step at "
                                   f"t={t:.6g}")
            np.maximum(u, 0.0, out=u)
            if u[-1] > support_tol:
                raise SupportReachedBoundary(
                    f"u={u[-1]:.3e} at the outer cell r={field.r[-1]:.4g} "
                    f"(t={t:.6g}); enlarge R_max")
            if steps > max_steps:
                raise CFLViolation(f"More than {max_steps} steps before "
                                   f"t={target}; the time step collapsed")
        t = target
        snapshots.append(field.evolved(u.copy(), t))
        logger.debug("snapshot t=%.6g after %d steps, max u=%.6g", t, steps,
                     u.max())
    return snapshots


# --------------------- Hardy constant ---------------------------------------
@_validate_params
def rescale_hardy(params, u0):
    """Reduce a problem with Hardy constant K to K = 1.

    u(x, t) = lam^(1/(m-1)) v(x, lam t) with lam = K^((m-1)/(m-p)).
    """
    K, m, p = params.K_hardy, params.m, params.p
    lam = K ** ((m - 1) / (m - p))
    unit = replace(params, K_hardy=1.0)
    v0 = replace(u0, u=u0.u * K ** (-1.0 / (m - p)), t=u0.t * lam,
                 params=unit)
    return unit, v0, lam


@_validate_params
def undo_hardy(lam, v_snapshots, params):
    factor = lam ** (1.0 / (params.m - 1))
    return [replace(v, u=v.u * factor, t=v.t / lam, params=params)
            for v in v_snapshots]


@_validate_params
def hardy_scaling_check(initial, grid, params, eps, T, factor=2.0):
    """Compare a direct run with Hardy constant K against the K = 1 run
    mapped back, relative to the discretization error found by one
    refinement of the direct run."""
    u0 = make_field(initial, grid, params, eps)
    direct = evolve(u0, T)[-1]
    _, v0, lam = rescale_hardy(params, u0)
    undone = undo_hardy(lam, evolve(v0, lam * T), params)[-1]
    fine = evolve(make_field(initial, grid.refined(), params, eps), T)[-1]
    N = params.N
    err = relative_l1(undone.u, direct.u, grid, N)
    discretization = relative_l1(direct.u, restrict(fine), grid, N)
    return {'lambda': lam, 'relative_L1': err,
            'discretization_L1': discretization,
            'ok': err <= factor * discretization}


# --------------------- the friendly giant -----------------------------------
@dataclass(frozen=True, eq=False)
class FriendlyGiant:
    profile: object
    tau: float = 0.0

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError(f"tau must be nonnegative, got {self.tau}")

    def shifted(self, tau):
        return replace(self, tau=tau)


def giant_eval(giant, r, t):
    """U(r, t + tau) = f(r (t + tau)^-1/2)."""
    if not t + giant.tau > 0:
        raise ValueError("t + tau must be positive")
    scalar = np.ndim(r) == 0
    xi = np.atleast_1d(np.asarray(r, dtype=float)) / np.sqrt(t + giant.tau)
    out = giant.profile.evaluate(xi)
    return float(out[0]) if scalar else out


def _support_radius(field):
    positive = np.flatnonzero(field.u > 0)
    if not len(positive):
        return 0.0
    return float(field.grid.faces[positive[-1] + 1])


def find_tau(giant, u0, margin=TAU_MARGIN):
    """Shift tau with u0 <= U(., tau) on the grid of u0."""
    top = float(u0.u.max())
    if top == 0:
        return margin
    profile = giant.profile
    above = np.flatnonzero(profile.positive & (profile.f > top) &
                           (profile.xi > 0))
    if not len(above) or above[0] != np.flatnonzero(profile.xi > 0)[0]:
        raise NoDominatingRadius(
            f"max(u0)={top:.6g} exceeds f at the smallest resolved xi; "
            "refine the profile toward the origin")
    R0 = float(profile.xi[above[-1]])
    R = _support_radius(u0)
    for _ in range(TAU_RETRIES):
        tau = (R / R0) ** 2 * (1 + margin)
        if np.all(u0.u <= giant_eval(giant.shifted(tau), u0.r, 0.0)):
            logger.info("tau=%.6g from R=%.4g, R0=%.4g", tau, R, R0)
            return tau
        margin *= 2
    raise NoDominatingRadius(f"No domination after {TAU_RETRIES} margin "
                             "doublings")


def check_supersolution_bound(snapshots, giant, tol_ord=TOL_ORD_FLOOR):
    violations = []
    worst = 0.0
    for s in snapshots:
        U = giant_eval(giant, s.r, s.t)
        excess = s.u - U * (1 + tol_ord) - tol_ord
        worst = max(worst, float(excess.max()))
        for i in np.flatnonzero(excess > 0):
            violations.append({'t': s.t, 'r': float(s.r[i]),
                               'u': float(s.u[i]), 'U': float(U[i])})
    return {'tau': giant.tau, 'tol_ord': tol_ord, 'max_excess': worst,
            'violations': violations, 'ok': not violations}


# --------------------- comparisons in eps -----------------------------------
def restrict(fine):
    """Cell averages of a field on a grid refined by two, mapped back onto
    the coarse grid."""
    vol = fine.grid.volumes(fine.params.N)
    return (vol * fine.u).reshape(-1, 2).sum(axis=1) / \
        vol.reshape(-1, 2).sum(axis=1)


def relative_l1(u, reference, grid, N):
    vol = grid.volumes(N)
    return float(np.sum(vol * np.abs(u - reference)) /
                 np.sum(vol * np.abs(reference)))


@_validate_params
def calibrate_tol_ord(initial, grid, params, eps, T):
    """ORDER_SAFETY times the coarse/fine discrepancy at T, which scales
    like the first-order error constant times dr."""
    coarse = evolve(make_field(initial, grid, params, eps), T)[-1]
    fine = evolve(make_field(initial, grid.refined(), params, eps), T)[-1]
    err = float(np.max(np.abs(coarse.u - restrict(fine))))
    tol = max(ORDER_SAFETY * err, TOL_ORD_FLOOR)
    logger.info("tol_ord=%.3e calibrated at dr=%.3e", tol, grid.dr)
    return tol


@_validate_params
def check_eps_monotonicity(initial, eps_list, T, grid, params, times=None,
                           tol_ord=None):
    eps_list = [float(e) for e in eps_list]
    if any(b < a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError(f"eps_list must be increasing, got {eps_list}")
    if tol_ord is None:
        tol_ord = calibrate_tol_ord(initial, grid, params, min(eps_list), T)
    runs = {eps: evolve(make_field(initial, grid, params, eps), T, times)
            for eps in eps_list}
    violations = []
    for small, large in zip(eps_list, eps_list[1:]):
        for a, b in zip(runs[small], runs[large]):
            gap = a.u - b.u
            for i in np.flatnonzero(gap < -tol_ord):
                violations.append({'eps': [small, large], 't': a.t,
                                   'r': float(a.r[i]), 'gap': float(gap[i])})
    return {'eps': eps_list, 'tol_ord': tol_ord, 'violations': violations,
            'ok': not violations}, runs


# --------------------- very weak formulation --------------------------------
@dataclass(frozen=True)
class RadialTestFunction:
    """phi(r, t) = cos(omega t) (1 - ((r - center)/radius)^2)^4 on
    |r - center| < radius."""
    radius: float
    center: float = 0.0
    omega: float = 0.0

    def _d(self, r):
        d = (np.asarray(r, dtype=float) - self.center) / self.radius
        return d, np.abs(d) < 1

    def space(self, r):
        d, inside = self._d(r)
        return np.where(inside, (1 - d * d) ** 4, 0.0)

    def laplacian(self, r, N):
        r = np.asarray(r, dtype=float)
        d, inside = self._d(r)
        s, rho = d * d, self.radius
        dpsi = -8 * d / rho * (1 - s) ** 3
        d2psi = (-8 * (1 - s) ** 3 + 48 * s * (1 - s) ** 2) / rho ** 2
        return np.where(inside, d2psi + (N - 1) / r * dpsi, 0.0)

    def time(self, t):
        return np.cos(self.omega * t)

    def dtime(self, t):
        return -self.omega * np.sin(self.omega * t)


def weak_residual(snapshots, test_fn, t1, t2, eps=None):
    """Normalized residual of the very weak formulation on [t1, t2]."""
    g = snapshots[0].grid
    params = snapshots[0].params
    N = params.N
    eps = snapshots[0].eps if eps is None else eps
    lo, hi = test_fn.center - test_fn.radius, test_fn.center + test_fn.radius
    if hi > g.R_max - g.dr or (test_fn.center > 0 and lo < g.r_min) or \
            (test_fn.center == 0 and g.r_min > 0):
        raise SupportViolation("The test function support must stay inside "
                               f"({g.r_min}, {g.R_max})")
    window = [s for s in snapshots if t1 - 1e-12 <= s.t <= t2 + 1e-12]
    if len(window) < 2 or abs(window[0].t - t1) > 1e-12 or \
            abs(window[-1].t - t2) > 1e-12:
        raise SupportViolation("Snapshots must be taken at t1 and t2")

    r, vol = g.centers, g.volumes(N) * sphere_area(N)
    psi, lap = test_fn.space(r), test_fn.laplacian(r, N)
    potential = params.K_hardy * (r + eps) ** -2
    ts = np.array([s.t for s in window])

    def space_integral(values):
        return np.array([np.sum(vol * v) for v in values])

    u_phi_t = space_integral(s.u * psi * test_fn.dtime(s.t) for s in window)
    um_lap = space_integral(s.u ** params.m * lap * test_fn.time(s.t)
                            for s in window)
    source = space_integral(potential * s.u ** params.p * psi *
                            test_fn.time(s.t) for s in window)
    terms = np.array([trapezoid(u_phi_t, ts), trapezoid(um_lap, ts),
                      trapezoid(source, ts),
                      np.sum(vol * window[0].u * psi) * test_fn.time(t1),
                      -np.sum(vol * window[-1].u * psi) * test_fn.time(t2)])
    scale = np.max(np.abs(terms))
    if scale == 0:
        return 0.0
    return float(abs(terms.sum()) / scale)


@_validate_params
def weak_residual_refinement(initial, grid, params, eps, T, test_fn,
                             n_times=21, levels=3):
    """Weak residuals on [0, T] while halving dr and the snapshot spacing
    together, with the observed order between consecutive levels."""
    residuals, drs = [], []
    for level in range(levels):
        g = RadialGrid(grid.r_min, grid.R_max, grid.n * 2 ** level)
        times = np.linspace(0.0, T, (n_times - 1) * 2 ** level + 1)
        runs = evolve(make_field(initial, g, params, eps), T, times)
        residuals.append(weak_residual(runs, test_fn, 0.0, T))
        drs.append(g.dr)
    orders = [float(np.log2(a / b)) if a > 0 and b > 0 else np.nan
              for a, b in zip(residuals, residuals[1:])]
    return {'dr': drs, 'residuals': residuals, 'orders': orders}


# --------------------- self-similar data ------------------------------------
@_validate_params
def self_similarity_track(giant, eps, T, grid, params, times=None,
                          delta=DELTA):
    """Evolve U(., 1) on a grid starting at r_min > 0, with the giant as
    inner boundary value, and compare with U(., 1 + t)."""
    if not grid.r_min > 0:
        raise DomainError("The tracking grid must start at r_min > 0")
    base = giant.shifted(1.0)

    def inner(t):
        return giant_eval(base, grid.r_min, t)

    start = make_field(lambda r: giant_eval(base, r, 0.0), grid, params,
                       eps, inner=inner)
    snapshots = evolve(start, T, times)
    vol = grid.volumes(params.N)
    keep = grid.centers >= delta
    rows = []
    for s in snapshots:
        U = giant_eval(base, s.r, s.t)
        norm = np.sum(vol[keep] * U[keep])
        rows.append({'t': s.t, 'deviation': float(
            np.sum(vol[keep] * np.abs(s.u[keep] - U[keep])) / norm)})
    return pd.DataFrame(rows), snapshots

# ----------------------------------------------------------------------------
# Copyright (c) 2024, hardy-ss development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

"""Parameters, profiles and the changes of variables between profile space,
the phase space (X, Y, Z) and the chart (y, z, w) at infinity."""

from dataclasses import dataclass, field
import enum

import numpy as np
import pandas as pd
from scipy.interpolate import PchipInterpolator

from ._util import _validate_params, OutOfRange, DomainError

# self-similarity exponents, u(x, t) = t^ALPHA f(|x| t^-BETA)
ALPHA = 0.0
BETA = 0.5


class Edge(enum.Enum):
    UNBOUNDED = 'unbounded'


@dataclass(frozen=True)
class Params:
    m: float
    p: float
    N: int
    K_hardy: float = 1.0

    def __post_init__(self):
        if not self.m > 1:
            raise OutOfRange(f"The diffusion exponent m must exceed 1, got "
                             f"m={self.m}")
        if not 1 <= self.p < self.m:
            raise OutOfRange("The reaction exponent must satisfy 1 <= p < m, "
                             f"got p={self.p}, m={self.m}")
        if int(self.N) != self.N or self.N < 3:
            raise OutOfRange("The dimension N must be an integer >= 3, got "
                             f"N={self.N}")
        if not self.K_hardy > 0:
            raise OutOfRange("The Hardy constant must be positive, got "
                             f"K_hardy={self.K_hardy}")
        object.__setattr__(self, 'N', int(self.N))

    alpha = ALPHA
    beta = BETA

    @property
    def L(self):
        return 2 * (self.p - self.m)

    @property
    def c_log(self):
        """Slope (m-p)/(m(N-2)) of the logarithmic branch at the origin."""
        return (self.m - self.p) / (self.m * (self.N - 2))

    def to_dict(self):
        return {'m': self.m, 'p': self.p, 'N': self.N,
                'K_hardy': self.K_hardy}


def validate(m, p, N, K_hardy=1.0):
    return Params(m=float(m), p=float(p), N=N, K_hardy=float(K_hardy))


@dataclass(frozen=True)
class PhaseState:
    X: float
    Y: float
    Z: float
    eta: float = 0.0

    def __post_init__(self):
        if self.X < 0 or self.Z < 0:
            raise DomainError("X and Z must be nonnegative, got "
                              f"X={self.X}, Z={self.Z}")

    def as_array(self):
        return np.array([self.X, self.Y, self.Z])


@dataclass(frozen=True)
class ChartState:
    y: float
    z: float
    w: float

    def __post_init__(self):
        if self.z < 0 or self.w < 0:
            raise DomainError("z and w must be nonnegative, got "
                              f"z={self.z}, w={self.w}")

    def as_array(self):
        return np.array([self.y, self.z, self.w])


@dataclass(frozen=True, eq=False)
class SelfSimilarProfile:
    xi: np.ndarray
    f: np.ndarray
    xi0: object
    K_const: float
    params: Params = None
    _interp: object = field(default=None, init=False, repr=False)

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        f = np.asarray(self.f, dtype=float)
        if xi.ndim != 1 or xi.shape != f.shape or len(xi) < 2:
            raise ValueError("xi and f must be 1-d arrays of equal length "
                             "with at least two samples")
        if np.any(xi < 0) or np.any(np.diff(xi) <= 0):
            raise ValueError("xi must be nonnegative and strictly "
                             "increasing")
        if np.any(f < 0) or np.any(~np.isfinite(f)):
            raise ValueError("The profile contains negative or non-finite "
                             "values")
        if self.xi0 is not Edge.UNBOUNDED:
            if not self.xi0 > 0:
                raise ValueError(f"Support edge must be positive, got "
                                 f"{self.xi0}")
            if np.any(f[xi >= self.xi0] > 0):
                raise ValueError("The profile is positive beyond its "
                                 "support edge")
        object.__setattr__(self, 'xi', xi)
        object.__setattr__(self, 'f', f)

    @property
    def is_compact(self):
        return self.xi0 is not Edge.UNBOUNDED

    @property
    def positive(self):
        return self.f > 0

    def to_frame(self):
        return pd.DataFrame({'xi': self.xi, 'f': self.f})

    def evaluate(self, xi):
        """Monotone interpolation in log(xi); the logarithmic branch is
        continued below the first sample and zero is returned beyond the
        support edge."""
        xi = np.asarray(xi, dtype=float)
        pos = self.positive & (self.xi > 0)
        xs, fs = self.xi[pos], self.f[pos]
        if self._interp is None:
            object.__setattr__(self, '_interp',
                               PchipInterpolator(np.log(xs), fs,
                                                 extrapolate=False))
        out = np.zeros_like(xi)
        inside = (xi >= xs[0]) & (xi <= xs[-1])
        out[inside] = self._interp(np.log(xi[inside]))
        below = (xi > 0) & (xi < xs[0])
        if np.any(below):
            if self.params is None:
                out[below] = fs[0]
            else:
                q = self.params.m - self.params.p
                base = fs[0] ** q - self.params.c_log * np.log(
                    xi[below] / xs[0])
                out[below] = base ** (1.0 / q)
        out[xi == 0] = np.inf
        if not self.is_compact:
            out[xi > xs[-1]] = fs[-1]
        return np.maximum(out, 0.0)


def _check_profile_point(xi, f):
    if not xi > 0:
        raise DomainError(f"xi must be positive, got xi={xi}")
    if not f > 0:
        raise DomainError(f"f must be positive, got f={f}")


@_validate_params
def profile_to_phase(params, xi, f, fprime, eta=0.0):
    _check_profile_point(xi, f)
    m, p = params.m, params.p
    X = m * xi ** -2 * f ** (m - 1)
    Y = m / xi * f ** (m - 2) * fprime
    Z = xi ** -2 * f ** (p - 1)
    return PhaseState(X, Y, Z, eta)


@_validate_params
def profile_to_phase_array(params, xi, f, fprime):
    xi, f, fprime = (np.asarray(a, dtype=float) for a in (xi, f, fprime))
    if np.any(xi <= 0) or np.any(f <= 0):
        raise DomainError("xi and f must be positive on every sample")
    m, p = params.m, params.p
    X = m * xi ** -2 * f ** (m - 1)
    Y = m / xi * f ** (m - 2) * fprime
    Z = xi ** -2 * f ** (p - 1)
    return X, Y, Z


@_validate_params
def phase_to_profile(params, xi, state):
    if not xi > 0:
        raise DomainError(f"xi must be positive, got xi={xi}")
    if not state.X > 0:
        raise DomainError("The profile is only defined where X > 0")
    m = params.m
    f = (state.X * xi ** 2 / m) ** (1.0 / (m - 1))
    fprime = state.Y * xi * f ** (2 - m) / m
    return f, fprime


def phase_to_chart(state):
    if not state.X > 0:
        raise DomainError(f"The chart at infinity needs X > 0, got "
                          f"X={state.X}")
    return ChartState(state.Y / state.X, state.Z / state.X, 1.0 / state.X)


def chart_to_phase(state, eta=0.0):
    if not state.w > 0:
        raise DomainError(f"Only points with w > 0 map back to the finite "
                          f"phase space, got w={state.w}")
    return PhaseState(1.0 / state.w, state.y / state.w, state.z / state.w,
                      eta)

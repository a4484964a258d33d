"""Holling-Tanner predator-prey model with a strong Allee effect on the prey.

Two parameterizations are provided. The dimensional system in (x, y, t) is
singular on x = 0; the desingularized system in (u, v, tau) is polynomial and
is the representation every analysis in this package works with::

    du/dtau = u^2 ((u + A)(1 - u)(u - M) - Q v)
    dv/dtau = S (u + A)(u - v) v

The two are linked by x = K u, y = n K v and r K dt = u (u + A) dtau, with
A = a/K, M = m/K, Q = n q/(r K), S = s/(r K).
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import NamedTuple

import numpy as np


class ParameterError(ValueError):
    """Raised when a parameter set violates the strong-Allee model domain."""


class State(NamedTuple):
    """Point of the desingularized phase plane."""

    u: float
    v: float


@dataclass(frozen=True)
class DimensionalParams:
    """Parameters of the original (dimensional) system.

    Attributes:
        r: prey intrinsic growth rate.
        s: predator intrinsic growth rate.
        K: prey carrying capacity.
        q: maximum per-capita predation rate.
        n: quality of the prey as food for the predator.
        a: half-saturation constant of the Holling type II response.
        m: Allee threshold; m > 0 is the strong Allee effect.
    """

    r: float
    s: float
    K: float
    q: float
    n: float
    a: float
    m: float

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not np.isfinite(value) or value <= 0:
                raise ParameterError(f"{f.name} must be a positive finite number, got {value!r}")
        if self.a >= self.K:
            raise ParameterError(f"a < K is required, got a={self.a!r}, K={self.K!r}")
        if self.m >= self.K:
            raise ParameterError(f"0 < m < K is required, got m={self.m!r}, K={self.K!r}")


@dataclass(frozen=True)
class NondimParams:
    """Parameters (A, M, Q, S) of the desingularized system.

    ``A`` and ``M`` must lie strictly inside (0, 1); ``Q`` and ``S`` must be
    strictly positive. There is no epsilon slack on any of the bounds.
    """

    A: float
    M: float
    Q: float
    S: float

    def __post_init__(self) -> None:
        for name in ("A", "M", "Q", "S"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
        if not 0.0 < self.A < 1.0:
            raise ParameterError(f"A must lie in (0, 1), got {self.A!r}")
        if not 0.0 < self.M < 1.0:
            raise ParameterError(f"M must lie in (0, 1) (strong Allee effect), got {self.M!r}")
        if self.Q <= 0.0:
            raise ParameterError(f"Q must be positive, got {self.Q!r}")
        if self.S <= 0.0:
            raise ParameterError(f"S must be positive, got {self.S!r}")

    def with_(self, **changes: float) -> "NondimParams":
        return replace(self, **changes)

    def as_dict(self) -> dict[str, float]:
        return {"A": self.A, "M": self.M, "Q": self.Q, "S": self.S}


def nondimensionalize(p: DimensionalParams) -> NondimParams:
    """Map dimensional parameters to (A, M, Q, S)."""
    return NondimParams(
        A=p.a / p.K,
        M=p.m / p.K,
        Q=p.n * p.q / (p.r * p.K),
        S=p.s / (p.r * p.K),
    )


def g(p: NondimParams, u):
    """Prey growth factor (u + A)(1 - u)(u - M)."""
    return (u + p.A) * (1.0 - u) * (u - p.M)


def g_prime(p: NondimParams, u):
    return (1.0 - u) * (u - p.M) + (u + p.A) * (1.0 - u) - (u + p.A) * (u - p.M)


def g_second(p: NondimParams, u):
    return -6.0 * u + 2.0 * (1.0 + p.M - p.A)


def vector_field(p: NondimParams, u, v):
    """Right-hand side of the desingularized system; accepts scalars or arrays."""
    du = u * u * (g(p, u) - p.Q * v)
    dv = p.S * (u + p.A) * (u - v) * v
    return du, dv


def jacobian(p: NondimParams, u: float, v: float) -> np.ndarray:
    gu = g(p, u)
    gpu = g_prime(p, u)
    return np.array(
        [
            [u * (u * gpu + 2.0 * (gu - p.Q * v)), -p.Q * u * u],
            [p.S * v * (p.A + 2.0 * u - v), p.S * (u - 2.0 * v) * (p.A + u)],
        ]
    )


def dimensional_vector_field(p: DimensionalParams, x, y):
    """Right-hand side of the original system; defined only for x > 0."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0):
        raise ParameterError("the dimensional field is singular on x <= 0")
    dx = p.r * x * (1.0 - x / p.K) * (x - p.m) - p.q * x * y / (x + p.a)
    dy = p.s * y * (1.0 - y / (p.n * x))
    return dx, dy


def to_nondim_state(p: DimensionalParams, x, y) -> tuple:
    return x / p.K, y / (p.n * p.K)


def to_dim_state(p: DimensionalParams, u, v) -> tuple:
    return p.K * u, p.n * p.K * v


def time_factor(p: DimensionalParams, u):
    """dtau/dt = r K / (u (u + A)); positive for u > 0."""
    return p.r * p.K / (u * (u + p.a / p.K))


def pushforward(p: DimensionalParams, u, v):
    """Desingularized field expressed in dimensional coordinates and time.

    Equals ``dimensional_vector_field`` at (K u, n K v) for u > 0.
    """
    q = nondimensionalize(p)
    du, dv = vector_field(q, u, v)
    factor = time_factor(p, u)
    return p.K * du * factor, p.n * p.K * dv * factor

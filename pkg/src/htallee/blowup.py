"""Directional blow-up of the degenerate origin.

The chart (u, v) = (x y, y) with the time rescaling dt = y dtau maps the
first quadrant minus the u-axis onto y > 0 and expands the origin into the
whole x-axis. On that axis the blown-up field has two equilibria, a saddle at
x = 0 and an attracting node at x = mu = S/(S + M), which is why orbits of the
original system reach the origin tangentially to v = u/mu.

Only this (y-direction) chart is provided.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import NondimParams


class BlowupState(NamedTuple):
    x: float
    y: float


def blowup_field(p: NondimParams, x, y):
    A, M, Q, S = p.A, p.M, p.Q, p.S
    xy = x * y
    dx = x * (S * (1.0 - x) * (A + xy) + x * (M - xy) * (xy - 1.0) * (A + xy) - Q * xy)
    dy = S * (x - 1.0) * (xy + A) * y
    return dx, dy


def to_chart(u, v):
    """(u, v) -> (u/v, v); undefined on v = 0."""
    v_arr = np.asarray(v, dtype=float)
    if np.any(v_arr == 0):
        raise ValueError("the blow-up chart is undefined on v = 0")
    return u / v, v


def from_chart(x, y):
    return x * y, y


def mu(p: NondimParams) -> float:
    return p.S / (p.S + p.M)


@dataclass(frozen=True)
class BlowupEquilibrium:
    location: BlowupState
    classification: str
    eigenvalues: tuple[float, float]
    eigenvectors: tuple[np.ndarray, np.ndarray]
    jacobian: np.ndarray


def blowup_jacobian_at_mu(p: NondimParams) -> np.ndarray:
    A, M, Q, S = p.A, p.M, p.Q, p.S
    j12 = S * S * (A * S * (1.0 + M) - Q * (M + S)) / (M + S) ** 3
    return np.array([[-A * S, j12], [0.0, -A * M * S / (M + S)]])


def blowup_equilibria(p: NondimParams) -> tuple[BlowupEquilibrium, BlowupEquilibrium]:
    """Closed-form data for the saddle (0, 0) and the node (mu, 0).

    At (0, 0) the unstable direction is the x-axis and the stable one the
    y-axis.
    At (mu, 0) the eigenvalue -A S belongs to the x-axis direction (1, 0) and
    -A M S/(M + S) to ((A S (1 + M) - Q (M + S)) / (A (M + S)^2), 1), which is
    the branch entering the half-plane y > 0.
    """
    A, M, Q, S = p.A, p.M, p.Q, p.S
    saddle = BlowupEquilibrium(
        location=BlowupState(0.0, 0.0),
        classification="saddle",
        eigenvalues=(A * S, -A * S),
        # AS along the x-axis, -AS along the y-axis
        eigenvectors=(np.array([1.0, 0.0]), np.array([0.0, 1.0])),
        jacobian=np.array([[A * S, 0.0], [0.0, -A * S]]),
    )
    off_axis = np.array([(A * S * (1.0 + M) - Q * (M + S)) / (A * (M + S) ** 2), 1.0])
    node = BlowupEquilibrium(
        location=BlowupState(mu(p), 0.0),
        classification="attractor",
        eigenvalues=(-A * S, -A * M * S / (M + S)),
        eigenvectors=(np.array([1.0, 0.0]), off_axis),
        jacobian=blowup_jacobian_at_mu(p),
    )
    return saddle, node

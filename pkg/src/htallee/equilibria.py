"""Equilibria of the desingularized system and their classification.

Interior equilibria lie on the diagonal v = u at the positive roots of

    d(u) = u^3 - (M + 1 - A) u^2 - (A (M + 1) - Q - M) u + A M.

The cubic always has one negative root -H, and factoring out (u + H) leaves
u^2 - (H + M + 1 - A) u + A M / H, whose discriminant decides how many
interior equilibria exist. Classifications come from the closed-form trace and
determinant at each point rather than from a generic eigensolver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .model import NondimParams, State, g_prime

DOUBLE_ROOT_TOL = 1e-9

# equilibrium kinds
ORIGIN = "origin"
BOUNDARY_M = "boundary-M"
BOUNDARY_1 = "boundary-1"
P1 = "P1"
P2 = "P2"
E_DOUBLE = "E-double"

# classifications
NON_HYPERBOLIC_ATTRACTOR = "non-hyperbolic attractor"
HYPERBOLIC_REPELLER = "hyperbolic repeller"
SADDLE = "saddle"
ATTRACTOR = "attractor"
REPELLER = "repeller"
SADDLE_NODE_ATTRACTOR = "saddle-node attractor"
SADDLE_NODE_REPELLER = "saddle-node repeller"
CUSP_CANDIDATE = "cusp-candidate"


class NoInteriorEquilibriumError(ValueError):
    """Raised when an operation needs P1/P2 but the discriminant is not positive."""


def cubic(A: float, M: float, Q: float, u):
    return u**3 - (M + 1.0 - A) * u**2 - (A * (M + 1.0) - Q - M) * u + A * M


def cubic_prime(A: float, M: float, Q: float, u):
    return 3.0 * u**2 - 2.0 * (M + 1.0 - A) * u - (A * (M + 1.0) - Q - M)


def _newton_polish(A, M, Q, u, iters=4):
    for _ in range(iters):
        d = cubic(A, M, Q, u)
        dp = cubic_prime(A, M, Q, u)
        if dp == 0.0:
            break
        step = d / dp
        u_new = u - step
        if abs(cubic(A, M, Q, u_new)) > abs(d):
            break
        u = u_new
        if abs(step) <= 1e-17 * max(1.0, abs(u)):
            break
    return u


@dataclass(frozen=True)
class CubicStructure:
    """Root structure of the interior-equilibrium cubic for fixed (A, M, Q).

    ``u1``/``u2`` are ``None`` when ``delta`` is below ``-DOUBLE_ROOT_TOL``.
    Inside the double-root band both equal ``E``.
    """

    A: float
    M: float
    Q: float
    H: float
    delta: float
    u1: Optional[float]
    u2: Optional[float]
    E: float

    @property
    def has_two_interior(self) -> bool:
        return self.delta >= DOUBLE_ROOT_TOL

    @property
    def is_double(self) -> bool:
        return abs(self.delta) < DOUBLE_ROOT_TOL

    @property
    def has_no_interior(self) -> bool:
        return self.delta <= -DOUBLE_ROOT_TOL


def cubic_structure(A: float, M: float, Q: float) -> CubicStructure:
    """Compute H, the discriminant and the interior roots for (A, M, Q)."""
    # d(-A) = -Q A < 0 and d(0) = A M > 0 bracket the negative root
    root = brentq(lambda u: cubic(A, M, Q, u), -A, 0.0, xtol=1e-300, rtol=8.9e-16, maxiter=200)
    root = _newton_polish(A, M, Q, root)
    H = -root
    B = H + M + 1.0 - A
    delta = B * B - 4.0 * A * M / H
    E = 0.5 * B
    if delta >= DOUBLE_ROOT_TOL:
        u2 = 0.5 * (B + math.sqrt(delta))
        u1 = (A * M / H) / u2
        u1 = _newton_polish(A, M, Q, u1)
        u2 = _newton_polish(A, M, Q, u2)
    elif delta > -DOUBLE_ROOT_TOL:
        u1 = u2 = E
    else:
        u1 = u2 = None
    return CubicStructure(A=A, M=M, Q=Q, H=H, delta=delta, u1=u1, u2=u2, E=E)


def solve_cubic_structure(p: NondimParams) -> CubicStructure:
    return cubic_structure(p.A, p.M, p.Q)


def f_trace(p: NondimParams, u):
    """u g'(u) / (A + u); the trace at an interior point is u (u + A)(f(u) - S)."""
    return u * g_prime(p, u) / (p.A + u)


def f_at_double_root(cs: CubicStructure) -> float:
    B = cs.H + cs.M + 1.0 - cs.A
    return cs.Q * B / (B + 2.0 * cs.A)


def hopf_threshold(p: NondimParams, cs: Optional[CubicStructure] = None) -> float:
    """Return S* = f(u2); inside the double-root band this is f(E).

    The value may be negative, in which case P2 attracts for every S > 0.
    """
    cs = cs or solve_cubic_structure(p)
    if cs.has_two_interior:
        return float(f_trace(p, cs.u2))
    if cs.is_double:
        return f_at_double_root(cs)
    raise NoInteriorEquilibriumError(f"no P2: discriminant {cs.delta:.3e} < 0")


def interior_trace(p: NondimParams, u: float) -> float:
    return u * (u + p.A) * (f_trace(p, u) - p.S)


def interior_det(p: NondimParams, u: float, cs: CubicStructure) -> float:
    """Closed-form determinant S u^3 (A + u)(H + u)(2u - H - M - 1 + A)."""
    return p.S * u**3 * (p.A + u) * (cs.H + u) * (2.0 * u - cs.H - cs.M - 1.0 + cs.A)


def interior_jacobian(p: NondimParams, u: float) -> np.ndarray:
    """Jacobian at an interior equilibrium (u, u), using g(u) = Q u."""
    c = p.S * u * (p.A + u)
    return np.array([[u * u * g_prime(p, u), -p.Q * u * u], [c, -c]])


@dataclass(frozen=True)
class Equilibrium:
    location: State
    kind: str
    classification: str
    eigenvalues: Optional[tuple[complex, complex]]
    eigenvectors: Optional[tuple[np.ndarray, np.ndarray]]

    def as_dict(self) -> dict:
        def cplx(z):
            z = complex(z)
            return [z.real, z.imag]

        return {
            "kind": self.kind,
            "u": float(self.location.u),
            "v": float(self.location.v),
            "classification": self.classification,
            "eigenvalues": None if self.eigenvalues is None else [cplx(z) for z in self.eigenvalues],
            "eigenvectors": None
            if self.eigenvectors is None
            else [[cplx(c) for c in vec] for vec in self.eigenvectors],
        }


@dataclass(frozen=True)
class EquilibriumReport:
    params: NondimParams
    structure: CubicStructure
    equilibria: tuple[Equilibrium, ...]

    def get(self, kind: str) -> Optional[Equilibrium]:
        for eq in self.equilibria:
            if eq.kind == kind:
                return eq
        return None

    @property
    def interior_count(self) -> int:
        return sum(eq.kind in (P1, P2, E_DOUBLE) for eq in self.equilibria)


def _interior_eigen(p: NondimParams, u: float, tr: float, det: float):
    disc = complex(tr * tr - 4.0 * det)
    root = np.sqrt(disc)
    lam = ((tr + root) / 2.0, (tr - root) / 2.0)
    c = p.S * u * (p.A + u)
    vecs = tuple(np.array([1.0 + l / c, 1.0]) for l in lam)
    return lam, vecs


def p1_eigen_data(p: NondimParams, cs: Optional[CubicStructure] = None):
    """Eigenvalues and eigenvectors of the saddle P1.

    Returns ``(lam_u, lam_s, psi_u, psi_s)`` with ``lam_u > 0 > lam_s`` and
    eigenvectors normalised to unit predator component, psi = (1 + lam/c, 1)
    with c = S u1 (A + u1).
    """
    cs = cs or solve_cubic_structure(p)
    if not cs.has_two_interior:
        raise NoInteriorEquilibriumError(f"no saddle P1: discriminant {cs.delta:.3e}")
    u = cs.u1
    fu = f_trace(p, u)
    S = p.S
    # discriminant of the characteristic polynomial divided by u^2
    disc = (p.A + u) * ((p.A + u) * (fu * fu + S * S) + 2.0 * S * fu * (p.A + u) - 4.0 * S * u * p.Q)
    half = 0.5 * u * (p.A + u)
    root = math.sqrt(disc) / (p.A + u)
    lam_u = half * (fu - S + root)
    lam_s = half * (fu - S - root)
    c = S * u * (p.A + u)
    psi_u = np.array([1.0 + lam_u / c, 1.0])
    psi_s = np.array([1.0 + lam_s / c, 1.0])
    return lam_u, lam_s, psi_u, psi_s


def classify_all(p: NondimParams, cs: Optional[CubicStructure] = None) -> EquilibriumReport:
    cs = cs or solve_cubic_structure(p)
    A, M, Q, S = p.A, p.M, p.Q, p.S
    out = [Equilibrium(State(0.0, 0.0), ORIGIN, NON_HYPERBOLIC_ATTRACTOR, None, None)]

    lam_m = (M * M * (1.0 - M) * (A + M), M * S * (A + M))
    denom = (M * (1.0 - M) - S) * (A + M)
    second = np.array([M * Q / denom, 1.0]) if denom != 0.0 else np.array([1.0, 0.0])
    out.append(
        Equilibrium(State(M, 0.0), BOUNDARY_M, HYPERBOLIC_REPELLER, lam_m, (np.array([1.0, 0.0]), second))
    )

    lam_1 = (-(1.0 - M) * (A + 1.0), S * (A + 1.0))
    vec_1 = np.array([-Q / ((1.0 - M + S) * (A + 1.0)), 1.0])
    out.append(Equilibrium(State(1.0, 0.0), BOUNDARY_1, SADDLE, lam_1, (np.array([1.0, 0.0]), vec_1)))

    if cs.has_two_interior:
        lam_u, lam_s, psi_u, psi_s = p1_eigen_data(p, cs)
        det1 = interior_det(p, cs.u1, cs)
        cls1 = SADDLE if det1 < 0 else CUSP_CANDIDATE
        out.append(Equilibrium(State(cs.u1, cs.u1), P1, cls1, (lam_u, lam_s), (psi_u, psi_s)))

        u2 = cs.u2
        tr = interior_trace(p, u2)
        det2 = interior_det(p, u2, cs)
        lam, vecs = _interior_eigen(p, u2, tr, det2)
        # S = S* exactly is grouped with the unstable side
        cls2 = ATTRACTOR if tr < 0 else REPELLER
        out.append(Equilibrium(State(u2, u2), P2, cls2, lam, vecs))
    elif cs.is_double:
        E = cs.E
        tr = E * (E + A) * (f_at_double_root(cs) - S)
        if tr > 0:
            cls = SADDLE_NODE_REPELLER
        elif tr < 0:
            cls = SADDLE_NODE_ATTRACTOR
        else:
            cls = CUSP_CANDIDATE
        c = S * E * (A + E)
        vecs = (np.array([1.0, 1.0]), np.array([1.0 + tr / c, 1.0]))
        out.append(Equilibrium(State(E, E), E_DOUBLE, cls, (0.0, tr), vecs))

    return EquilibriumReport(params=p, structure=cs, equilibria=tuple(out))


def p2_is_attractor(p: NondimParams, cs: Optional[CubicStructure] = None) -> bool:
    cs = cs or solve_cubic_structure(p)
    return cs.has_two_interior and interior_trace(p, cs.u2) < 0

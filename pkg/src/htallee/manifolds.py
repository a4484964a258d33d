"""Invariant manifolds of the saddle P1 and the global connection topology.

Branches are named by the direction in which the flow moves along them near
P1. ``stable-NE`` flows up-right into P1, so it lies on the lower-left side
(seeded at P1 - eps psi_s) and always comes from (M, 0); ``stable-SW`` flows
down-left into P1 from above. ``unstable-NE`` leaves P1 up-right and
``unstable-SW`` leaves down-left, falling into the origin. The reversed-time
fate of ``stable-SW`` is what changes with S:

    i    reaches P2 (P2 repelling)
    ii   accumulates on the unstable limit cycle around P2
    iii  returns to P1 along unstable-NE (homoclinic loop)
    iv   comes from (M, 0)
    v    comes from (1, 0)
    vi   enters through the boundary u = 1 or v = 1 of the unit box
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .equilibria import (
    CubicStructure,
    NoInteriorEquilibriumError,
    hopf_threshold,
    interior_trace,
    p1_eigen_data,
    solve_cubic_structure,
)
from .integrate import (
    DEFAULT_CONFIG,
    STRIP_MARGIN,
    IntegrationConfig,
    RunResult,
    Section,
    Target,
    diagonal_section,
    run,
)
from .model import NondimParams

STABLE_NE = "stable-NE"
STABLE_SW = "stable-SW"
UNSTABLE_NE = "unstable-NE"
UNSTABLE_SW = "unstable-SW"
BRANCHES = (STABLE_NE, STABLE_SW, UNSTABLE_NE, UNSTABLE_SW)

CONNECTION_RADIUS = 1e-3
# slow passages (small M or S) can outlast the generic horizon; steps stay cheap
MANIFOLD_HORIZON = 1e8
MATCH_TOL = 1e-3
BOX_SLACK = 1e-7

CASE_NAMES = {
    "i": "P2-unstable-global-origin",
    "ii": "cycle-separatrix",
    "iii": "homoclinic",
    "iv": "heteroclinic-to-(M,0)-pair",
    "v": "heteroclinic-to-(1,0)",
    "vi": "boundary-exit",
}
CASE_ORDER = ("i", "ii", "iii", "iv", "v", "vi")


class AmbiguousConnectionError(RuntimeError):
    """The traced branch did not settle within the horizon; carries the branch."""

    def __init__(self, message: str, branch: "ManifoldBranch"):
        super().__init__(message)
        self.branch = branch


@dataclass
class ManifoldBranch:
    which: str
    points: np.ndarray
    t: np.ndarray
    termination: str  # equilibrium | boundary | cycle | horizon
    target: Optional[str]
    seed: np.ndarray
    eps: float
    min_distance: dict[str, float] = field(default_factory=dict)
    crossings: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["u", "v"])
            for u, v in self.points:
                w.writerow([repr(float(u)), repr(float(v))])


def _check_which(which: str) -> None:
    if which not in BRANCHES:
        raise ValueError(f"unknown branch {which!r}; expected one of {BRANCHES}")


def seed_point(p: NondimParams, which: str, eps: float, cs: Optional[CubicStructure] = None) -> np.ndarray:
    cs = cs or solve_cubic_structure(p)
    _, _, psi_u, psi_s = p1_eigen_data(p, cs)
    psi = psi_s if which.startswith("stable") else psi_u
    direction = psi / np.linalg.norm(psi)
    # flow direction: stable-NE sits below-left of P1, unstable-NE above-right
    upper = which in (STABLE_SW, UNSTABLE_NE)
    sign = 1.0 if upper else -1.0
    return np.array([cs.u1, cs.u1]) + sign * eps * direction


def trace_branch(
    p: NondimParams,
    which: str,
    eps: float = 1e-6,
    cfg: IntegrationConfig = DEFAULT_CONFIG,
    cs: Optional[CubicStructure] = None,
    *,
    detect_connections: bool = True,
    section: Optional[Section] = None,
    t_max: Optional[float] = None,
) -> ManifoldBranch:
    """Seed at P1 +/- eps psi and follow the branch until it terminates.

    Stable branches run in reversed time and stop at (M, 0), (1, 0), P2 (when
    P2 repels), a cycle, a return to P1, or on crossing u = 1 / v = 1.
    Unstable branches run forward and stop at the origin, P2 or a cycle.
    With ``detect_connections=False`` the (1, 0) and P1 stops are replaced by
    distance tracking only, so the trace always resolves to a generic side.
    """
    _check_which(which)
    if not 1e-8 <= eps <= 1e-4:
        raise ValueError(f"eps must lie in [1e-8, 1e-4], got {eps!r}")
    cs = cs or solve_cubic_structure(p)
    if not cs.has_two_interior:
        raise NoInteriorEquilibriumError(f"no saddle P1: discriminant {cs.delta:.3e}")
    seed = seed_point(p, which, eps, cs)
    u1, u2 = cs.u1, cs.u2
    p2_attracts = interior_trace(p, u2) < 0
    cycle_section = diagonal_section(u2)
    horizon = t_max if t_max is not None else max(cfg.max_time, MANIFOLD_HORIZON)

    if which.startswith("stable"):
        targets = [Target("(M,0)", p.M, 0.0, CONNECTION_RADIUS)]
        conn_r = CONNECTION_RADIUS if detect_connections else 0.0
        match_r = MATCH_TOL if detect_connections else 0.0
        targets.append(Target("(1,0)", 1.0, 0.0, conn_r))
        targets.append(Target("P1", u1, u1, match_r, arm_radius=10.0 * MATCH_TOL))
        if not p2_attracts:
            targets.append(Target("P2", u2, u2, cfg.attractor_radius))
        res = run(
            p, seed, cfg, backward=True, t_max=horizon, targets=targets,
            box=(1.0 + BOX_SLACK, 1.0 + BOX_SLACK),
            section=section or cycle_section, stop_on_cycle=section is None,
        )
    else:
        targets = [Target("origin", 0.0, 0.0, cfg.attractor_radius, inward=True)]
        if p2_attracts:
            targets.append(Target("P2", u2, u2, cfg.attractor_radius))
        targets.append(Target("P1", u1, u1, 0.0, arm_radius=10.0 * MATCH_TOL))
        res = run(
            p, seed, cfg, t_max=horizon, targets=targets, strip_u=p.M - STRIP_MARGIN,
            section=section or cycle_section, stop_on_cycle=section is None,
        )
    return _branch_from(which, res, seed, eps)


def _branch_from(which: str, res: RunResult, seed: np.ndarray, eps: float) -> ManifoldBranch:
    if res.status == "target":
        termination, target = "equilibrium", res.target
    elif res.status == "strip":
        termination, target = "equilibrium", "origin"
    elif res.status == "exit":
        termination, target = "boundary", None
    elif res.status == "cycle":
        termination, target = "cycle", None
    else:
        termination, target = "horizon", None
    return ManifoldBranch(
        which=which,
        points=np.column_stack([res.u, res.v]),
        t=res.t,
        termination=termination,
        target=target,
        seed=seed,
        eps=eps,
        min_distance=res.min_distance,
        crossings=res.crossings,
    )


@dataclass(frozen=True)
class ConnectionTopology:
    case: str
    branch: ManifoldBranch

    @property
    def name(self) -> str:
        return CASE_NAMES[self.case]


def _case_of(branch: ManifoldBranch) -> Optional[str]:
    if branch.termination == "equilibrium":
        return {"P2": "i", "P1": "iii", "(M,0)": "iv", "(1,0)": "v"}.get(branch.target)
    if branch.termination == "cycle":
        return "ii"
    if branch.termination == "boundary":
        return "vi"
    return None


def classify_connection(
    p: NondimParams,
    cfg: IntegrationConfig = DEFAULT_CONFIG,
    cs: Optional[CubicStructure] = None,
    *,
    detect_connections: bool = True,
    eps: float = 1e-6,
) -> ConnectionTopology:
    """Classify the basin boundary by the reversed-time fate of ``stable-SW``.

    Raises :class:`AmbiguousConnectionError` when the branch reaches the
    horizon without settling, which happens only close to a bifurcation value.
    """
    cs = cs or solve_cubic_structure(p)
    branch = trace_branch(p, STABLE_SW, eps, cfg, cs, detect_connections=detect_connections)
    case = _case_of(branch)
    if case is None:
        raise AmbiguousConnectionError(
            f"stable branch unresolved ({branch.termination}) at S={p.S:.6g}", branch
        )
    return ConnectionTopology(case=case, branch=branch)


def homoclinic_gap(
    p: NondimParams, cfg: IntegrationConfig = DEFAULT_CONFIG, cs: Optional[CubicStructure] = None, eps: float = 1e-6
) -> float:
    """Signed split between ``unstable-NE`` and ``stable-SW``.

    Both branches cross the vertical half-line {u = u2, v > u2} above P2; the
    result is v(unstable) - v(stable) at their first crossings, which vanishes
    at a homoclinic connection. NaN if either branch misses the section.
    """
    cs = cs or solve_cubic_structure(p)
    sec = Section(center=(cs.u2, cs.u2), normal=(1.0, 0.0), tangent=(0.0, 1.0))
    wu = trace_branch(p, UNSTABLE_NE, eps, cfg, cs, section=sec)
    ws = trace_branch(p, STABLE_SW, eps, cfg, cs, detect_connections=False, section=sec)
    if len(wu.crossings) == 0 or len(ws.crossings) == 0:
        return float("nan")
    return float(wu.crossings[0, 2] - ws.crossings[0, 2])


@dataclass
class Separatrix:
    kind: str  # cycle | homoclinic | stable-manifold
    case: str
    points: np.ndarray
    closed: bool

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["u", "v"])
            for u, v in self.points:
                w.writerow([repr(float(u)), repr(float(v))])


class NoSeparatrixError(ValueError):
    """P2 does not attract, so the origin attracts all of the unit box."""


def _clip_to_box(points: np.ndarray) -> np.ndarray:
    inside = (points[:, 0] <= 1.0) & (points[:, 1] <= 1.0)
    if inside.all():
        return points
    k = int(np.argmin(inside))
    if k == 0:
        return points[:1]
    a, b = points[k - 1], points[k]
    # entry point on the box edge
    s = 1.0
    for j in range(2):
        if b[j] > 1.0:
            s = min(s, (1.0 - a[j]) / (b[j] - a[j]))
    return np.vstack([points[:k], a + s * (b - a)])


def separatrix(
    p: NondimParams, cfg: IntegrationConfig = DEFAULT_CONFIG, cs: Optional[CubicStructure] = None
) -> Separatrix:
    """Curve separating the basins of P2 and the origin inside the unit box."""
    cs = cs or solve_cubic_structure(p)
    if not cs.has_two_interior:
        raise NoInteriorEquilibriumError(f"no interior equilibria: discriminant {cs.delta:.3e}")
    if p.S <= hopf_threshold(p, cs):
        raise NoSeparatrixError(f"S={p.S:g} <= S*: the origin attracts the whole unit box")
    topo = classify_connection(p, cfg, cs)
    if topo.case == "ii":
        from .basins import extract_unstable_cycle

        cyc = extract_unstable_cycle(p, cfg, cs)
        return Separatrix("cycle", "ii", cyc.points, closed=True)
    if topo.case == "iii":
        loop = np.vstack([topo.branch.points[::-1], [[cs.u1, cs.u1]]])
        return Separatrix("homoclinic", "iii", loop, closed=True)
    lower = trace_branch(p, STABLE_NE, cfg=cfg, cs=cs)
    upper = _clip_to_box(topo.branch.points)
    pts = np.vstack([lower.points[::-1], [[cs.u1, cs.u1]], upper])
    return Separatrix("stable-manifold", topo.case, pts, closed=False)

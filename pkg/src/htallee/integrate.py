"""Adaptive integration, trapping-region checks and fate classification."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from . import _kernel as K
from .equilibria import CubicStructure, interior_trace, solve_cubic_structure
from .model import NondimParams, State

log = logging.getLogger(__name__)

STATUS_NAMES = {
    K.HORIZON: "horizon",
    K.TARGET: "target",
    K.STRIP: "strip",
    K.EXIT: "exit",
    K.CYCLE: "cycle",
    K.UNDERFLOW: "step-underflow",
    K.MAX_STEPS: "max-steps",
    K.ESCAPE: "escape",
}

# u < M - STRIP_MARGIN is inside the forward-invariant strip that drains to the origin
STRIP_MARGIN = 1e-8
ESCAPE_BOUND = 1e3


class IntegrationError(RuntimeError):
    """Numerical failure of the integrator (e.g. step-size underflow)."""


@dataclass(frozen=True)
class IntegrationConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_time: float = 5e4
    attractor_radius: float = 1e-4
    cycle_detection: bool = True
    cycle_tol: float = 1e-5
    cycle_returns: int = 3
    max_steps: int = 2_000_000

    def __post_init__(self) -> None:
        for name in ("rel_tol", "abs_tol"):
            value = getattr(self, name)
            if not 0.0 < value <= 1e-2:
                raise ValueError(f"{name} must lie in (0, 1e-2], got {value!r}")
        if not self.max_time > 0:
            raise ValueError(f"max_time must be positive, got {self.max_time!r}")
        if not 0.0 < self.attractor_radius <= 1e-2:
            raise ValueError(f"attractor_radius must lie in (0, 1e-2], got {self.attractor_radius!r}")
        if self.cycle_returns < 1:
            raise ValueError("cycle_returns must be at least 1")


DEFAULT_CONFIG = IntegrationConfig()


@dataclass(frozen=True)
class Target:
    name: str
    u: float
    v: float
    radius: float
    arm_radius: float = 0.0
    inward: bool = False


@dataclass(frozen=True)
class Section:
    """Half-line {center + s * tangent, s > 0} with normal ``normal``."""

    center: tuple[float, float]
    normal: tuple[float, float]
    tangent: tuple[float, float]

    def as_array(self) -> np.ndarray:
        return np.array([*self.center, *self.normal, *self.tangent, 1.0])


def diagonal_section(u2: float) -> Section:
    """The half-line {v = u, u > u2}, transverse to the flow."""
    return Section(center=(u2, u2), normal=(-1.0, 1.0), tangent=(1.0, 1.0))


_NO_SECTION = np.zeros(7)


@dataclass
class RunResult:
    status: str
    target: Optional[str]
    t_end: float
    state: State
    steps: int
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    crossings: np.ndarray  # rows (t, u, v)
    min_distance: dict[str, float]


def run(
    p: NondimParams,
    s0: Sequence[float],
    cfg: IntegrationConfig = DEFAULT_CONFIG,
    *,
    backward: bool = False,
    t_max: Optional[float] = None,
    targets: Sequence[Target] = (),
    strip_u: float = 0.0,
    box: tuple[float, float] = (math.inf, math.inf),
    section: Optional[Section] = None,
    stop_on_cycle: bool = False,
    cycle_min_amplitude: float = 1e-3,
    record: bool = True,
) -> RunResult:
    """Low-level driver around the compiled integrator.

    Most callers want :func:`integrate` or :func:`classify_fate`; this entry
    point exposes every stopping rule for the manifold and cycle tracers.
    """
    u0, v0 = float(s0[0]), float(s0[1])
    if u0 < 0 or v0 < 0:
        raise ValueError(f"initial state must lie in the closed first quadrant, got {(u0, v0)}")
    table = np.array(
        [[tg.u, tg.v, tg.radius, tg.arm_radius, 1.0 if tg.inward else 0.0] for tg in targets],
        dtype=float,
    ).reshape(-1, 5)
    sec = section.as_array() if section is not None else _NO_SECTION
    out = K.solve(
        u0, v0, p.A, p.M, p.Q, p.S, -1.0 if backward else 1.0,
        float(cfg.max_time if t_max is None else t_max), cfg.rel_tol, cfg.abs_tol, cfg.max_steps,
        table, float(strip_u), float(box[0]), float(box[1]), ESCAPE_BOUND,
        sec, cfg.cycle_tol, cfg.cycle_returns if stop_on_cycle else 0, cycle_min_amplitude,
        record,
    )
    status, hit, t_end, u_end, v_end, nsteps, ts, us, vs, ct, cu, cv, mind = out
    name = STATUS_NAMES[int(status)]
    if name == "step-underflow":
        log.warning("step-size underflow at t=%g, state=(%g, %g)", t_end, u_end, v_end)
    return RunResult(
        status=name,
        target=targets[hit].name if status == K.TARGET else None,
        t_end=float(t_end),
        state=State(float(u_end), float(v_end)),
        steps=int(nsteps),
        t=ts,
        u=us,
        v=vs,
        crossings=np.column_stack([ct, cu, cv]) if len(ct) else np.empty((0, 3)),
        min_distance={tg.name: float(d) for tg, d in zip(targets, mind)},
    )


@dataclass
class Trajectory:
    """Sampled orbit; ``t`` is elapsed time of the integrated (possibly reversed) flow."""

    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    backward: bool = False
    status: str = "horizon"

    @property
    def states(self) -> np.ndarray:
        return np.column_stack([self.u, self.v])

    def __len__(self) -> int:
        return len(self.t)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau", "u", "v"])
            sign = -1.0 if self.backward else 1.0
            for t, u, v in zip(self.t, self.u, self.v):
                w.writerow([repr(float(sign * t)), repr(float(u)), repr(float(v))])


def integrate(
    p: NondimParams,
    s0: Sequence[float],
    cfg: IntegrationConfig = DEFAULT_CONFIG,
    *,
    backward: bool = False,
    t_max: Optional[float] = None,
    raise_on_underflow: bool = False,
) -> Trajectory:
    """Integrate to the horizon and return every accepted step.

    Reversed-time runs stop early if the orbit leaves [0, 1e3]^2 (backward
    orbits can blow up in finite time). Step-size underflow is logged and
    reflected in ``status``; with ``raise_on_underflow`` it raises instead.
    """
    res = run(p, s0, cfg, backward=backward, t_max=t_max)
    if res.status == "step-underflow" and raise_on_underflow:
        raise IntegrationError(f"step-size underflow at t={res.t_end:g}, state={tuple(res.state)}")
    return Trajectory(t=res.t, u=res.u, v=res.v, backward=backward, status=res.status)


class FateLabel(str, Enum):
    TO_ORIGIN = "ToOrigin"
    TO_P2 = "ToP2"
    TO_CYCLE = "ToCycle"
    UNDECIDED = "Undecided"


@dataclass(frozen=True)
class Fate:
    label: FateLabel
    time_to_decision: float
    terminal_state: State
    criterion: str


def fate_rules(p: NondimParams, cfg: IntegrationConfig, cs: Optional[CubicStructure] = None):
    """Targets, strip and section used to classify forward orbits."""
    cs = cs or solve_cubic_structure(p)
    targets = [Target("origin", 0.0, 0.0, cfg.attractor_radius, inward=True)]
    section = None
    if cs.has_two_interior:
        if interior_trace(p, cs.u2) < 0:
            targets.append(Target("P2", cs.u2, cs.u2, cfg.attractor_radius))
        if cfg.cycle_detection:
            section = diagonal_section(cs.u2)
    return targets, p.M - STRIP_MARGIN, section


def _fate_from(status: str, target: Optional[str], t: float, state: State) -> Fate:
    if status == "target" and target == "origin":
        return Fate(FateLabel.TO_ORIGIN, t, state, "entered origin ball with inward field")
    if status == "strip":
        return Fate(FateLabel.TO_ORIGIN, t, state, "entered invariant strip u < M")
    if status == "target" and target == "P2":
        return Fate(FateLabel.TO_P2, t, state, "entered P2 ball")
    if status == "cycle":
        return Fate(FateLabel.TO_CYCLE, t, state, "Poincare returns converged")
    return Fate(FateLabel.UNDECIDED, t, state, status)


def classify_fate(
    p: NondimParams,
    s0: Sequence[float],
    cfg: IntegrationConfig = DEFAULT_CONFIG,
    cs: Optional[CubicStructure] = None,
) -> Fate:
    """Decide where the forward orbit of ``s0`` goes.

    ToOrigin is declared either on entering the origin ball with an inward
    pointing field, or on entering the strip 0 <= u < M: there du/dtau < 0, so
    the strip is forward invariant and every orbit in it tends to the origin.
    """
    targets, strip_u, section = fate_rules(p, cfg, cs)
    res = run(
        p, s0, cfg,
        targets=targets, strip_u=strip_u, section=section,
        stop_on_cycle=section is not None, record=False,
    )
    return _fate_from(res.status, res.target, res.t_end, res.state)


_LABEL_BY_CODE = {0: FateLabel.TO_ORIGIN, 1: FateLabel.TO_P2, 2: FateLabel.TO_CYCLE, 3: FateLabel.UNDECIDED}


def classify_fates(
    p: NondimParams,
    points: np.ndarray,
    cfg: IntegrationConfig = DEFAULT_CONFIG,
    cs: Optional[CubicStructure] = None,
) -> np.ndarray:
    """Vectorised :func:`classify_fate`; returns codes 0=origin, 1=P2, 2=cycle, 3=undecided."""
    targets, strip_u, section = fate_rules(p, cfg, cs)
    table = np.array(
        [[tg.u, tg.v, tg.radius, tg.arm_radius, 1.0 if tg.inward else 0.0] for tg in targets]
    )
    pts = np.ascontiguousarray(points, dtype=float)
    status, hit, _, _, _ = K.solve_many(
        pts[:, 0].copy(), pts[:, 1].copy(), p.A, p.M, p.Q, p.S, 1.0,
        cfg.max_time, cfg.rel_tol, cfg.abs_tol, cfg.max_steps,
        table, strip_u, math.inf, math.inf, ESCAPE_BOUND,
        section.as_array() if section is not None else _NO_SECTION,
        cfg.cycle_tol, cfg.cycle_returns if section is not None else 0, 1e-3,
    )
    codes = np.full(len(pts), 3, dtype=np.int8)
    codes[status == K.STRIP] = 0
    codes[(status == K.TARGET) & (hit == 0)] = 0
    codes[(status == K.TARGET) & (hit == 1)] = 1
    codes[status == K.CYCLE] = 2
    return codes


@dataclass
class TrappingReport:
    ok: bool
    entered_at: Optional[int]
    violation_at: Optional[int] = None
    violation_state: Optional[State] = None
    message: str = ""
    notes: list[str] = field(default_factory=list)


PHI = (0.0, 1.0, 0.0, 1.0)


def check_trapping(traj: Trajectory, slack: Optional[float] = None) -> TrappingReport:
    """Check that once a forward orbit is inside the unit box it stays there.

    ``slack`` inflates the box to absorb solver error (default 1e-6).
    """
    if traj.backward:
        raise ValueError("the trapping property concerns forward orbits")
    slack = 1e-6 if slack is None else slack
    u, v = traj.u, traj.v
    inside = (u >= -slack) & (u <= 1.0 + slack) & (v >= -slack) & (v <= 1.0 + slack)
    idx = np.flatnonzero(inside)
    if idx.size == 0:
        return TrappingReport(ok=True, entered_at=None, message="orbit never entered the box")
    first = int(idx[0])
    bad = np.flatnonzero(~inside[first:])
    if bad.size:
        k = first + int(bad[0])
        return TrappingReport(
            ok=False,
            entered_at=first,
            violation_at=k,
            violation_state=State(float(u[k]), float(v[k])),
            message=f"left the box at step {k} (t={traj.t[k]:g})",
        )
    return TrappingReport(ok=True, entered_at=first, message="entered and stayed")

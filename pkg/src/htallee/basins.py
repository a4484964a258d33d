"""Basins of attraction on a grid and the unstable limit cycle around P2."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.spatial import cKDTree

from .equilibria import CubicStructure, NoInteriorEquilibriumError, interior_trace, solve_cubic_structure
from .integrate import (
    DEFAULT_CONFIG,
    FateLabel,
    IntegrationConfig,
    Target,
    classify_fate,
    classify_fates,
    diagonal_section,
    run,
)
from .model import NondimParams, jacobian, vector_field

LABEL_NAMES = (FateLabel.TO_ORIGIN.value, FateLabel.TO_P2.value, FateLabel.TO_CYCLE.value, FateLabel.UNDECIDED.value)
ORIGIN_CODE, P2_CODE, CYCLE_CODE, UNDECIDED_CODE = 0, 1, 2, 3
UNIT_BOX = (0.0, 1.0, 0.0, 1.0)


@dataclass
class BasinGrid:
    """Fate labels at cell centres; ``labels[j, i]`` belongs to (u_i, v_j)."""

    params: NondimParams
    box: tuple[float, float, float, float]
    resolution: int
    labels: np.ndarray

    @property
    def u(self) -> np.ndarray:
        u0, u1, _, _ = self.box
        return u0 + (np.arange(self.resolution) + 0.5) * (u1 - u0) / self.resolution

    @property
    def v(self) -> np.ndarray:
        _, _, v0, v1 = self.box
        return v0 + (np.arange(self.resolution) + 0.5) * (v1 - v0) / self.resolution

    @property
    def cell_size(self) -> tuple[float, float]:
        u0, u1, v0, v1 = self.box
        return (u1 - u0) / self.resolution, (v1 - v0) / self.resolution

    def fractions(self) -> dict[str, float]:
        counts = np.bincount(self.labels.ravel(), minlength=4)
        total = counts.sum()
        return {name: float(c / total) for name, c in zip(LABEL_NAMES, counts)}

    def to_csv(self, path) -> None:
        uu, vv = np.meshgrid(self.u, self.v)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["u", "v", "label"])
            for a, b, c in zip(uu.ravel(), vv.ravel(), self.labels.ravel()):
                w.writerow([repr(float(a)), repr(float(b)), LABEL_NAMES[c]])

    def header(self) -> dict:
        return {
            "box": list(self.box),
            "resolution": self.resolution,
            "params": self.params.as_dict(),
            "fractions": self.fractions(),
            "codes": {str(k): name for k, name in enumerate(LABEL_NAMES)},
        }

    def save_labels(self, path) -> None:
        """JSON header on the first line, then one row of label digits per v-row."""
        with open(path, "w") as fh:
            fh.write(json.dumps(self.header(), sort_keys=True) + "\n")
            for row in self.labels:
                fh.write("".join(str(int(c)) for c in row) + "\n")

    @classmethod
    def load_labels(cls, path) -> "BasinGrid":
        with open(path) as fh:
            head = json.loads(fh.readline())
            rows = [line.strip() for line in fh if line.strip()]
        labels = np.array([[int(c) for c in row] for row in rows], dtype=np.int8)
        return cls(
            params=NondimParams(**head["params"]),
            box=tuple(head["box"]),
            resolution=int(head["resolution"]),
            labels=labels,
        )


def compute_basins(
    p: NondimParams,
    box: tuple[float, float, float, float] = UNIT_BOX,
    resolution: int = 200,
    cfg: IntegrationConfig = DEFAULT_CONFIG,
    cs: Optional[CubicStructure] = None,
) -> BasinGrid:
    """Classify the forward fate of every cell centre of ``box``."""
    if resolution < 1:
        raise ValueError(f"resolution must be positive, got {resolution!r}")
    u0, u1, v0, v1 = box
    if not (0.0 <= u0 < u1 and 0.0 <= v0 < v1):
        raise ValueError(f"box must be a nonempty subset of the first quadrant, got {box!r}")
    grid = BasinGrid(p, tuple(map(float, box)), resolution, np.empty((0, 0), dtype=np.int8))
    uu, vv = np.meshgrid(grid.u, grid.v)
    codes = classify_fates(p, np.column_stack([uu.ravel(), vv.ravel()]), cfg, cs)
    grid.labels = codes.reshape(resolution, resolution)
    return grid


def basin_area_fraction(grid: BasinGrid) -> tuple[float, float, float]:
    """(ToP2, ToOrigin, rest); cells that stopped on a cycle count as undecided."""
    fr = grid.fractions()
    rest = fr[FateLabel.TO_CYCLE.value] + fr[FateLabel.UNDECIDED.value]
    return fr[FateLabel.TO_P2.value], fr[FateLabel.TO_ORIGIN.value], rest


def label_boundary(grid: BasinGrid) -> np.ndarray:
    """Midpoints between horizontally or vertically adjacent ToP2 / ToOrigin cells."""
    lab = grid.labels
    u, v = grid.u, grid.v
    pts = []
    a, b = lab[:, :-1], lab[:, 1:]
    jj, ii = np.nonzero(((a == P2_CODE) & (b == ORIGIN_CODE)) | ((a == ORIGIN_CODE) & (b == P2_CODE)))
    pts.append(np.column_stack([0.5 * (u[ii] + u[ii + 1]), v[jj]]))
    a, b = lab[:-1, :], lab[1:, :]
    jj, ii = np.nonzero(((a == P2_CODE) & (b == ORIGIN_CODE)) | ((a == ORIGIN_CODE) & (b == P2_CODE)))
    pts.append(np.column_stack([u[ii], 0.5 * (v[jj] + v[jj + 1])]))
    return np.vstack(pts)


def densify(polyline: np.ndarray, spacing: float) -> np.ndarray:
    """Insert points so consecutive vertices are at most ``spacing`` apart."""
    out = [polyline[:1]]
    for a, b in zip(polyline[:-1], polyline[1:]):
        n = max(1, int(math.ceil(np.linalg.norm(b - a) / spacing)))
        s = np.arange(1, n + 1)[:, None] / n
        out.append(a + s * (b - a))
    return np.vstack(out)


def boundary_distance(grid: BasinGrid, curve: np.ndarray) -> float:
    """Hausdorff distance between the ToP2/ToOrigin boundary and ``curve`` inside the box.

    The curve is densified to a quarter cell and clipped to the hull of the
    cell centres: pieces of the curve closer than half a cell to the box edge
    bound slivers that no cell centre can sample.
    """
    du, dv = grid.cell_size
    pts = densify(np.asarray(curve, dtype=float), 0.25 * min(du, dv))
    u0, u1, v0, v1 = grid.box
    u0, u1, v0, v1 = u0 + 0.5 * du, u1 - 0.5 * du, v0 + 0.5 * dv, v1 - 0.5 * dv
    keep = (pts[:, 0] >= u0) & (pts[:, 0] <= u1) & (pts[:, 1] >= v0) & (pts[:, 1] <= v1)
    pts = pts[keep]
    bnd = label_boundary(grid)
    if len(pts) == 0 or len(bnd) == 0:
        return math.inf
    d1 = cKDTree(pts).query(bnd)[0].max()
    d2 = cKDTree(bnd).query(pts)[0].max()
    return float(max(d1, d2))


class NoCycleError(RuntimeError):
    """Reversed-time orbits near P2 did not settle on a closed orbit."""


@dataclass
class LimitCycle:
    points: np.ndarray  # closed polyline in forward-time orientation
    period: float
    closure: float
    multipliers: Optional[tuple[float, float]] = None
    divergence_integral: Optional[float] = None
    stability: str = "unstable"

    @property
    def amplitude(self) -> float:
        return float(max(np.ptp(self.points[:, 0]), np.ptp(self.points[:, 1])))

    def winding_number(self, point) -> int:
        d = self.points - np.asarray(point, dtype=float)
        ang = np.unwrap(np.arctan2(d[:, 1], d[:, 0]))
        return int(round((ang[-1] - ang[0]) / (2.0 * math.pi)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["u", "v"])
            for u, v in self.points:
                w.writerow([repr(float(u)), repr(float(v))])


def floquet(p: NondimParams, start, period: float, rtol: float = 1e-11, atol: float = 1e-13):
    """Monodromy matrix over one period and the integral of the divergence.

    The variational equation is integrated together with the orbit; the
    nontrivial multiplier must equal exp(integral of div) by Liouville.
    """

    def rhs(_t, y):
        u, v = y[0], y[1]
        du, dv = vector_field(p, u, v)
        J = jacobian(p, u, v)
        Phi = y[2:6].reshape(2, 2)
        return np.concatenate([[du, dv], (J @ Phi).ravel(), [J[0, 0] + J[1, 1]]])

    y0 = np.concatenate([np.asarray(start, dtype=float), np.eye(2).ravel(), [0.0]])
    sol = solve_ivp(rhs, (0.0, period), y0, method="DOP853", rtol=rtol, atol=atol)
    y = sol.y[:, -1]
    return y[2:6].reshape(2, 2), float(y[6]), y[:2]


def extract_unstable_cycle(
    p: NondimParams,
    cfg: IntegrationConfig = DEFAULT_CONFIG,
    cs: Optional[CubicStructure] = None,
    *,
    displacement: float = 1e-2,
    cycle_tol: float = 1e-7,
    with_floquet: bool = True,
) -> LimitCycle:
    """Locate the unstable cycle around P2 by integrating backward from near P2.

    Seeds are tried at ``displacement`` and then 1e-3, 1e-4, 1e-5 to the
    right of P2 along the diagonal. Raises :class:`NoCycleError` when every
    seed escapes, i.e. S lies outside the interval where the cycle exists.
    """
    cs = cs or solve_cubic_structure(p)
    if not cs.has_two_interior:
        raise NoInteriorEquilibriumError(f"no P2: discriminant {cs.delta:.3e}")
    u1, u2 = cs.u1, cs.u2
    if interior_trace(p, u2) >= 0:
        raise NoCycleError(f"P2 repels at S={p.S:g}; no unstable cycle surrounds it")
    # returns stall at the integrator's noise floor, so tighten the solver too
    tight = replace(
        cfg, rel_tol=min(cfg.rel_tol, 1e-11), abs_tol=min(cfg.abs_tol, 1e-13),
        cycle_tol=cycle_tol, max_time=max(cfg.max_time, 2e5),
    )
    targets = [
        Target("P1", u1, u1, 1e-4),
        Target("(M,0)", p.M, 0.0, 1e-3),
        Target("(1,0)", 1.0, 0.0, 1e-3),
    ]
    sec = diagonal_section(u2)
    last = None
    for d in sorted({displacement, 1e-3, 1e-4, 1e-5}, reverse=True):
        res = run(
            p, (u2 + d, u2 + d), tight, backward=True, targets=targets,
            box=(1.0, 1.0), section=sec, stop_on_cycle=True, cycle_min_amplitude=1e-7,
        )
        last = res
        if res.status == "cycle":
            break
    else:
        raise NoCycleError(f"no cycle found at S={p.S:g} (last seed ended with {last.status})")

    (ta, ua, va), (tb, ub, vb) = res.crossings[-2], res.crossings[-1]
    inside = (res.t > ta) & (res.t < tb)
    loop = np.vstack([[ua, va], np.column_stack([res.u[inside], res.v[inside]]), [ub, vb]])
    cyc = LimitCycle(points=loop[::-1].copy(), period=float(tb - ta), closure=float(math.hypot(ub - ua, vb - va)))
    if with_floquet:
        mono, div_int, _ = floquet(p, (ub, vb), cyc.period)
        mult = np.linalg.eigvals(mono)
        mult = tuple(sorted(float(abs(m)) for m in mult))
        cyc.multipliers = mult
        cyc.divergence_integral = div_int
        cyc.stability = "unstable" if mult[1] > 1.0 else "stable"
    return cyc


def cycle_sandwich(
    p: NondimParams,
    cycle: LimitCycle,
    offset: float = 1e-3,
    cfg: IntegrationConfig = DEFAULT_CONFIG,
    cs: Optional[CubicStructure] = None,
) -> tuple[FateLabel, FateLabel]:
    """Forward fates of points just inside and just outside the cycle on the diagonal."""
    cs = cs or solve_cubic_structure(p)
    # rightmost crossing of the diagonal above P2
    pts = cycle.points
    k = int(np.argmax(np.where(pts[:, 0] > cs.u2, -np.abs(pts[:, 0] - pts[:, 1]), -np.inf)))
    r = 0.5 * (pts[k, 0] + pts[k, 1])
    inner = classify_fate(p, (r - offset, r - offset), cfg, cs).label
    outer = classify_fate(p, (r + offset, r + offset), cfg, cs).label
    return inner, outer

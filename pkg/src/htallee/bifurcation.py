"""Bifurcation sets in the (Q, S) plane at fixed (A, M).

Local sets have closed forms: the saddle-node line Q = Q*** where the
residual quadratic has a double root, the Hopf curve S = f(u2(Q)), and the
Bogdanov-Takens point where the two meet. The homoclinic (S**) and
heteroclinic (S***) values have no closed form; they are found by bisection
on the connection topology of the saddle's stable manifold.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .equilibria import (
    DOUBLE_ROOT_TOL,
    CubicStructure,
    cubic_structure,
    f_at_double_root,
    f_trace,
    hopf_threshold,
)
from .integrate import DEFAULT_CONFIG, IntegrationConfig
from .manifolds import (
    STABLE_SW,
    AmbiguousConnectionError,
    classify_connection,
    homoclinic_gap,
    trace_branch,
)
from .model import NondimParams, jacobian

log = logging.getLogger(__name__)

S_BISECTION_TOL = 1e-4

NO_INTERIOR = "no-interior"
P2_REPELLER = "P2-repeller"
CYCLE_SEPARATRIX = "cycle-separatrix"
WS_TO_M = "Ws-to-(M,0)"
WS_TO_BOUNDARY = "Ws-to-boundary"
UNDECIDED = "Undecided"
REGION_LABELS = (NO_INTERIOR, P2_REPELLER, CYCLE_SEPARATRIX, WS_TO_M, WS_TO_BOUNDARY, UNDECIDED)


class BracketError(ValueError):
    """A search interval does not straddle the requested transition."""


def _check_am(A: float, M: float) -> None:
    if not (0.0 < A < 1.0 and 0.0 < M < 1.0):
        raise ValueError(f"(A, M) must lie in (0, 1)^2, got {(A, M)}")


def find_saddle_node_Q(A: float, M: float, q_upper: float = 0.5, max_doublings: int = 60) -> float:
    """The Q at which P1 and P2 collide (discriminant zero)."""
    _check_am(A, M)
    q_lo = 1e-6
    if cubic_structure(A, M, q_lo).delta <= 0:
        raise BracketError(f"discriminant not positive at Q={q_lo:g} for (A, M)={(A, M)}")
    q_hi = q_upper
    for _ in range(max_doublings):
        if cubic_structure(A, M, q_hi).delta < 0:
            break
        q_lo = q_hi
        q_hi *= 2.0
    else:
        raise BracketError(f"discriminant never became negative up to Q={q_hi:g}")
    return brentq(lambda q: cubic_structure(A, M, q).delta, q_lo, q_hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)


def double_root_structure(A: float, M: float, Q: float) -> CubicStructure:
    """Cubic structure at a saddle-node value, with u1 = u2 = E forced."""
    cs = cubic_structure(A, M, Q)
    if abs(cs.delta) >= DOUBLE_ROOT_TOL:
        raise ValueError(f"not a double root: discriminant {cs.delta:.3e}")
    return CubicStructure(A=A, M=M, Q=Q, H=cs.H, delta=cs.delta, u1=cs.E, u2=cs.E, E=cs.E)


def find_bt_point(A: float, M: float) -> tuple[float, float]:
    """(Q***, S_BT) with S_BT = f(E) = Q (H + M + 1 - A) / (H + M + 1 + A)."""
    q = find_saddle_node_Q(A, M)
    return q, f_at_double_root(cubic_structure(A, M, q))


@dataclass(frozen=True)
class SotomayorQuantities:
    w_dot_fq: float
    w_dot_d2f: float

    @property
    def nondegenerate(self) -> bool:
        return self.w_dot_fq != 0.0 and self.w_dot_d2f != 0.0


def sotomayor_check(A: float, M: float, Q: float, S: float) -> SotomayorQuantities:
    """Closed-form transversality quantities of the saddle-node at (E, E).

    F is the reduced field ((u + A)(1 - u)(u - M) - Q v, u - v), U = (1, 1)
    and W = (-S (H + M + 1 + A) / (Q (H + M + 1 - A)), 1) is the left null
    vector of the Jacobian at (E, E). The directional second derivative is
    g''(E) = -3H - M - 1 + A, so

        W . F_Q        = S (H + M + 1 + A) / (2 Q)
        W . D2F(U, U)  = S (H + M + 1 + A)(3H + M + 1 - A) / (Q (H + M + 1 - A))

    and both are positive.
    """
    H = cubic_structure(A, M, Q).H
    B = H + M + 1.0 - A
    C = H + M + 1.0 + A
    return SotomayorQuantities(
        w_dot_fq=S * C / (2.0 * Q),
        w_dot_d2f=S * C * (3.0 * H + M + 1.0 - A) / (Q * B),
    )


def _reduced_field(A, M, Q, u, v):
    return np.array([(u + A) * (1.0 - u) * (u - M) - Q * v, u - v])


def sotomayor_numeric(A: float, M: float, Q: float, S: float, h: float = 1e-4) -> SotomayorQuantities:
    """Finite-difference oracle for :func:`sotomayor_check`.

    W comes from the left null space of the numerically evaluated full
    Jacobian, F_Q and the second derivative along U from central differences
    of the reduced field.
    """
    cs = cubic_structure(A, M, Q)
    E = cs.E
    J = jacobian(NondimParams(A, M, Q, S), E, E)
    _, _, vt = np.linalg.svd(J.T)
    w = vt[-1] / vt[-1][1]
    fq = (_reduced_field(A, M, Q + h, E, E) - _reduced_field(A, M, Q - h, E, E)) / (2.0 * h)
    d2 = (
        _reduced_field(A, M, Q, E + h, E + h)
        - 2.0 * _reduced_field(A, M, Q, E, E)
        + _reduced_field(A, M, Q, E - h, E - h)
    ) / (h * h)
    return SotomayorQuantities(w_dot_fq=float(w @ fq), w_dot_d2f=float(w @ d2))


def hopf_curve(A: float, M: float, qs: Sequence[float]) -> np.ndarray:
    """Rows (Q, S*(Q)) for the Q values that have two interior equilibria."""
    rows = []
    for q in qs:
        cs = cubic_structure(A, M, float(q))
        if cs.has_two_interior:
            rows.append((float(q), float(f_trace(NondimParams(A, M, float(q), 1.0), cs.u2))))
    return np.array(rows).reshape(-1, 2)


def find_q_star(A: float, M: float) -> Optional[float]:
    """Q where the Hopf curve meets S = 0; None if S* stays on one side."""
    q_sn = find_saddle_node_Q(A, M)

    def s_star(q):
        cs = cubic_structure(A, M, q)
        if not cs.has_two_interior:
            return f_at_double_root(cs)
        return f_trace(NondimParams(A, M, q, 1.0), cs.u2)

    lo, hi = 1e-6, q_sn * (1.0 - 1e-9)
    if s_star(lo) * s_star(hi) > 0:
        return None
    return brentq(s_star, lo, hi, xtol=1e-14)


# --- global bifurcations -------------------------------------------------

_BELOW_HOM = {"i", "ii"}
_ABOVE_HOM = {"iv", "v", "vi"}
_BELOW_HET = {"i", "ii", "iii", "iv"}
_ABOVE_HET = {"vi"}


@dataclass
class GlobalBifurcation:
    kind: str  # homoclinic | heteroclinic
    S: float
    bracket: tuple[float, float]
    labels: tuple[str, str]
    matching_distance: float
    iterations: int
    probes: list[tuple[float, str]] = field(default_factory=list)


def _label(p: NondimParams, cfg: IntegrationConfig, cs: CubicStructure) -> Optional[str]:
    try:
        return classify_connection(p, cfg, cs, detect_connections=False).case
    except AmbiguousConnectionError:
        return None


def _scan_upper(A, M, Q, s_lo, above, cfg, cs, step=0.01, s_max=2.0):
    s = s_lo
    while s < s_max:
        s += step
        lab = _label(NondimParams(A, M, Q, s), cfg, cs)
        if lab in above:
            return s
    raise BracketError(f"no transition found in S <= {s_max:g}")


def _bisect(A, M, Q, bracket, below, above, cfg, cs, tol, side_fn=None):
    lo, hi = map(float, bracket)
    if not lo < hi:
        raise BracketError(f"bracket must be increasing, got {bracket!r}")
    lab_lo = _label(NondimParams(A, M, Q, lo), cfg, cs)
    lab_hi = _label(NondimParams(A, M, Q, hi), cfg, cs)
    if lab_lo not in below or lab_hi not in above:
        raise BracketError(f"bracket labels {lab_lo!r} at S={lo:g}, {lab_hi!r} at S={hi:g} do not straddle")
    probes = [(lo, lab_lo), (hi, lab_hi)]
    it = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        lab = _label(NondimParams(A, M, Q, mid), cfg, cs)
        probes.append((mid, lab))
        if lab is None and side_fn is not None:
            is_below = side_fn(mid)
        elif lab is None:
            raise BracketError(f"classification unresolved at S={mid:.6g}")
        else:
            is_below = lab in below
        if is_below:
            lo, lab_lo = mid, lab or lab_lo
        else:
            hi, lab_hi = mid, lab or lab_hi
        it += 1
    return lo, hi, lab_lo, lab_hi, it, probes


def find_homoclinic_S(
    A: float,
    M: float,
    Q: float,
    bracket: Optional[tuple[float, float]] = None,
    cfg: IntegrationConfig = DEFAULT_CONFIG,
    tol: float = S_BISECTION_TOL,
) -> GlobalBifurcation:
    """S** by bisection between a cycle-separatrix label and a (M,0)/boundary label.

    Without a bracket the search starts just above S* and steps up in S.
    Probes whose stable branch does not settle fall back on the sign of
    :func:`homoclinic_gap`.
    """
    cs = cubic_structure(A, M, Q)
    if not cs.has_two_interior:
        raise BracketError(f"no saddle at Q={Q:g}: discriminant {cs.delta:.3e}")
    if bracket is None:
        s_lo = max(hopf_threshold(NondimParams(A, M, Q, 1.0), cs), 0.0) + 1e-3
        bracket = (s_lo, _scan_upper(A, M, Q, s_lo, _ABOVE_HOM, cfg, cs))
    lo_gap = homoclinic_gap(NondimParams(A, M, Q, bracket[0]), cfg, cs)

    def side(s):
        g = homoclinic_gap(NondimParams(A, M, Q, s), cfg, cs)
        return (g > 0) == (lo_gap > 0)

    lo, hi, lab_lo, lab_hi, it, probes = _bisect(A, M, Q, bracket, _BELOW_HOM, _ABOVE_HOM, cfg, cs, tol, side)
    s = 0.5 * (lo + hi)
    gap = abs(homoclinic_gap(NondimParams(A, M, Q, s), cfg, cs))
    return GlobalBifurcation("homoclinic", s, (lo, hi), (lab_lo, lab_hi), gap, it, probes)


def find_heteroclinic_S(
    A: float,
    M: float,
    Q: float,
    bracket: Optional[tuple[float, float]] = None,
    cfg: IntegrationConfig = DEFAULT_CONFIG,
    tol: float = S_BISECTION_TOL,
) -> GlobalBifurcation:
    """S*** by bisection between a (M,0) label and a boundary-exit label.

    The reported matching distance is the closest approach of the stable
    branch to (1, 0) at the midpoint of the final bracket.
    """
    cs = cubic_structure(A, M, Q)
    if not cs.has_two_interior:
        raise BracketError(f"no saddle at Q={Q:g}: discriminant {cs.delta:.3e}")
    if bracket is None:
        hom = find_homoclinic_S(A, M, Q, cfg=cfg, tol=tol)
        s_lo = hom.bracket[1]
        bracket = (s_lo, _scan_upper(A, M, Q, s_lo, _ABOVE_HET, cfg, cs, step=0.005))
    lo, hi, lab_lo, lab_hi, it, probes = _bisect(A, M, Q, bracket, _BELOW_HET, _ABOVE_HET, cfg, cs, tol)
    s = 0.5 * (lo + hi)
    branch = trace_branch(NondimParams(A, M, Q, s), STABLE_SW, cfg=cfg, cs=cs, detect_connections=False)
    dist = branch.min_distance.get("(1,0)", math.inf)
    return GlobalBifurcation("heteroclinic", s, (lo, hi), (lab_lo, lab_hi), dist, it, probes)


# --- region diagram -------------------------------------------------------


def region_label(p: NondimParams, cs: CubicStructure, cfg: IntegrationConfig = DEFAULT_CONFIG) -> str:
    if not cs.has_two_interior:
        return NO_INTERIOR
    if p.S <= hopf_threshold(p, cs):
        return P2_REPELLER
    lab = _label(p, cfg, cs)
    if lab in ("ii", "iii"):
        return CYCLE_SEPARATRIX
    if lab in ("iv", "v"):
        return WS_TO_M
    if lab == "vi":
        return WS_TO_BOUNDARY
    return UNDECIDED


@dataclass
class RegionDiagram:
    A: float
    M: float
    qs: np.ndarray
    ss: np.ndarray
    labels: np.ndarray  # labels[j, i] at (qs[i], ss[j]), indices into REGION_LABELS
    curves: dict

    def counts(self) -> dict[str, int]:
        c = np.bincount(self.labels.ravel(), minlength=len(REGION_LABELS))
        return {name: int(n) for name, n in zip(REGION_LABELS, c)}

    def label_at(self, q: float, s: float) -> str:
        i = int(np.argmin(np.abs(self.qs - q)))
        j = int(np.argmin(np.abs(self.ss - s)))
        return REGION_LABELS[self.labels[j, i]]

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["Q", "S", "label"])
            for j, s in enumerate(self.ss):
                for i, q in enumerate(self.qs):
                    w.writerow([repr(float(q)), repr(float(s)), REGION_LABELS[self.labels[j, i]]])


def bifurcation_curves(
    A: float,
    M: float,
    q_range: tuple[float, float],
    s_range: tuple[float, float],
    n_hopf: int = 200,
    global_qs: Sequence[float] = (),
    cfg: IntegrationConfig = DEFAULT_CONFIG,
) -> dict:
    """Polylines of the bifurcation sets, ready for plotting.

    Homoclinic and heteroclinic values are computed only at ``global_qs``;
    Q values where a transition is missing are skipped.
    """
    q_sn, s_bt = find_bt_point(A, M)
    qs = np.linspace(q_range[0], min(q_range[1], q_sn), n_hopf)
    curves = {
        "SN": [[q_sn, float(s_range[0])], [q_sn, float(s_range[1])]],
        "H": hopf_curve(A, M, qs).tolist(),
        "BT": [q_sn, s_bt],
        "HOM": [],
        "HET": [],
        "Q_star_hopf_zero": find_q_star(A, M),
        "Q_bt_abscissa": q_sn,
    }
    for q in global_qs:
        try:
            hom = find_homoclinic_S(A, M, float(q), cfg=cfg)
            curves["HOM"].append([float(q), hom.S])
            het = find_heteroclinic_S(A, M, float(q), bracket=(hom.bracket[1], _scan_upper(
                A, M, float(q), hom.bracket[1], _ABOVE_HET, cfg, cubic_structure(A, M, float(q)), step=0.005
            )), cfg=cfg)
            curves["HET"].append([float(q), het.S])
        except BracketError as exc:
            log.info("no global bifurcation at Q=%g: %s", q, exc)
    return curves


def region_diagram(
    A: float,
    M: float,
    q_range: tuple[float, float],
    s_range: tuple[float, float],
    resolution: tuple[int, int] = (40, 40),
    cfg: IntegrationConfig = DEFAULT_CONFIG,
    curves: bool = False,
    global_qs: Sequence[float] = (),
    workers: Optional[int] = None,
) -> RegionDiagram:
    """Label a (Q, S) grid by the qualitative regime.

    The cubic structure depends on Q only, so it is computed once per column
    and shared by every S in that column. Columns run in a thread pool (the
    integrator releases the GIL).
    """
    _check_am(A, M)
    nq, ns = resolution
    if nq < 1 or ns < 1:
        raise ValueError(f"resolution must be positive, got {resolution!r}")
    if not (0 < q_range[0] < q_range[1] and 0 < s_range[0] < s_range[1]):
        raise ValueError("Q and S ranges must be positive and increasing")
    qs = np.linspace(q_range[0], q_range[1], nq)
    ss = np.linspace(s_range[0], s_range[1], ns)
    index = {name: k for k, name in enumerate(REGION_LABELS)}

    def column(i):
        cs = cubic_structure(A, M, float(qs[i]))
        return [index[region_label(NondimParams(A, M, float(qs[i]), float(s)), cs, cfg)] for s in ss]

    with ThreadPoolExecutor(max_workers=workers or os.cpu_count() or 1) as pool:
        cols = list(pool.map(column, range(nq)))
    labels = np.array(cols, dtype=np.int8).T
    cv = bifurcation_curves(A, M, q_range, s_range, global_qs=global_qs, cfg=cfg) if curves else {}
    return RegionDiagram(A=A, M=M, qs=qs, ss=ss, labels=labels, curves=cv)

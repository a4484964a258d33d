"""Manifolds of the saddle P1 and the connection topology."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings

from htallee.equilibria import NoInteriorEquilibriumError, p1_eigen_data, solve_cubic_structure
from htallee.integrate import FateLabel, classify_fate
from htallee.manifolds import (
    BRANCHES,
    CASE_ORDER,
    STABLE_NE,
    STABLE_SW,
    UNSTABLE_NE,
    UNSTABLE_SW,
    NoSeparatrixError,
    classify_connection,
    homoclinic_gap,
    seed_point,
    separatrix,
    trace_branch,
)
from htallee.model import NondimParams

from _properties import two_interior_params

BASE = NondimParams(0.0365, 0.1, 0.21, 0.1)


def at(S):
    return BASE.with_(S=S)


class TestSeeding:
    @pytest.mark.parametrize("which", BRANCHES)
    def test_seed_on_eigenvector(self, which):
        p = at(0.16)
        cs = solve_cubic_structure(p)
        eps = 1e-6
        s = seed_point(p, which, eps, cs)
        d = s - np.array([cs.u1, cs.u1])
        assert np.linalg.norm(d) == pytest.approx(eps, rel=1e-12)
        _, _, pu, ps = p1_eigen_data(p, cs)
        psi = ps if which.startswith("stable") else pu
        assert abs(d[0] * psi[1] - d[1] * psi[0]) < 1e-15
        # NE seeds of unstable and SW seeds of stable branches lie above P1
        upper = which in (STABLE_SW, UNSTABLE_NE)
        assert (d[1] > 0) == upper

    def test_first_point_is_seed(self):
        b = trace_branch(at(0.16), UNSTABLE_NE, eps=1e-5)
        assert np.array_equal(b.points[0], b.seed)

    @pytest.mark.parametrize("eps", [1e-9, 1e-3])
    def test_eps_range(self, eps):
        with pytest.raises(ValueError):
            trace_branch(at(0.16), STABLE_NE, eps=eps)

    def test_needs_saddle(self):
        with pytest.raises(NoInteriorEquilibriumError):
            trace_branch(NondimParams(0.2, 0.1, 0.35, 0.1), STABLE_NE)

    def test_unknown_branch(self):
        with pytest.raises(ValueError):
            trace_branch(at(0.16), "stable-up")


class TestBranchFates:
    def test_fixture(self):
        a = trace_branch(BASE, STABLE_NE)
        b = trace_branch(BASE, UNSTABLE_SW)
        assert (a.termination, a.target) == ("equilibrium", "(M,0)")
        assert (b.termination, b.target) == ("equilibrium", "origin")

    @settings(max_examples=40, deadline=None)
    @given(two_interior_params())
    def test_invariant(self, p):
        assert trace_branch(p, STABLE_NE).target == "(M,0)"
        assert trace_branch(p, UNSTABLE_SW).target == "origin"

    @pytest.mark.parametrize("S", [0.1, 0.16, 0.2])
    @pytest.mark.parametrize("which", BRANCHES)
    def test_eps_halving(self, S, which):
        eps = 1e-6
        a = trace_branch(at(S), which, eps)
        b = trace_branch(at(S), which, eps / 2)
        assert a.termination == b.termination and a.target == b.target
        assert np.abs(a.end - b.end).max() < 10 * eps

    def test_horizon_termination(self):
        b = trace_branch(at(0.16), STABLE_SW, t_max=1.0)
        assert b.termination == "horizon"

    def test_csv(self, tmp_path):
        b = trace_branch(at(0.16), UNSTABLE_NE)
        b.to_csv(tmp_path / "b.csv")
        lines = (tmp_path / "b.csv").read_text().splitlines()
        assert lines[0] == "u,v" and len(lines) == len(b.points) + 1


class TestClassification:
    @pytest.mark.parametrize(
        "S, case",
        [(0.0123, "i"), (0.1, "i"), (0.121, "ii"), (0.13, "iv"), (0.16, "vi"), (0.2, "vi")],
    )
    def test_frozen_cases(self, S, case):
        assert classify_connection(at(S)).case == case

    def test_name(self):
        assert classify_connection(at(0.121)).name == "cycle-separatrix"

    def test_monotone_progression(self):
        ss = np.round(np.arange(0.02, 0.30, 0.01), 10)
        cases = [classify_connection(at(float(s))).case for s in ss]
        ranks = [CASE_ORDER.index(c) for c in cases]
        assert ranks == sorted(ranks)
        # each label appears as one contiguous run
        runs = [c for k, c in enumerate(cases) if k == 0 or c != cases[k - 1]]
        assert len(runs) == len(set(runs))
        assert {"i", "ii", "iv", "vi"} <= set(cases)

    def test_homoclinic_gap_changes_sign(self):
        assert homoclinic_gap(at(0.121)) * homoclinic_gap(at(0.13)) < 0


def _normals(pts):
    t = np.gradient(pts, axis=0)
    t /= np.linalg.norm(t, axis=1)[:, None]
    return np.column_stack([-t[:, 1], t[:, 0]])


class TestSeparatrix:
    def test_cycle_case(self):
        sep = separatrix(at(0.121))
        assert sep.kind == "cycle" and sep.closed
        cs = solve_cubic_structure(at(0.121))
        d = sep.points - cs.u2
        ang = np.unwrap(np.arctan2(d[:, 1], d[:, 0]))
        assert abs(round((ang[-1] - ang[0]) / (2 * np.pi))) == 1

    def test_open_curve(self):
        p = at(0.2)
        sep = separatrix(p)
        cs = solve_cubic_structure(p)
        assert sep.kind == "stable-manifold" and not sep.closed
        first, last = sep.points[0], sep.points[-1]
        assert np.hypot(first[0] - p.M, first[1]) < 2e-3
        assert max(last) == pytest.approx(1.0, abs=1e-9)
        assert np.min(np.linalg.norm(sep.points - cs.u1, axis=1)) < 1e-12
        assert sep.points.max() <= 1.0 + 1e-12

    def test_no_separatrix_below_threshold(self):
        with pytest.raises(NoSeparatrixError):
            separatrix(at(0.1))

    @pytest.mark.parametrize("S", [0.121, 0.16, 0.2])
    def test_sides(self, S):
        p = at(S)
        cs = solve_cubic_structure(p)
        sep = separatrix(p)
        pts, nrm = sep.points, _normals(sep.points)
        # stay clear of P1 and of the ends, where the two sides pinch
        ok = (np.linalg.norm(pts - cs.u1, axis=1) > 0.02) & (pts[:, 1] > 0.02) & (pts.max(axis=1) < 0.98)
        idx = np.flatnonzero(ok)
        rng = np.random.default_rng(11)
        pick = rng.choice(idx, size=min(100, len(idx)), replace=False)
        for k in pick:
            a = classify_fate(p, pts[k] + 1e-3 * nrm[k]).label
            b = classify_fate(p, pts[k] - 1e-3 * nrm[k]).label
            assert {a, b} == {FateLabel.TO_ORIGIN, FateLabel.TO_P2}, (S, pts[k])

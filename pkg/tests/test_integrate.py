"""Integrator, trapping region and fate classification."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from htallee.equilibria import solve_cubic_structure
from htallee.integrate import (
    IntegrationConfig,
    Trajectory,
    FateLabel,
    check_trapping,
    classify_fate,
    classify_fates,
    integrate,
    run,
    Target,
)
from htallee.manifolds import STABLE_SW, trace_branch
from htallee.model import NondimParams

from _properties import nondim_params

FIG04 = NondimParams(0.2, 0.1, 0.35, 0.1)
FIG07 = NondimParams(0.0365, 0.1, 0.21, 0.0123)
TWO = NondimParams(0.0365, 0.1, 0.21, 0.2)


class TestConfig:
    @pytest.mark.parametrize(
        "kw", [dict(rel_tol=0.0), dict(rel_tol=0.1), dict(abs_tol=-1.0), dict(max_time=0.0),
               dict(attractor_radius=0.05), dict(cycle_returns=0)],
    )
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            IntegrationConfig(**kw)

    def test_defaults(self):
        c = IntegrationConfig()
        assert (c.rel_tol, c.abs_tol, c.max_time, c.attractor_radius) == (1e-8, 1e-10, 5e4, 1e-4)

    def test_negative_start_rejected(self):
        with pytest.raises(ValueError):
            integrate(FIG04, (-0.1, 0.2))


class TestIntegrate:
    def test_v_axis_decays(self):
        tr = integrate(FIG04, (0.0, 1.0))
        assert np.all(tr.u == 0.0)
        assert np.all(np.diff(tr.v) <= 0)
        # dv/dtau = -A S v^2 integrates to 1/v = 1 + A S tau
        expected = 1.0 / (1.0 + FIG04.A * FIG04.S * tr.t[-1])
        assert tr.v[-1] == pytest.approx(expected, rel=1e-6)

    def test_equilibrium_is_stationary(self):
        cs = solve_cubic_structure(TWO)
        tr = integrate(TWO, (cs.u2, cs.u2), t_max=100.0)
        assert np.abs(tr.u - cs.u2).max() < 1e-12
        assert np.abs(tr.v - cs.u2).max() < 1e-12

    def test_enters_gamma(self):
        for p in (FIG04, TWO, FIG07):
            tr = integrate(p, (1.5, 0.2), t_max=2000.0)
            k = int(np.argmax(tr.u <= 1.0))
            assert tr.u[k] <= 1.0
            assert tr.u[k:].max() <= 1.0 + 1e-9

    def test_time_increasing_and_positive(self):
        tr = integrate(TWO, (0.9, 0.05))
        assert np.all(np.diff(tr.t) > 0)
        assert tr.states.min() >= -1e-10

    def test_backward_time(self):
        tr = integrate(TWO, (0.7, 0.6), backward=True, t_max=10.0)
        assert tr.backward and np.all(np.diff(tr.t) > 0)
        fwd = integrate(TWO, (tr.u[-1], tr.v[-1]), IntegrationConfig(rel_tol=1e-11, abs_tol=1e-13), t_max=tr.t[-1])
        assert fwd.u[-1] == pytest.approx(0.7, abs=1e-6)
        assert fwd.v[-1] == pytest.approx(0.6, abs=1e-6)

    def test_csv(self, tmp_path):
        tr = integrate(TWO, (0.7, 0.6), t_max=5.0)
        tr.to_csv(tmp_path / "t.csv")
        lines = (tmp_path / "t.csv").read_text().splitlines()
        assert lines[0] == "tau,u,v"
        assert len(lines) == len(tr) + 1

    def test_convergence_with_tolerance(self):
        # terminal error against a tight reference shrinks as the tolerance shrinks
        ref = integrate(TWO, (0.9, 0.3), IntegrationConfig(rel_tol=1e-13, abs_tol=1e-15), t_max=200.0)
        errs = []
        for tol in (1e-5, 1e-7, 1e-9):
            tr = integrate(TWO, (0.9, 0.3), IntegrationConfig(rel_tol=tol, abs_tol=tol * 1e-2), t_max=200.0)
            errs.append(np.hypot(tr.u[-1] - ref.u[-1], tr.v[-1] - ref.v[-1]))
        assert errs[0] > errs[1] > errs[2]
        # an order-5 pair with tolerance control gains close to a decade per decade
        assert errs[0] / errs[2] > 1e2

    def test_target_event_located(self):
        # the stop lands on the event circle, not a step past it
        res = run(TWO, (0.05, 0.5), targets=[Target("origin", 0.0, 0.0, 0.05)])
        assert res.status == "target" and res.target == "origin"
        assert np.hypot(res.state.u, res.state.v) == pytest.approx(0.05, abs=1e-10)

    def test_strip_event_located(self):
        res = run(TWO, (0.3, 0.4), strip_u=0.2)
        assert res.status == "strip"
        assert res.state.u == pytest.approx(0.2, abs=1e-10)
        assert res.u[-1] == res.state.u

    def test_box_event_located(self):
        b = trace_branch(TWO, STABLE_SW)
        res = run(TWO, b.points[len(b.points) // 2], backward=True, box=(1.0, 1.0))
        assert res.status == "exit"
        assert max(res.state.u, res.state.v) == pytest.approx(1.0, abs=1e-10)


class TestFate:
    def test_global_attractor(self):
        f = classify_fate(FIG04, (0.8, 0.3))
        assert f.label is FateLabel.TO_ORIGIN
        assert f.criterion and f.time_to_decision > 0

    def test_fig07_all_to_origin(self):
        rng = np.random.default_rng(7)
        pts = rng.uniform(0.0, 1.0, size=(200, 2))
        codes = classify_fates(FIG07, pts)
        assert np.all(codes == 0)

    def test_separatrix_bracket(self):
        # just above the upper stable branch the orbit drains to the origin, just below it goes to P2
        b = trace_branch(TWO, STABLE_SW)
        k = int(np.argmin(np.abs(b.points[:, 0] - 0.8)))
        u, v = b.points[k]
        assert classify_fate(TWO, (u, v + 1e-3)).label is FateLabel.TO_ORIGIN
        assert classify_fate(TWO, (u, v - 1e-3)).label is FateLabel.TO_P2

    def test_vectorised_matches_scalar(self):
        rng = np.random.default_rng(3)
        pts = rng.uniform(0.0, 1.0, size=(40, 2))
        codes = classify_fates(TWO, pts)
        names = {0: FateLabel.TO_ORIGIN, 1: FateLabel.TO_P2, 2: FateLabel.TO_CYCLE, 3: FateLabel.UNDECIDED}
        for pt, c in zip(pts, codes):
            assert classify_fate(TWO, pt).label is names[int(c)]

    def test_undecided_at_horizon(self):
        f = classify_fate(TWO, (0.9, 0.3), IntegrationConfig(max_time=1.0))
        assert f.label is FateLabel.UNDECIDED
        assert f.criterion == "horizon"

    def test_strip_decision(self):
        f = classify_fate(TWO, (0.05, 0.5))
        assert f.label is FateLabel.TO_ORIGIN
        assert "strip" in f.criterion


class TestTrapping:
    def test_large_start(self):
        tr = integrate(FIG04, (0.9, 2.0), t_max=5000.0)
        rep = check_trapping(tr)
        assert rep.ok and rep.entered_at is not None
        assert tr.u[-1] <= 1 and tr.v[-1] <= 1

    def test_constant_boundary(self):
        tr = integrate(FIG04, (1.0, 0.0), t_max=50.0)
        assert check_trapping(tr).ok

    def test_violation_reported(self):
        tr = Trajectory(t=np.arange(4.0), u=np.array([0.5, 0.6, 1.2, 0.5]), v=np.full(4, 0.5))
        rep = check_trapping(tr)
        assert not rep.ok and rep.violation_at == 2
        assert rep.violation_state == (1.2, 0.5)

    def test_backward_rejected(self):
        tr = Trajectory(t=np.arange(2.0), u=np.zeros(2), v=np.zeros(2), backward=True)
        with pytest.raises(ValueError):
            check_trapping(tr)

    @settings(max_examples=100, deadline=None)
    @given(nondim_params(), st.floats(0.0, 3.0), st.floats(0.0, 3.0))
    def test_random_trajectories(self, p, u0, v0):
        tr = integrate(p, (u0, v0), t_max=2000.0)
        assert check_trapping(tr).ok
        assert tr.states.min() >= -1e-10

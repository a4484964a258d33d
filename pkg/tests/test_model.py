"""Core model: parameter maps, vector fields and the analytic Jacobian."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.spatial import cKDTree

from htallee.basins import densify
from htallee.integrate import IntegrationConfig, integrate
from htallee.model import (
    DimensionalParams,
    NondimParams,
    ParameterError,
    dimensional_vector_field,
    jacobian,
    nondimensionalize,
    pushforward,
    time_factor,
    to_dim_state,
    to_nondim_state,
    vector_field,
)

from _properties import nondim_params

BASE = dict(r=1.0, s=0.1, K=1.0, q=0.21, n=1.0, a=0.0365, m=0.1)


def fd_jacobian(p, u, v, h=1e-6):
    J = np.empty((2, 2))
    for k, (eu, ev) in enumerate([(h, 0.0), (0.0, h)]):
        fp = np.array(vector_field(p, u + eu, v + ev))
        fm = np.array(vector_field(p, u - eu, v - ev))
        J[:, k] = (fp - fm) / (2 * h)
    return J


class TestParams:
    def test_identity_scaling(self):
        p = nondimensionalize(DimensionalParams(**BASE))
        assert (p.A, p.M, p.Q, p.S) == pytest.approx((0.0365, 0.1, 0.21, 0.1), rel=1e-15)

    def test_scaled_fixture(self):
        p = nondimensionalize(DimensionalParams(r=2, s=0.4, K=2, q=0.84, n=1, a=0.073, m=0.2))
        assert (p.A, p.M, p.Q, p.S) == pytest.approx((0.0365, 0.1, 0.21, 0.1), rel=1e-14)

    @pytest.mark.parametrize(
        "change",
        [dict(a=1.5), dict(a=1.0), dict(m=1.0), dict(m=0.0), dict(m=-0.1), dict(r=0.0), dict(q=-1.0), dict(s=np.nan)],
    )
    def test_dimensional_rejects(self, change):
        with pytest.raises(ParameterError):
            DimensionalParams(**{**BASE, **change})

    @pytest.mark.parametrize(
        "args", [(0.0, 0.1, 0.2, 0.1), (1.0, 0.1, 0.2, 0.1), (0.1, 0.0, 0.2, 0.1), (0.1, 1.0, 0.2, 0.1),
                 (0.1, 0.1, 0.0, 0.1), (0.1, 0.1, 0.2, 0.0), (0.1, 0.1, np.inf, 0.1)],
    )
    def test_nondim_rejects_boundary(self, args):
        with pytest.raises(ParameterError):
            NondimParams(*args)

    def test_param_error_is_value_error(self):
        assert issubclass(ParameterError, ValueError)


class TestVectorField:
    p = NondimParams(0.0365, 0.1, 0.21, 0.1)

    def test_on_v_axis(self):
        du, dv = vector_field(self.p, 0.0, 1.0)
        assert du == 0.0
        assert dv == pytest.approx(-self.p.S * self.p.A)

    def test_carrying_capacity_equilibrium(self):
        assert vector_field(self.p, 1.0, 0.0) == (0.0, 0.0)

    def test_p2_is_rest_point(self):
        # u2 from the cubic structure, frozen
        u2 = 0.6152707445980359
        du, dv = vector_field(self.p, u2, u2)
        assert abs(du) < 1e-14 and abs(dv) < 1e-14

    def test_vectorised(self):
        u = np.linspace(0, 1, 5)
        du, dv = vector_field(self.p, u, 0.5 * u)
        assert du.shape == (5,) and dv.shape == (5,)

    @given(nondim_params(), st.floats(0, 2), st.floats(0, 2))
    def test_axis_invariance(self, p, u, v):
        assert vector_field(p, 0.0, v)[0] == 0.0
        assert vector_field(p, u, 0.0)[1] == 0.0


class TestJacobian:
    p = NondimParams(0.0365, 0.1, 0.21, 0.1)

    def test_origin_zero(self):
        assert np.array_equal(jacobian(self.p, 0.0, 0.0), np.zeros((2, 2)))

    def test_carrying_capacity(self):
        A, M, Q, S = 0.0365, 0.1, 0.21, 0.1
        expected = np.array([[-(1 - M) * (A + 1), -Q], [0.0, S * (A + 1)]])
        assert np.allclose(jacobian(self.p, 1.0, 0.0), expected, rtol=1e-14, atol=0)

    @settings(max_examples=200, deadline=None)
    @given(nondim_params(), st.floats(0.01, 1.5), st.floats(0.01, 1.5))
    def test_matches_finite_differences(self, p, u, v):
        J = jacobian(p, u, v)
        F = fd_jacobian(p, u, v)
        scale = max(np.abs(J).max(), 1e-3)
        assert np.abs(J - F).max() / scale < 1e-6


class TestDimensionalEquivalence:
    d = DimensionalParams(**BASE)

    def test_equilibria(self):
        assert dimensional_vector_field(self.d, self.d.K, 0.0) == (0.0, 0.0)
        dx, dy = dimensional_vector_field(self.d, self.d.m, 0.0)
        assert abs(dx) < 1e-17 and dy == 0.0

    def test_singular_line_rejected(self):
        with pytest.raises(ParameterError):
            dimensional_vector_field(self.d, 0.0, 0.3)

    @pytest.mark.parametrize("params", [BASE, dict(r=2, s=0.4, K=2, q=0.84, n=1.5, a=0.073, m=0.2)])
    def test_pushforward_matches_field(self, params):
        d = DimensionalParams(**params)
        x, y = d.K / 2, d.n * d.K / 2
        u, v = to_nondim_state(d, x, y)
        assert np.allclose(pushforward(d, u, v), dimensional_vector_field(d, x, y), rtol=1e-13, atol=1e-15)
        assert time_factor(d, u) > 0
        assert to_dim_state(d, u, v) == pytest.approx((x, y))

    def test_orbits_coincide(self):
        # same point set, different clocks
        d = DimensionalParams(**BASE)
        p = nondimensionalize(d)
        x0, y0 = 0.7, 0.3
        sol = solve_ivp(
            lambda _t, z: dimensional_vector_field(d, z[0], z[1]), (0, 60), [x0, y0],
            rtol=1e-11, atol=1e-13, dense_output=True,
        )
        xs = sol.sol(np.linspace(0, 60, 200_000))
        dim_orbit = np.column_stack(to_nondim_state(d, xs[0], xs[1]))
        tr = integrate(p, to_nondim_state(d, x0, y0), IntegrationConfig(rel_tol=1e-11, abs_tol=1e-13), t_max=5e4)
        ours = tr.states
        # our accepted steps lie on the orbit; keep those on the arc the dimensional run covers
        k = int(np.argmin(np.linalg.norm(ours - dim_orbit[-1], axis=1)))
        dist = cKDTree(densify(dim_orbit, 1e-6)).query(ours[: k + 1])[0].max()
        assert dist < 1e-6

"""Compiled Dormand-Prince 5(4) integrator for the desingularized field.

Everything here works on plain floats and arrays so it can be compiled with
numba; the public wrappers live in :mod:`htallee.integrate`.
"""

from __future__ import annotations

import math
import os

import numpy as np
import numba
from numba import njit, prange

# the TBB layer is often present but too old; workqueue needs nothing extra
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"

# termination codes
HORIZON = 0
TARGET = 1
STRIP = 2
EXIT = 3
CYCLE = 4
UNDERFLOW = 5
MAX_STEPS = 6
ESCAPE = 7

# target table columns
T_U, T_V, T_RADIUS, T_ARM, T_INWARD = 0, 1, 2, 3, 4

# Dormand-Prince tableau
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = 9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0
PI_ALPHA = 0.17  # 1/5 - 0.75 * PI_BETA
PI_BETA = 0.04


@njit(cache=True, nogil=True)
def rhs(u, v, A, M, Q, S, sgn):
    g = (u + A) * (1.0 - u) * (u - M)
    return sgn * u * u * (g - Q * v), sgn * S * (u + A) * (u - v) * v


@njit(cache=True, nogil=True)
def dopri_step(u, v, h, k1u, k1v, A, M, Q, S, sgn):
    """One step; returns the 5th-order solution, the error estimate and f at the end."""
    k2u, k2v = rhs(u + h * A21 * k1u, v + h * A21 * k1v, A, M, Q, S, sgn)
    k3u, k3v = rhs(u + h * (A31 * k1u + A32 * k2u), v + h * (A31 * k1v + A32 * k2v), A, M, Q, S, sgn)
    k4u, k4v = rhs(
        u + h * (A41 * k1u + A42 * k2u + A43 * k3u),
        v + h * (A41 * k1v + A42 * k2v + A43 * k3v),
        A, M, Q, S, sgn,
    )
    k5u, k5v = rhs(
        u + h * (A51 * k1u + A52 * k2u + A53 * k3u + A54 * k4u),
        v + h * (A51 * k1v + A52 * k2v + A53 * k3v + A54 * k4v),
        A, M, Q, S, sgn,
    )
    k6u, k6v = rhs(
        u + h * (A61 * k1u + A62 * k2u + A63 * k3u + A64 * k4u + A65 * k5u),
        v + h * (A61 * k1v + A62 * k2v + A63 * k3v + A64 * k4v + A65 * k5v),
        A, M, Q, S, sgn,
    )
    un = u + h * (B1 * k1u + B3 * k3u + B4 * k4u + B5 * k5u + B6 * k6u)
    vn = v + h * (B1 * k1v + B3 * k3v + B4 * k4v + B5 * k5v + B6 * k6v)
    k7u, k7v = rhs(un, vn, A, M, Q, S, sgn)
    eu = h * (E1 * k1u + E3 * k3u + E4 * k4u + E5 * k5u + E6 * k6u + E7 * k7u)
    ev = h * (E1 * k1v + E3 * k3v + E4 * k4v + E5 * k5v + E6 * k6v + E7 * k7v)
    return un, vn, eu, ev, k7u, k7v


@njit(cache=True, nogil=True)
def _initial_step(u, v, fu, fv, A, M, Q, S, sgn, rtol, atol):
    su = atol + rtol * abs(u)
    sv = atol + rtol * abs(v)
    d0 = math.sqrt(0.5 * ((u / su) ** 2 + (v / sv) ** 2))
    d1 = math.sqrt(0.5 * ((fu / su) ** 2 + (fv / sv) ** 2))
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    u1 = u + h0 * fu
    v1 = v + h0 * fv
    gu, gv = rhs(u1, v1, A, M, Q, S, sgn)
    d2 = math.sqrt(0.5 * (((gu - fu) / su) ** 2 + ((gv - fv) / sv) ** 2)) / h0
    dm = max(d1, d2)
    if dm <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / dm) ** 0.2
    return min(100.0 * h0, h1)


@njit(cache=True, nogil=True)
def _grow(arr, n):
    out = np.empty(max(2 * arr.shape[0], n + 16))
    out[: arr.shape[0]] = arr
    return out


# stopping-event kinds for _locate
EV_TARGET, EV_STRIP, EV_BOX = 0, 1, 2


@njit(cache=True, nogil=True)
def _event_g(kind, idx, u, v, targets, strip_u, box_u, box_v):
    """Positive before the event, nonpositive once it has happened."""
    if kind == EV_TARGET:
        return math.hypot(u - targets[idx, T_U], v - targets[idx, T_V]) - targets[idx, T_RADIUS]
    if kind == EV_STRIP:
        return u - strip_u
    return min(box_u - u, box_v - v)


@njit(cache=True, nogil=True)
def _locate(kind, idx, u0, v0, k1u, k1v, h, A, M, Q, S, sgn, targets, strip_u, box_u, box_v):
    """Bisect the step fraction at which a stopping event first happens."""
    if _event_g(kind, idx, u0, v0, targets, strip_u, box_u, box_v) <= 0.0:
        return 0.0, u0, v0
    lo = 0.0
    hi = 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        xu, xv, _eu, _ev, _a, _b = dopri_step(u0, v0, mid * h, k1u, k1v, A, M, Q, S, sgn)
        if _event_g(kind, idx, xu, xv, targets, strip_u, box_u, box_v) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    xu, xv, _eu, _ev, _a, _b = dopri_step(u0, v0, hi * h, k1u, k1v, A, M, Q, S, sgn)
    return hi, xu, xv


@njit(cache=True, nogil=True)
def solve(
    u0, v0, A, M, Q, S, sgn,
    t_max, rtol, atol, max_steps,
    targets, strip_u, box_u, box_v, escape,
    section, cyc_tol, cyc_count, cyc_min_amp,
    record,
):
    """Integrate from (u0, v0) until a stopping rule fires.

    ``sgn`` is +1 for forward and -1 for reversed time; the returned time is
    the elapsed (always increasing) time of the integrated flow.

    Stopping rules, checked after each accepted step:
      targets  rows (u, v, radius, arm_radius, inward). A row becomes live once
               the orbit has been farther than ``arm_radius`` from it; it fires
               on entering ``radius`` (and, if ``inward`` > 0, only while the
               field points into the ball). Minimum distances after arming are
               tracked for every row.
      strip_u  fires when u < strip_u (disabled if strip_u <= 0).
      box_u/v  fires when u > box_u or v > box_v.
      escape   fires when u or v exceeds it.
      section  (cu, cv, nu, nv, tu, tv, enabled): crossings of the half-line
               {c + s t, s > 0} are located by bisection and recorded; if
               ``cyc_count`` > 0 the run stops once that many consecutive
               returns differ by less than ``cyc_tol`` relative to their
               distance from c, with amplitude above ``cyc_min_amp``.
    """
    nt = targets.shape[0]
    armed = np.zeros(nt, dtype=np.bool_)
    min_dist = np.full(nt, np.inf)
    for i in range(nt):
        d = math.hypot(u0 - targets[i, T_U], v0 - targets[i, T_V])
        armed[i] = d > targets[i, T_ARM]
        if armed[i]:
            min_dist[i] = d

    cap = 1024 if record else 1
    ts = np.empty(cap)
    us = np.empty(cap)
    vs = np.empty(cap)
    nrec = 0
    if record:
        ts[0] = 0.0
        us[0] = u0
        vs[0] = v0
        nrec = 1

    scap = 64
    sec_t = np.empty(scap)
    sec_u = np.empty(scap)
    sec_v = np.empty(scap)
    nsec = 0
    use_section = section[6] > 0.0
    stable_returns = 0

    t = 0.0
    u = u0
    v = v0
    k1u, k1v = rhs(u, v, A, M, Q, S, sgn)
    h = _initial_step(u, v, k1u, k1v, A, M, Q, S, sgn, rtol, atol)
    h = min(h, t_max)
    err_old = 1e-4
    rejected = False
    nsteps = 0
    status = HORIZON
    hit = -1

    while True:
        if t >= t_max:
            status = HORIZON
            break
        if nsteps >= max_steps:
            status = MAX_STEPS
            break
        if h > t_max - t:
            h = t_max - t
        if h <= 16.0 * 2.220446049250313e-16 * max(1.0, abs(t)):
            status = UNDERFLOW
            break

        un, vn, eu, ev, k7u, k7v = dopri_step(u, v, h, k1u, k1v, A, M, Q, S, sgn)
        nsteps += 1
        su = atol + rtol * max(abs(u), abs(un))
        sv = atol + rtol * max(abs(v), abs(vn))
        err = math.sqrt(0.5 * ((eu / su) ** 2 + (ev / sv) ** 2))
        if not (err <= 1.0):
            if err != err:
                h *= 0.1
            else:
                h *= max(FAC_MIN, SAFETY * err ** -0.2)
            rejected = True
            continue

        clipped = False
        if un < 0.0 or vn < 0.0:
            if un < -atol or vn < -atol:
                # overshoot through an invariant axis
                h *= 0.25
                rejected = True
                continue
            if un < 0.0:
                un = 0.0
            if vn < 0.0:
                vn = 0.0
            clipped = True

        u_old = u
        v_old = v
        t_old = t
        k1u_old = k1u
        k1v_old = k1v
        h_used = h
        t = t + h
        u = un
        v = vn
        if clipped:
            k1u, k1v = rhs(u, v, A, M, Q, S, sgn)
        else:
            k1u = k7u
            k1v = k7v

        e = max(err, 1e-10)
        fac = SAFETY * e ** (-PI_ALPHA) * err_old ** PI_BETA
        fac = min(FAC_MAX, max(FAC_MIN, fac))
        if rejected:
            fac = min(1.0, fac)
        h = h * fac
        err_old = max(err, 1e-4)
        rejected = False

        if record:
            if nrec >= ts.shape[0]:
                ts = _grow(ts, nrec)
                us = _grow(us, nrec)
                vs = _grow(vs, nrec)
            ts[nrec] = t
            us[nrec] = u
            vs[nrec] = v
            nrec += 1

        if use_section:
            cu = section[0]
            cv = section[1]
            s_old = (u_old - cu) * section[2] + (v_old - cv) * section[3]
            s_new = (u - cu) * section[2] + (v - cv) * section[3]
            if (s_old < 0.0 and s_new >= 0.0) or (s_old > 0.0 and s_new <= 0.0):
                lo = 0.0
                hi = 1.0
                xu = u
                xv = v
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    xu, xv, _eu, _ev, _a, _b = dopri_step(
                        u_old, v_old, mid * h_used, k1u_old, k1v_old, A, M, Q, S, sgn
                    )
                    sm = (xu - cu) * section[2] + (xv - cv) * section[3]
                    if (sm < 0.0) == (s_old < 0.0) and sm != 0.0:
                        lo = mid
                    else:
                        hi = mid
                    if hi - lo < 1e-14:
                        break
                xu, xv, _eu, _ev, _a, _b = dopri_step(
                    u_old, v_old, hi * h_used, k1u_old, k1v_old, A, M, Q, S, sgn
                )
                along = (xu - cu) * section[4] + (xv - cv) * section[5]
                if along > 0.0:
                    if nsec >= sec_t.shape[0]:
                        sec_t = _grow(sec_t, nsec)
                        sec_u = _grow(sec_u, nsec)
                        sec_v = _grow(sec_v, nsec)
                    sec_t[nsec] = t_old + hi * h_used
                    sec_u[nsec] = xu
                    sec_v[nsec] = xv
                    nsec += 1
                    if cyc_count > 0 and nsec >= 2:
                        amp = along
                        pu = sec_u[nsec - 2]
                        pv = sec_v[nsec - 2]
                        jump = math.hypot(xu - pu, xv - pv)
                        if amp > cyc_min_amp and jump < cyc_tol * amp:
                            stable_returns += 1
                        else:
                            stable_returns = 0
                        if stable_returns >= cyc_count:
                            status = CYCLE
                            break

        fired = False
        ev_kind = -1
        for i in range(nt):
            du_ = u - targets[i, T_U]
            dv_ = v - targets[i, T_V]
            d = math.hypot(du_, dv_)
            if not armed[i]:
                if d > targets[i, T_ARM]:
                    armed[i] = True
                else:
                    continue
            if d < min_dist[i]:
                min_dist[i] = d
            if d < targets[i, T_RADIUS]:
                if targets[i, T_INWARD] > 0.0 and du_ * k1u + dv_ * k1v >= 0.0:
                    continue
                status = TARGET
                hit = i
                fired = True
                ev_kind = EV_TARGET
                break
        if not fired:
            if strip_u > 0.0 and u < strip_u:
                status = STRIP
                ev_kind = EV_STRIP
            elif u > box_u or v > box_v:
                status = EXIT
                ev_kind = EV_BOX
            elif u > escape or v > escape:
                status = ESCAPE
                break
        if ev_kind >= 0:
            # move the terminal state onto the event surface
            frac, u, v = _locate(
                ev_kind, hit, u_old, v_old, k1u_old, k1v_old, h_used, A, M, Q, S, sgn,
                targets, strip_u, box_u, box_v,
            )
            t = t_old + frac * h_used
            if record:
                ts[nrec - 1] = t
                us[nrec - 1] = u
                vs[nrec - 1] = v
            break

    return (
        status, hit, t, u, v, nsteps,
        ts[:nrec].copy(), us[:nrec].copy(), vs[:nrec].copy(),
        sec_t[:nsec].copy(), sec_u[:nsec].copy(), sec_v[:nsec].copy(),
        min_dist,
    )


@njit(cache=True, parallel=True)
def solve_many(
    u0s, v0s, A, M, Q, S, sgn,
    t_max, rtol, atol, max_steps,
    targets, strip_u, box_u, box_v, escape,
    section, cyc_tol, cyc_count, cyc_min_amp,
):
    """Run :func:`solve` without recording for every start point in parallel."""
    n = u0s.shape[0]
    status = np.empty(n, dtype=np.int64)
    hit = np.empty(n, dtype=np.int64)
    t_end = np.empty(n)
    u_end = np.empty(n)
    v_end = np.empty(n)
    for i in prange(n):
        res = solve(
            u0s[i], v0s[i], A, M, Q, S, sgn,
            t_max, rtol, atol, max_steps,
            targets, strip_u, box_u, box_v, escape,
            section, cyc_tol, cyc_count, cyc_min_amp,
            False,
        )
        status[i] = res[0]
        hit[i] = res[1]
        t_end[i] = res[2]
        u_end[i] = res[3]
        v_end[i] = res[4]
    return status, hit, t_end, u_end, v_end

"""Compiled integration core: Dormand-Prince 5(4) with step clipping and events.

Everything here is numba-jitted and operates on plain arrays.  Damping
coefficients are passed as (kind, params, knots, vals, derivs) tuples so a
single compiled evaluator covers the whole catalog; the user-facing objects
live in :mod:`dwlab.damping`.

Outputs are produced by clipping steps exactly onto the requested times, so
sampled states carry no interpolation error.  Turning-point events are
refined by bisection, re-taking a single clipped step from the last accepted
state per probe.
"""

import math

import numpy as np
from numba import njit

# coefficient kind codes (shared with dwlab.damping)
KIND_CONSTANT = 0
KIND_POWER = 1
KIND_LOG_OVER_T = 2
KIND_FAST_OSC = 3
KIND_BLEND_CONST = 4
KIND_BLEND_LINEAR = 5
KIND_RESONANT = 6

# state-layout codes
FORM_CARTESIAN = 0
FORM_POLAR = 1
FORM_ETA = 2

# Dormand-Prince 5(4) tableau (the classic embedded pair of orders 5 and 4).
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = (
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
)
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
_B1, _B3, _B4, _B5, _B6 = (
    35.0 / 384.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
)
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)

# integration status codes
STATUS_OK = 0
STATUS_MAX_STEPS = 1
STATUS_STEP_UNDERFLOW = 2
STATUS_NONFINITE = 3


@njit(cache=True, nogil=True, inline="always")
def _bisect_right(knots, t):
    lo = 0
    hi = knots.shape[0]
    while lo < hi:
        mid = (lo + hi) // 2
        if t < knots[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True, nogil=True, inline="always")
def _power(amp, p, t):
    # the catalog is dominated by small integer exponents; dodge libm pow
    if p == 1.0:
        return amp / t
    elif p == 2.0:
        return amp / (t * t)
    elif p == -1.0:
        return amp * t
    elif p == -2.0:
        return amp * t * t
    elif p == 0.0:
        return amp
    return amp * t ** (-p)


@njit(cache=True, nogil=True, inline="always")
def eval_damping(t, kind, params, knots, vals, derivs):
    """Evaluate b(t) for one catalog entry.  Pure function of t."""
    if kind == KIND_CONSTANT:
        return params[0]
    elif kind == KIND_POWER:
        return _power(params[0], params[1], t)
    elif kind == KIND_LOG_OVER_T:
        return params[0] / (t * math.log(t))
    elif kind == KIND_FAST_OSC:
        return (params[0] + params[1] * math.sin(t ** params[2])) / t
    elif kind == KIND_BLEND_CONST or kind == KIND_BLEND_LINEAR:
        lo_val = _power(params[0], params[1], t)
        hi_val = _power(params[2], params[3], t)
        n = knots.shape[0]
        i = _bisect_right(knots, t) - 1
        if i < 0:
            i = 0
        if kind == KIND_BLEND_CONST:
            w = vals[i]
        else:
            if i >= n - 1:
                w = vals[n - 1]
            else:
                x0 = knots[i]
                x1 = knots[i + 1]
                s = (t - x0) / (x1 - x0)
                w = vals[i] + s * (vals[i + 1] - vals[i])
        return (1.0 - w) * lo_val + w * hi_val
    elif kind == KIND_RESONANT:
        # phase drift table, cubic Hermite between knots
        a = params[0]
        r = params[1]
        lam = params[2]
        n = knots.shape[0]
        i = _bisect_right(knots, t) - 1
        if i < 0:
            i = 0
        if i > n - 2:
            i = n - 2
        x0 = knots[i]
        dx = knots[i + 1] - x0
        w = (t - x0) / dx
        w2 = w * w
        w3 = w2 * w
        h00 = 2.0 * w3 - 3.0 * w2 + 1.0
        h10 = w3 - 2.0 * w2 + w
        h01 = -2.0 * w3 + 3.0 * w2
        h11 = w3 - w2
        drift = (
            h00 * vals[i]
            + h10 * dx * derivs[i]
            + h01 * vals[i + 1]
            + h11 * dx * derivs[i + 1]
        )
        return (a + r * math.cos(2.0 * (lam * t + drift))) / t
    return 0.0


@njit(cache=True, nogil=True, inline="always")
def _rhs(form, t, y, dy, kind, params, knots, vals, derivs, lams):
    if form == FORM_CARTESIAN:
        b = eval_damping(t, kind, params, knots, vals, derivs)
        k = lams.shape[0]
        for i in range(k):
            u = y[i]
            v = y[k + i]
            dy[i] = v
            dy[k + i] = -b * v - lams[i] * lams[i] * u
    elif form == FORM_POLAR:
        # y = [log rho, h] with theta = lam*t + h
        b = eval_damping(t, kind, params, knots, vals, derivs)
        lam = lams[0]
        th2 = 2.0 * (lam * t + y[1])
        dy[0] = -0.5 * b * (1.0 - math.cos(th2))
        dy[1] = -0.5 * b * math.sin(th2)
    else:
        # FORM_ETA: y = [d] with eta = lam*t + d, self-referential coefficient
        a = params[0]
        r = params[1]
        lam = lams[0]
        eta2 = 2.0 * (lam * t + y[0])
        dy[0] = -((a + r * math.cos(eta2)) / (2.0 * t)) * math.sin(eta2)


@njit(cache=True, nogil=True)
def _step(form, t, y, k1, h, kind, params, knots, vals, derivs, lams, ynew, k7, err,
          w, k2, k3, k4, k5, k6):
    """One DOPRI5 step of size h from (t, y, k1=f(t,y)); fills ynew, k7, err."""
    n = y.shape[0]
    for i in range(n):
        w[i] = y[i] + h * _A21 * k1[i]
    _rhs(form, t + _C2 * h, w, k2, kind, params, knots, vals, derivs, lams)
    for i in range(n):
        w[i] = y[i] + h * (_A31 * k1[i] + _A32 * k2[i])
    _rhs(form, t + _C3 * h, w, k3, kind, params, knots, vals, derivs, lams)
    for i in range(n):
        w[i] = y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
    _rhs(form, t + _C4 * h, w, k4, kind, params, knots, vals, derivs, lams)
    for i in range(n):
        w[i] = y[i] + h * (
            _A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i]
        )
    _rhs(form, t + _C5 * h, w, k5, kind, params, knots, vals, derivs, lams)
    for i in range(n):
        w[i] = y[i] + h * (
            _A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i]
        )
    _rhs(form, t + h, w, k6, kind, params, knots, vals, derivs, lams)
    for i in range(n):
        ynew[i] = y[i] + h * (
            _B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i] + _B6 * k6[i]
        )
    _rhs(form, t + h, ynew, k7, kind, params, knots, vals, derivs, lams)
    for i in range(n):
        err[i] = h * (
            _E1 * k1[i]
            + _E3 * k3[i]
            + _E4 * k4[i]
            + _E5 * k5[i]
            + _E6 * k6[i]
            + _E7 * k7[i]
        )


@njit(cache=True, nogil=True)
def integrate(
    form,
    kind,
    params,
    knots,
    vals,
    derivs,
    lams,
    y0,
    t0,
    t_end,
    rtol,
    atol,
    max_steps,
    h0,
    t_out,
    detect_v_zero,
    v_zero_tol,
):
    """Adaptive DOPRI5 from t0 to t_end with samples clipped onto t_out.

    Returns (Y, accepted, attempted, status, t_event, t_last, y_last).
    t_out must be strictly increasing within (t0, t_end]; a leading point
    equal to t0 is copied from the initial state.  When detect_v_zero is
    true (Cartesian single-mode only), integration stops at the first sign
    change of y[1] and t_event carries the refined root, else NaN.
    """
    n = y0.shape[0]
    nout = t_out.shape[0]
    Y = np.empty((nout, n))
    y = y0.copy()
    t = t0
    iout = 0
    if nout > 0 and t_out[0] == t0:
        for i in range(n):
            Y[0, i] = y0[i]
        iout = 1

    k1 = np.empty(n)
    k7 = np.empty(n)
    err = np.empty(n)
    ynew = np.empty(n)
    yprev = np.empty(n)
    w = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    _rhs(form, t, y, k1, kind, params, knots, vals, derivs, lams)

    h = h0
    if h > t_end - t0:
        h = t_end - t0
    attempted = 0
    accepted = 0
    status = STATUS_OK
    t_event = np.nan

    while t < t_end:
        if attempted >= max_steps:
            status = STATUS_MAX_STEPS
            break
        # clip the step exactly onto the next output time or the endpoint
        at_output = False
        target = t_end
        if iout < nout and t + h >= t_out[iout]:
            target = t_out[iout]
            h_try = target - t
            clipped = True
            at_output = True
        elif t + h >= t_end:
            h_try = t_end - t
            clipped = True
        else:
            h_try = h
            clipped = False
        if h_try <= 1e-14 * max(abs(t), 1.0) and not clipped:
            status = STATUS_STEP_UNDERFLOW
            break

        _step(form, t, y, k1, h_try, kind, params, knots, vals, derivs, lams,
              ynew, k7, err, w, k2, k3, k4, k5, k6)
        attempted += 1

        finite = True
        for i in range(n):
            if not math.isfinite(ynew[i]):
                finite = False
                break
        if not finite:
            errnorm = math.inf
        else:
            acc = 0.0
            for i in range(n):
                ay = abs(y[i])
                ayn = abs(ynew[i])
                sc = atol + rtol * (ay if ay > ayn else ayn)
                q = err[i] / sc
                acc += q * q
            errnorm = math.sqrt(acc / n)

        if errnorm <= 1.0:
            vprev = y[1] if n > 1 else 0.0
            for i in range(n):
                yprev[i] = y[i]
            tprev = t
            t = target if clipped else t + h_try
            for i in range(n):
                y[i] = ynew[i]
                k1[i] = k7[i]
            accepted += 1
            if detect_v_zero and form == FORM_CARTESIAN and n == 2:
                if vprev != 0.0 and (y[1] == 0.0 or (vprev > 0.0) != (y[1] > 0.0)):
                    t_event = _refine_v_zero(
                        form, kind, params, knots, vals, derivs, lams,
                        tprev, yprev, t, v_zero_tol,
                    )
                    break
            if at_output:
                for i in range(n):
                    Y[iout, i] = y[i]
                iout += 1
        elif errnorm == math.inf and h_try <= 1e-14 * max(abs(t), 1.0):
            status = STATUS_NONFINITE
            break

        if errnorm == 0.0:
            fac = 10.0
        else:
            fac = 0.9 * errnorm ** (-0.2)
            if fac > 10.0:
                fac = 10.0
            elif fac < 0.2:
                fac = 0.2
        hnew = h_try * fac
        if not clipped or hnew < h:
            h = hnew

    return Y, accepted, attempted, status, t_event, t, y


@njit(cache=True, nogil=True)
def _refine_v_zero(form, kind, params, knots, vals, derivs, lams, t_lo, y_lo, t_hi, tol):
    """Bisect the v=0 crossing inside one accepted step.

    Each probe re-takes a single clipped DOPRI5 step from (t_lo, y_lo); the
    sub-step is shorter than the accepted one, so its error is below the
    step's own tolerance.
    """
    n = y_lo.shape[0]
    k1 = np.empty(n)
    k7 = np.empty(n)
    err = np.empty(n)
    ym = np.empty(n)
    w = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    _rhs(form, t_lo, y_lo, k1, kind, params, knots, vals, derivs, lams)
    v_lo = y_lo[1]
    lo = t_lo
    hi = t_hi
    tm = 0.5 * (lo + hi)
    for _ in range(200):
        tm = 0.5 * (lo + hi)
        if tm == lo or tm == hi:
            break
        _step(form, t_lo, y_lo, k1, tm - t_lo, kind, params, knots, vals, derivs, lams,
              ym, k7, err, w, k2, k3, k4, k5, k6)
        vm = ym[1]
        if abs(vm) <= tol:
            return tm
        if (vm > 0.0) == (v_lo > 0.0):
            lo = tm
        else:
            hi = tm
    return 0.5 * (lo + hi)

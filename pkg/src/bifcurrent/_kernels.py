"""Compiled inner loops for the quadratic family.

Everything here works on flat complex128 arrays and is free of Python
objects so that numba can release the GIL.  The public wrappers live in
:mod:`bifcurrent.dynamics` and :mod:`bifcurrent.roots`.
"""

import math

import numpy as np
from numba import njit

OVERFLOW_GUARD = 1e150
_GUARD2 = OVERFLOW_GUARD * OVERFLOW_GUARD


@njit(cache=True, nogil=True)
def _abs2(w):
    return w.real * w.real + w.imag * w.imag


@njit(cache=True, nogil=True)
def escape_radius(c):
    return max(abs(c), 2.0) + 1e-12


@njit(cache=True, nogil=True)
def green_kernel(c, z, tol, n_cap, g, err, n_used):
    """Green function g_c(z) with a certified truncation bound.

    Once |z_n| exceeds R(c) = max(|c|, 2) the remaining tail of
    sum 2^-(k+1) ln|1 + c/z_k^2| is bounded by 2^(1-n) |c| / |z_n|^2.
    """
    for i in range(c.shape[0]):
        ci = c[i]
        w = z[i]
        r = escape_radius(ci)
        ac = abs(ci)
        escaped = False
        n = 0
        g[i] = 0.0
        err[i] = 0.0
        n_used[i] = n_cap
        while n <= n_cap:
            a = abs(w)
            if escaped or a > r:
                escaped = True
                bound = math.ldexp(2.0 * ac / a / a, -n)
                if bound < tol or a > OVERFLOW_GUARD or n == n_cap:
                    g[i] = math.ldexp(math.log(a), -n)
                    err[i] = bound
                    n_used[i] = n
                    break
            if n == n_cap:
                break
            w = w * w + ci
            n += 1


@njit(cache=True, nogil=True)
def membership_kernel(c, z, n_cap, state, n_used):
    """Tri-state escape test: 0 inside, 1 outside, 2 undetermined.

    Inside requires the orbit to stop creeping outward: the maximum modulus
    over the second half of the run may not exceed the first-half maximum
    by more than 1e-9.
    """
    half = n_cap // 2
    for i in range(c.shape[0]):
        ci = c[i]
        w = z[i]
        r = escape_radius(ci)
        r2 = r * r
        first_max = _abs2(w)
        second_max = 0.0
        state[i] = 0
        n_used[i] = n_cap
        for n in range(1, n_cap + 1):
            w = w * w + ci
            a2 = _abs2(w)
            if a2 > r2:
                state[i] = 1
                n_used[i] = n
                break
            if n <= half:
                if a2 > first_max:
                    first_max = a2
            elif a2 > second_max:
                second_max = a2
        if state[i] == 0 and math.sqrt(second_max) > math.sqrt(first_max) + 1e-9:
            state[i] = 2


@njit(cache=True, nogil=True)
def jet_kernel(c, z, n, value, dz, dc, dzz, overflow_step):
    """Forward jets of p_c^n at (c, z).

    dzz is the second z-derivative, needed for contact-order checks.
    overflow_step is -1 unless |p_c^k(z)| passed the guard at step k.
    """
    for i in range(c.shape[0]):
        ci = c[i]
        w = z[i]
        d1 = 1.0 + 0j
        d2 = 0.0 + 0j
        e1 = 0.0 + 0j
        overflow_step[i] = -1
        for k in range(1, n + 1):
            d2 = 2.0 * (d1 * d1 + w * d2)
            e1 = 2.0 * w * e1 + 1.0
            d1 = 2.0 * w * d1
            w = w * w + ci
            if _abs2(w) > _GUARD2:
                overflow_step[i] = k
                break
        value[i] = w
        dz[i] = d1
        dc[i] = e1
        dzz[i] = d2


@njit(cache=True, nogil=True)
def qk_kernel(k, c, q, dq, overflow_step):
    """Q_k(c) = p_c^k(0) and its c-derivative, Q_1 = c, dQ_1 = 1."""
    for i in range(c.shape[0]):
        ci = c[i]
        a = ci
        da = 1.0 + 0j
        overflow_step[i] = -1
        for j in range(1, k):
            da = 2.0 * a * da + 1.0
            a = a * a + ci
            if _abs2(a) > _GUARD2:
                overflow_step[i] = j + 1
                break
        q[i] = a
        dq[i] = da


@njit(cache=True, nogil=True)
def _newton_step(k, c, alpha, beta):
    # Overflow-safe Newton step for Q_k(c) - alpha c - beta.  Past the guard,
    # Q_{j+1}/Q'_{j+1} = Q_j/(2 Q'_j) up to a relative error below 1e-290.
    a = c
    da = 1.0 + 0j
    for j in range(1, k):
        da = 2.0 * a * da + 1.0
        a = a * a + c
        if _abs2(a) > _GUARD2:
            return math.ldexp(1.0, -(k - 1 - j)) * (a / da)
    return (a - alpha * c - beta) / (da - alpha)


@njit(cache=True, nogil=True)
def newton_kernel(k, starts, alpha, beta, maxit, tol, out, converged, iters):
    for i in range(starts.shape[0]):
        c = starts[i]
        ok = False
        it = 0
        while it < maxit:
            s = _newton_step(k, c, alpha, beta)
            if not (math.isfinite(s.real) and math.isfinite(s.imag)):
                break
            c = c - s
            it += 1
            lim = tol * (1.0 + abs(c))
            if _abs2(s) < lim * lim:
                ok = True
                break
        out[i] = c
        converged[i] = ok
        iters[i] = it


@njit(cache=True, nogil=True)
def newton_ratio_kernel(k, c, alpha, beta, out):
    for i in range(c.shape[0]):
        out[i] = _newton_step(k, c[i], alpha, beta)


@njit(cache=True, nogil=True)
def log_residual_kernel(c, a_vals, b_vals, nmax, out):
    """out[n-1, i] = ln|b(c) Q_n(c) - a(c)| for n = 1..nmax.

    After the overflow guard the split ln|Q_n| + ln|b - a/Q_n| is used,
    with ln|Q_{n+1}| = 2 ln|Q_n| (relative error below 1e-290).
    """
    for i in range(c.shape[0]):
        ci = c[i]
        a = a_vals[i]
        b = b_vals[i]
        q = ci
        logq = 0.0
        big = False
        for n in range(1, nmax + 1):
            if n > 1:
                if big:
                    logq = 2.0 * logq
                else:
                    q = q * q + ci
                    # |q| <= 1e300 here, so abs() cannot overflow
                    if abs(q) > OVERFLOW_GUARD:
                        big = True
                        logq = math.log(abs(q))
            if big:
                # |a / Q_n| < |a| 1e-150: negligible against any nonzero b
                if b != 0:
                    out[n - 1, i] = logq + math.log(abs(b))
                elif a != 0:
                    out[n - 1, i] = math.log(abs(a))
                else:
                    out[n - 1, i] = -745.0
            else:
                r = b * q - a
                ar = abs(r)
                out[n - 1, i] = math.log(ar) if ar > 0 else -745.0


def warm_up():
    """Compile every kernel once on tiny inputs."""
    c = np.zeros(1, dtype=np.complex128)
    f = np.zeros(1)
    ii = np.zeros(1, dtype=np.int64)
    green_kernel(c, c, 1e-12, 4, f, f.copy(), ii)
    membership_kernel(c, c, 4, ii.copy(), ii.copy())
    jet_kernel(c, c, 1, c.copy(), c.copy(), c.copy(), c.copy(), ii.copy())
    qk_kernel(1, c, c.copy(), c.copy(), ii.copy())
    newton_kernel(1, c + 1.0, 0j, 0j, 2, 1e-14, c.copy(), np.zeros(1, np.bool_), ii.copy())
    newton_ratio_kernel(1, c + 1.0, 0j, 0j, c.copy())
    log_residual_kernel(c + 1.0, c.copy(), c + 1.0, 1, np.zeros((1, 1)))

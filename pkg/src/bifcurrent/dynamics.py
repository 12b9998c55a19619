"""Iteration of p_c(z) = z^2 + c, derivative jets, Green functions and
membership tests for the filled Julia sets K_c and the Mandelbrot set.

Scalar functions take and return Python complex numbers; the ``*_array``
variants broadcast over numpy arrays and run in compiled loops.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Union

import numpy as np

from bifcurrent import _kernels
from bifcurrent._kernels import OVERFLOW_GUARD

DEFAULT_TOL = 1e-12
DEFAULT_N_CAP = 4096


@dataclass(frozen=True)
class Overflow:
    """Marker for an orbit whose modulus passed ``OVERFLOW_GUARD``."""

    step: int


@dataclass(frozen=True)
class JetValue:
    value: complex
    dz: complex
    dc: complex
    n: int
    dzz: complex = 0j
    overflow: Overflow | None = None


@dataclass(frozen=True)
class GreenValue:
    g: float
    error_bound: float
    n_used: int


class State(enum.Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class Membership:
    state: State
    n_used: int


_STATES = (State.INSIDE, State.OUTSIDE, State.UNDETERMINED)


def escape_radius(c: complex) -> float:
    return max(abs(c), 2.0) + 1e-12


def iterate(c: complex, z: complex, n: int) -> Union[complex, Overflow]:
    """Return p_c^n(z), or an :class:`Overflow` marker carrying the step."""
    if n < 0:
        raise ValueError("n must be non-negative")
    c, z = complex(c), complex(z)
    for k in range(1, n + 1):
        z = z * z + c
        if abs(z) > OVERFLOW_GUARD:
            return Overflow(k)
    return z


def _as_c128(x) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(x, dtype=np.complex128).ravel())


def jet_iterate_array(c, z, n: int):
    """Vectorised jets.

    Returns
    -------
    value, dz, dc, dzz : ndarray
        p_c^n(z), its first and second z-derivatives and its c-derivative,
        each shaped like the broadcast of ``c`` and ``z``.
    overflow_step : ndarray of int
        -1 where no overflow happened.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    c, z = np.broadcast_arrays(np.asarray(c, np.complex128), np.asarray(z, np.complex128))
    shape = c.shape
    cf, zf = _as_c128(c), _as_c128(z)
    value = np.empty_like(cf)
    dz = np.empty_like(cf)
    dc = np.empty_like(cf)
    dzz = np.empty_like(cf)
    ovf = np.empty(cf.shape, dtype=np.int64)
    _kernels.jet_kernel(cf, zf, n, value, dz, dc, dzz, ovf)
    return (value.reshape(shape), dz.reshape(shape), dc.reshape(shape),
            dzz.reshape(shape), ovf.reshape(shape))


def jet_iterate(c: complex, z: complex, n: int) -> JetValue:
    value, dz, dc, dzz, ovf = jet_iterate_array(c, z, n)
    step = int(ovf)
    return JetValue(complex(value), complex(dz), complex(dc), n, complex(dzz),
                    Overflow(step) if step >= 0 else None)


def green_array(c, z, tol: float = DEFAULT_TOL, n_cap: int = DEFAULT_N_CAP):
    """Vectorised :func:`green`; returns ``(g, error_bound, n_used)`` arrays."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    c, z = np.broadcast_arrays(np.asarray(c, np.complex128), np.asarray(z, np.complex128))
    shape = c.shape
    cf, zf = _as_c128(c), _as_c128(z)
    g = np.empty(cf.shape)
    err = np.empty(cf.shape)
    n_used = np.empty(cf.shape, dtype=np.int64)
    _kernels.green_kernel(cf, zf, float(tol), int(n_cap), g, err, n_used)
    return g.reshape(shape), err.reshape(shape), n_used.reshape(shape)


def green(c: complex, z: complex, tol: float = DEFAULT_TOL,
          n_cap: int = DEFAULT_N_CAP) -> GreenValue:
    """Dynamical Green function g_c(z) = lim 2^-n ln+|p_c^n(z)|.

    A non-escaping orbit yields ``g = 0`` with ``error_bound = 0`` and
    ``n_used = n_cap``.
    """
    g, err, n_used = green_array(c, z, tol, n_cap)
    return GreenValue(float(g), float(err), int(n_used))


def green_param(c: complex, tol: float = DEFAULT_TOL,
                n_cap: int = DEFAULT_N_CAP) -> tuple[GreenValue, float]:
    """g_c(0) together with g_c(c) = 2 g_c(0), the potential of m."""
    g0 = green(c, 0j, tol, n_cap)
    return g0, 2.0 * g0.g


def green_param_array(c, tol: float = DEFAULT_TOL, n_cap: int = DEFAULT_N_CAP) -> np.ndarray:
    g, _, _ = green_array(c, np.zeros_like(np.asarray(c, np.complex128)), tol, n_cap)
    return g


def membership_array(c, z, n_cap: int = DEFAULT_N_CAP):
    """Tri-state codes (0 inside, 1 outside, 2 undetermined) and step counts."""
    if n_cap < 1:
        raise ValueError("n_cap must be at least 1")
    c, z = np.broadcast_arrays(np.asarray(c, np.complex128), np.asarray(z, np.complex128))
    shape = c.shape
    cf, zf = _as_c128(c), _as_c128(z)
    state = np.empty(cf.shape, dtype=np.int64)
    n_used = np.empty(cf.shape, dtype=np.int64)
    _kernels.membership_kernel(cf, zf, int(n_cap), state, n_used)
    return state.reshape(shape), n_used.reshape(shape)


def in_filled_julia(c: complex, z: complex, n_cap: int = DEFAULT_N_CAP) -> Membership:
    state, n_used = membership_array(c, z, n_cap)
    return Membership(_STATES[int(state)], int(n_used))


def in_mandelbrot(c: complex, n_cap: int = DEFAULT_N_CAP) -> Membership:
    """Critical-orbit test: c is in M iff the orbit of 0 stays bounded."""
    return in_filled_julia(c, 0j, n_cap)

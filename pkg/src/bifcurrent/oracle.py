"""Coefficient-space cross-check for the parameter equations.

The dense coefficients of Q_k are non-negative integers whose size grows
like Q_k(1), so evaluating them in double precision loses every digit near
|c| = 2.  The Aberth iteration below therefore evaluates p/p' with exact
integer coefficients in multiprecision (gmpy2) and only does the pairwise
correction in double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import gmpy2
import numpy as np
from scipy.optimize import linear_sum_assignment

from bifcurrent.roots import LineParams

MAX_COEFF_K = 14


def qk_coeffs(k: int) -> list[int]:
    """Exact ascending coefficients of Q_k; ``qk_coeffs(3) == [0, 1, 1, 2, 1]``.

    Squaring uses Kronecker substitution: pack into one integer, square,
    unpack.  All coefficients are non-negative so the slots never borrow.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > MAX_COEFF_K:
        raise ValueError(f"dense coefficients are limited to k <= {MAX_COEFF_K}")
    a = [0, 1]
    for _ in range(k - 1):
        width = (2 * max(a).bit_length() + len(a).bit_length() + 8) // 8 + 1
        packed = int.from_bytes(b"".join(x.to_bytes(width, "little") for x in a), "little")
        sq = (packed * packed).to_bytes(width * 2 * len(a), "little")
        b = [int.from_bytes(sq[i * width:(i + 1) * width], "little")
             for i in range(2 * len(a) - 1)]
        b[1] += 1
        a = b
    return a


def line_coeffs(k: int, line: LineParams) -> list:
    """Ascending coefficients of Q_k(c) - alpha c - beta (complex entries
    only where the line contributes)."""
    a: list = list(qk_coeffs(k))
    a[0] = a[0] - line.beta
    a[1] = a[1] - line.alpha
    return a


def companion_roots(coeffs) -> np.ndarray:
    """Eigenvalues of the companion matrix of an ascending coefficient list.

    Only trustworthy while the coefficients are modest (k <= 4 or so).
    """
    c = np.asarray([complex(x) for x in coeffs])
    while len(c) > 1 and c[-1] == 0:
        c = c[:-1]
    d = len(c) - 1
    if d < 1:
        return np.empty(0, dtype=np.complex128)
    comp = np.zeros((d, d), dtype=np.complex128)
    comp[1:, :-1] = np.eye(d - 1)
    comp[:, -1] = -c[:-1] / c[-1]
    return np.linalg.eigvals(comp)


@dataclass
class AberthResult:
    roots: np.ndarray
    iterations: int
    converged: bool
    precision: int


def _log2_qk_at(k: int, r: float) -> float:
    # log2 Q_k(r) for r > 0, which bounds sum |a_i| r^i
    q = r
    for j in range(1, k):
        if q > 1e150:
            return math.log2(q) * 2 ** (k - j)
        q = q * q + r
    return math.log2(max(q, 1e-300))


def aberth_roots(k: int, line: LineParams, maxit: int = 2000, tol: float = 1e-14,
                 center: complex = -0.5, radius: float = 1.8) -> AberthResult:
    """Roots of Q_k(c) = alpha c + beta by Aberth-Ehrlich iteration on the
    dense coefficients, started from a circle (independent of the Newton
    path in :mod:`bifcurrent.roots`)."""
    coeffs = line_coeffs(k, line)
    d = len(coeffs) - 1
    prec = int(_log2_qk_at(k, abs(center) + radius + 0.1)) + 128
    ctx = gmpy2.get_context()
    saved = ctx.precision
    ctx.precision = max(prec, 64)
    try:
        desc = [gmpy2.mpc(complex(x)) if isinstance(x, complex) else gmpy2.mpc(x)
                for x in reversed(coeffs)]
        ddesc = [desc[i] * (d - i) for i in range(d)]
        z = center + radius * np.exp(1j * (2 * np.pi * np.arange(d) / d + 0.4))
        active = np.ones(d, dtype=bool)
        ratio = np.empty(d, dtype=np.complex128)
        it = 0
        for it in range(1, maxit + 1):
            idx = np.nonzero(active)[0]
            if len(idx) == 0:
                break
            for m in idx:
                x = gmpy2.mpc(complex(z[m]))
                p = desc[0]
                dp = ddesc[0]
                for i in range(1, d):
                    p = p * x + desc[i]
                    dp = dp * x + ddesc[i]
                p = p * x + desc[d]
                ratio[m] = complex(p / dp)
            diff = z[idx, None] - z[None, :]
            diff[np.arange(len(idx)), idx] = np.inf
            s = (1.0 / diff).sum(axis=1)
            w = ratio[idx] / (1.0 - ratio[idx] * s)
            z[idx] -= w
            active[idx[np.abs(w) < tol * (1 + np.abs(z[idx]))]] = False
        return AberthResult(z, it, not active.any(), ctx.precision)
    finally:
        ctx.precision = saved


def multiset_distance(a, b) -> float:
    """Largest displacement in a minimum-cost matching of two equal-size
    point sets (inf when the sizes differ)."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if len(a) != len(b):
        return float("inf")
    if len(a) == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())

"""Certified roots of Q_k(c) = alpha c + beta, inverse orbits and Brolin
sampling.

Q_k(c) := p_c^k(0) is never expanded into coefficients here: the solver
works on the iterated evaluation, which stays well conditioned at degrees
where the dense coefficients span hundreds of decimal orders.
"""

from __future__ import annotations

import cmath
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from bifcurrent import _kernels
from bifcurrent.dynamics import Overflow
from bifcurrent.measures import AtomCloud

log = logging.getLogger(__name__)

MAX_SOLVE_K = 20


@dataclass(frozen=True)
class LineParams:
    """The affine line z = alpha c + beta in C^2."""

    alpha: complex = 1 / 20
    beta: complex = 1.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", complex(self.beta))

    def __call__(self, c):
        return self.alpha * c + self.beta

    @property
    def admissible(self) -> bool:
        """Whether the line lies in the box 1e-2 <= |alpha| <= 1e-1, |beta| <= 2."""
        return 1e-2 <= abs(self.alpha) <= 1e-1 and abs(self.beta) <= 2

    @classmethod
    def random_admissible(cls, rng: np.random.Generator) -> "LineParams":
        alpha = rng.uniform(1e-2, 1e-1) * cmath.exp(2j * np.pi * rng.uniform())
        beta = 2 * np.sqrt(rng.uniform()) * cmath.exp(2j * np.pi * rng.uniform())
        return cls(alpha, beta)


DEFAULT_LINE = LineParams(1 / 20, 1.0)


def qk_eval_array(k: int, c):
    """Q_k and dQ_k/dc on an array; returns ``(q, dq, overflow_step)``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    c = np.asarray(c, dtype=np.complex128)
    flat = np.ascontiguousarray(c.ravel())
    q = np.empty_like(flat)
    dq = np.empty_like(flat)
    ovf = np.empty(flat.shape, dtype=np.int64)
    _kernels.qk_kernel(k, flat, q, dq, ovf)
    return q.reshape(c.shape), dq.reshape(c.shape), ovf.reshape(c.shape)


def qk_eval(k: int, c: complex):
    """``(Q_k(c), dQ_k(c))``, or an :class:`Overflow` marker."""
    q, dq, ovf = qk_eval_array(k, c)
    if int(ovf) >= 0:
        return Overflow(int(ovf))
    return complex(q), complex(dq)


class Uncertified(Exception):
    """The solver could not certify the full root count.

    The partial :class:`RootSet` is attached as ``result``.
    """

    def __init__(self, result: "RootSet"):
        super().__init__(
            f"k={result.k}: found {len(result.roots)} of {result.expected_count} roots")
        self.result = result


@dataclass
class SolveOptions:
    dedup_radius: float = 1e-9
    residual_factor: float = 1e-8
    newton_tol: float = 1e-14
    radii: tuple = (2.2, 2.6, 3.0, 3.5)
    starts_per_root: int = 4
    retries: int = 3
    completion_maxit: int = 600
    crosscheck: bool = False


@dataclass
class RootSet:
    roots: np.ndarray
    k: int
    line: LineParams
    expected_count: int
    max_residual: float
    min_separation: float
    certified: bool
    n_starts: int = 0
    n_completed: int = 0
    crosscheck_error: float | None = None
    notes: list = field(default_factory=list)

    def residuals(self) -> np.ndarray:
        return root_residuals(self.k, self.line, self.roots)


def root_residuals(k: int, line: LineParams, roots) -> np.ndarray:
    """Scaled residuals |Q_k(c) - a(c)| / (1 + |dQ_k(c)|)."""
    roots = np.asarray(roots, dtype=np.complex128)
    q, dq, ovf = qk_eval_array(k, roots)
    res = np.abs(q - line(roots)) / (1 + np.abs(dq))
    res[ovf >= 0] = np.inf
    return res


def lexsort_complex(z: np.ndarray) -> np.ndarray:
    return z[np.lexsort((z.imag, z.real))]


def dedup_points(z: np.ndarray, radius: float) -> np.ndarray:
    """Greedy clustering in lexicographic order; one representative per
    ball of the given radius."""
    z = lexsort_complex(np.asarray(z, dtype=np.complex128))
    if len(z) == 0:
        return z
    tree = cKDTree(np.column_stack([z.real, z.imag]))
    taken = np.zeros(len(z), dtype=bool)
    keep = []
    for i in range(len(z)):
        if taken[i]:
            continue
        taken[tree.query_ball_point([z[i].real, z[i].imag], radius)] = True
        keep.append(i)
    return z[np.array(keep, dtype=np.int64)]


def min_separation(z: np.ndarray) -> float:
    if len(z) < 2:
        return float("inf")
    tree = cKDTree(np.column_stack([z.real, z.imag]))
    d, _ = tree.query(np.column_stack([z.real, z.imag]), k=2)
    return float(d[:, 1].min())


def _start_points(d: int, radii, per_root: int) -> np.ndarray:
    per_circle = max(1, per_root * d // len(radii))
    base = np.arange(per_circle)
    circles = [r * np.exp(2j * np.pi * (base + i / len(radii)) / per_circle)
               for i, r in enumerate(radii)]
    return np.concatenate(circles)


def _newton(k, starts, line, maxit, tol):
    starts = np.ascontiguousarray(starts, dtype=np.complex128)
    out = np.empty_like(starts)
    conv = np.zeros(starts.shape, dtype=np.bool_)
    its = np.zeros(starts.shape, dtype=np.int64)
    _kernels.newton_kernel(k, starts, line.alpha, line.beta, maxit, tol, out, conv, its)
    return out, conv, its


def _deflated_completion(k, line, found, seeds, maxit, tol):
    # Newton on Q_k - a divided implicitly by the known roots and by the
    # other unknowns (Maehly/Aberth correction); no coefficients involved.
    z = np.array(seeds, dtype=np.complex128)
    ratio = np.empty_like(z)
    for _ in range(maxit):
        _kernels.newton_ratio_kernel(k, z, line.alpha, line.beta, ratio)
        # coincident or converged points give inf/nan steps, zeroed below
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            inv = 1.0 / ratio
            defl = (1.0 / (z[:, None] - found[None, :])).sum(axis=1) if len(found) else 0
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, np.inf)
            defl = defl + (1.0 / diff).sum(axis=1)
            w = 1.0 / (inv - defl)
        w[~np.isfinite(w)] = 0
        z = z - w
        if np.all(np.abs(w) < tol * (1 + np.abs(z))):
            break
    return z


def solve_qk_eq(k: int, line: LineParams = DEFAULT_LINE,
                opts: SolveOptions | None = None) -> RootSet:
    """All 2^(k-1) solutions of Q_k(c) = alpha c + beta.

    Newton iteration multi-started on concentric circles, followed when
    needed by implicitly deflated Newton for the roots no start reached.
    Raises :class:`Uncertified` if the count or residuals cannot be
    certified after the retry budget.
    """
    if not 1 <= k <= MAX_SOLVE_K:
        raise ValueError(f"k must be in [1, {MAX_SOLVE_K}]")
    opts = opts or SolveOptions()
    d = 2 ** (k - 1)
    found = np.empty(0, dtype=np.complex128)
    n_starts = 0
    n_completed = 0
    for attempt in range(opts.retries + 1):
        per_root = opts.starts_per_root * 2 ** attempt
        starts = _start_points(d, opts.radii, per_root)
        n_starts += len(starts)
        z, conv, _ = _newton(k, starts, line, maxit=2 * d + 200, tol=opts.newton_tol)
        candidates = np.concatenate([found, z[conv]])
        found = _certified_unique(k, line, candidates, opts)
        missing = d - len(found)
        if missing > 0:
            stalled = z[~conv]
            stalled = stalled[np.isfinite(stalled)]
            if len(stalled) >= missing:
                seeds = stalled[np.linspace(0, len(stalled) - 1, missing).astype(int)]
            else:
                seeds = 2.2 * np.exp(2j * np.pi * (np.arange(missing) + 0.37) / missing)
            extra = _deflated_completion(k, line, found, seeds, opts.completion_maxit,
                                         opts.newton_tol)
            extra, conv2, _ = _newton(k, extra, line, maxit=50, tol=opts.newton_tol)
            before = len(found)
            found = _certified_unique(k, line, np.concatenate([found, extra[conv2]]), opts)
            n_completed += len(found) - before
        if len(found) == d:
            break
        log.info("k=%d attempt %d: %d of %d roots", k, attempt, len(found), d)
    # polish once more from the deduplicated set
    polished, conv, _ = _newton(k, found, line, maxit=8, tol=opts.newton_tol)
    found = np.where(conv, polished, found)
    found = lexsort_complex(found)
    res = root_residuals(k, line, found)
    sep = min_separation(found)
    result = RootSet(
        roots=found, k=k, line=line, expected_count=d,
        max_residual=float(res.max()) if len(res) else 0.0,
        min_separation=sep,
        certified=(len(found) == d and bool(np.all(res <= opts.residual_factor))
                   and sep > opts.dedup_radius),
        n_starts=n_starts, n_completed=n_completed)
    if opts.crosscheck and k <= 10:
        from bifcurrent.oracle import aberth_roots, multiset_distance
        oracle = aberth_roots(k, line)
        result.crosscheck_error = multiset_distance(found, oracle.roots)
    if not result.certified:
        raise Uncertified(result)
    return result


def _certified_unique(k, line, candidates, opts):
    candidates = candidates[np.isfinite(candidates)]
    if len(candidates) == 0:
        return candidates
    res = root_residuals(k, line, candidates)
    return dedup_points(candidates[res <= opts.residual_factor], opts.dedup_radius)


def inverse_orbit_tree(c: complex, w: complex, j: int) -> np.ndarray:
    """The multiset p_c^{-j}(w), 2^j entries, via z -> +-sqrt(z - c).

    Coincident preimages (critical collisions) are kept with multiplicity.
    """
    if j < 0:
        raise ValueError("j must be non-negative")
    zs = np.array([w], dtype=np.complex128)
    for _ in range(j):
        s = np.sqrt(zs - c)
        zs = np.stack([s, -s], axis=1).ravel()
    return zs


def sample_brolin(c: complex, z0: complex = 1.0, count: int = 2 ** 16,
                  burn_in: int = 64, seed: int = 0) -> AtomCloud:
    """Equal-weight atoms from a seeded random backward walk under p_c.

    The empirical measure converges to the equilibrium measure mu_c of K_c.
    """
    if count < 1:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    signs = rng.integers(0, 2, size=count + burn_in)
    c = complex(c)
    z = complex(z0)
    out = np.empty(count, dtype=np.complex128)
    for i in range(count + burn_in):
        z = cmath.sqrt(z - c)
        if signs[i]:
            z = -z
        if i >= burn_in:
            out[i - burn_in] = z
    return AtomCloud(out, np.full(count, 1.0 / count))

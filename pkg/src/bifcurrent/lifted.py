"""The lifted map on (point, tangent direction) pairs, vertical tangencies
of pulled-back lines, and inverse-branch tracing over parameter disks.

Directions are stored projectively as a unit pair (v1, v2): the c- and
z-components of a tangent vector.  The vertical hypersurface is v1 = 0.
The differential of F^n(c, z) = (c, p_c^n(z)) acts by

    (v1, v2) -> (v1, dc * v1 + dz * v2)

with (dz, dc) the partial derivatives of p_c^n, which keeps v1 = 0 fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from bifcurrent.dynamics import Overflow, green_param_array, jet_iterate_array
from bifcurrent.measures import AtomCloud
from bifcurrent.parallel import pmap
from bifcurrent.roots import (DEFAULT_LINE, LineParams, SolveOptions, Uncertified,
                              inverse_orbit_tree, solve_qk_eq)


@dataclass(frozen=True)
class TangentChartPoint:
    c: complex
    z: complex
    v1: complex
    v2: complex

    def __post_init__(self):
        v1, v2 = complex(self.v1), complex(self.v2)
        norm = math.hypot(abs(v1), abs(v2))
        if norm == 0:
            raise ValueError("direction (0, 0) is not a projective point")
        object.__setattr__(self, "c", complex(self.c))
        object.__setattr__(self, "z", complex(self.z))
        object.__setattr__(self, "v1", v1 / norm)
        object.__setattr__(self, "v2", v2 / norm)

    @property
    def t(self) -> complex:
        """Chart coordinate v1/v2 (complex infinity when v2 = 0)."""
        if self.v2 == 0:
            return complex(math.inf, 0)
        return self.v1 / self.v2

    def direction_distance(self, other: "TangentChartPoint") -> float:
        """Projective cross product |v1 w2 - v2 w1| of the unit directions."""
        return abs(self.v1 * other.v2 - self.v2 * other.v1)


class DegenerateDirection(ValueError):
    """The differential kills the direction (a vertical vector at a
    critical point of p_c^n), so its image is not a projective point."""


def _real_scale(v, s):
    # complex / real through the parts: numpy's complex division overflows
    # for subnormal divisors even when the quotient is of order one
    return v.real / s + 1j * (v.imag / s)


def _normalize(v1, v2):
    """Unit representative of [v1 : v2]; a zero vector gives (nan, nan)."""
    v1 = np.asarray(v1, dtype=np.complex128)
    v2 = np.asarray(v2, dtype=np.complex128)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.maximum(np.abs(v1), np.abs(v2))
        v1, v2 = _real_scale(v1, s), _real_scale(v2, s)
        norm = np.hypot(np.abs(v1), np.abs(v2))
        return _real_scale(v1, norm), _real_scale(v2, norm)


def lift_iterate_array(c, z, v1, v2, n: int):
    """Vectorised lifted map; returns ``(z_n, v1_n, v2_n, overflow_step)``.

    Directions sent to the zero vector come back as nan.
    """
    value, dz, dc, _, ovf = jet_iterate_array(c, z, n)
    v1 = np.asarray(v1, dtype=np.complex128)
    v2 = np.asarray(v2, dtype=np.complex128)
    w1, w2 = _normalize(v1, dc * v1 + dz * v2)
    return value, w1, w2, ovf


def lift_iterate(pt: TangentChartPoint, n: int):
    """Image of ``pt`` under the n-th lifted map, or an :class:`Overflow`.

    Raises :class:`DegenerateDirection` when the direction is annihilated.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    value, w1, w2, ovf = lift_iterate_array(pt.c, pt.z, pt.v1, pt.v2, n)
    if int(ovf) >= 0:
        return Overflow(int(ovf))
    if np.isnan(w1) or np.isnan(w2):
        raise DegenerateDirection(f"direction at ({pt.c}, {pt.z}) is annihilated")
    return TangentChartPoint(pt.c, complex(value), complex(w1), complex(w2))


def projective_cross(v1, v2, w1, w2):
    return np.abs(v1 * w2 - v2 * w1)


# -- vertical tangencies ----------------------------------------------------


def tangency_weight(n: int) -> float:
    return 2.0 / (n * 2 ** n)


def vertical_tangencies(n: int, line: LineParams = DEFAULT_LINE,
                        opts: SolveOptions | None = None,
                        threads: int | None = None) -> AtomCloud:
    """Points of F^{-n}(line) with a vertical tangent, as a weighted cloud.

    For each depth j < n and each root c of Q_{n-j}(c) = a(c), the fiber
    atoms are the 2^j solutions of p_c^j(z) = 0; every atom weighs
    2 / (n 2^n), so a certified cloud has n 2^(n-1) atoms and mass 1.
    Atoms are labelled with j and sorted lexicographically.
    """
    if not 1 <= n <= 20:
        raise ValueError("n must be in [1, 20]")

    def solve(j):
        try:
            return solve_qk_eq(n - j, line, opts), True
        except Uncertified as exc:
            return exc.result, False

    results = pmap(solve, range(n), threads)
    certified = all(ok for _, ok in results)
    pts, labels = [], []
    for j, (rs, _) in enumerate(results):
        for c in rs.roots:
            zs = inverse_orbit_tree(c, 0j, j)
            pts.append(np.column_stack([np.full(len(zs), c), zs]))
            labels.append(np.full(len(zs), j))
    points = np.concatenate(pts) if pts else np.empty((0, 2), np.complex128)
    labels = np.concatenate(labels) if labels else np.empty(0, np.int64)
    cloud = AtomCloud(points, np.full(len(points), tangency_weight(n)), certified, labels)
    return cloud.sorted()


def tangency_count(n: int, line: LineParams = DEFAULT_LINE,
                   opts: SolveOptions | None = None) -> int:
    """Number of vertical tangencies counted with multiplicity.

    Raises :class:`Uncertified` when any underlying root set is short.
    """
    cloud = vertical_tangencies(n, line, opts)
    if not cloud.certified:
        for j in range(n):
            solve_qk_eq(n - j, line, opts)
    return len(cloud)


def atom_residuals(cloud: AtomCloud, n: int, line: LineParams):
    """Per-atom residuals |p_c^j(z)| / (1 + |d/dz p_c^j(z)|) and
    |Q_{n-j}(c) - a(c)| / (1 + |dQ|)."""
    from bifcurrent.roots import qk_eval_array
    z_res = np.empty(len(cloud))
    c_res = np.empty(len(cloud))
    for j in np.unique(cloud.labels):
        sel = cloud.labels == j
        c, z = cloud.c[sel], cloud.z[sel]
        val, dz, _, _, _ = jet_iterate_array(c, z, int(j))
        z_res[sel] = np.abs(val) / (1 + np.abs(dz))
        q, dq, _ = qk_eval_array(n - int(j), c)
        c_res[sel] = np.abs(q - line(c)) / (1 + np.abs(dq))
    return z_res, c_res


# -- contact order ----------------------------------------------------------


@dataclass
class ContactReport:
    n: int
    line: LineParams
    samples: int
    transversal: int = 0
    ambiguous: int = 0
    slope_mismatches: int = 0
    lift_mismatches: int = 0
    tangency_atoms: int = 0
    order_one: int = 0
    higher_order: int = 0
    non_critical_tangencies: int = 0
    max_slope_error: float = 0.0
    max_lift_cross: float = 0.0
    max_local_model_error: float = 0.0
    ambiguous_points: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (self.higher_order == 0 and self.slope_mismatches == 0
                and self.lift_mismatches == 0 and self.non_critical_tangencies == 0
                and self.order_one == self.tangency_atoms)


def _solve_z(c, z, n, target, steps=30):
    # Newton in z for p_c^n(z) = target
    for _ in range(steps):
        val, dz, _, _, _ = jet_iterate_array(c, z, n)
        z = z - (val - target) / dz
    return z


def _solve_c(c, z, n, line, steps=30):
    # Newton in c for p_c^n(z) = a(c) at fixed z
    for _ in range(steps):
        val, _, dc, _, _ = jet_iterate_array(c, z, n)
        c = c - (val - line(c)) / (dc - line.alpha)
    return c


def contact_order_check(n: int, line: LineParams = DEFAULT_LINE, samples: int = 10_000,
                        seed: int = 0, critical_tol: float = 1e-8,
                        fd_step: float = 1e-6, model_step: float = 1e-4,
                        opts: SolveOptions | None = None) -> ContactReport:
    """Check the tangency dichotomy on F^{-n}(line).

    Random points of the curve (random c, random inverse branch of a(c))
    must be transversal to the vertical: the finite-difference slope dz/dc
    agrees with -F_c/F_z, and pushing the curve's tangent forward by the
    lifted map lands on the direction of the line.  At the vertical
    tangencies F_z vanishes and the curve follows c - c0 = kappa s^2 with
    kappa = -F_zz / (2 F_c) != 0, i.e. contact of order exactly one.
    """
    if not np.isfinite(abs(line.alpha)):
        raise ValueError("vertical lines are not generic")
    rng = np.random.default_rng(seed)
    rep = ContactReport(n=n, line=line, samples=samples)

    c = 2.5 * np.sqrt(rng.uniform(size=samples)) * np.exp(2j * np.pi * rng.uniform(size=samples))
    z = line(c)
    signs = rng.integers(0, 2, size=(n, samples))
    for k in range(n):
        z = np.sqrt(z - c)
        z = np.where(signs[k] == 1, -z, z)
    _, fz, dc, fzz, _ = jet_iterate_array(c, z, n)
    fc = dc - line.alpha
    crit_dist = np.abs(fz) / np.maximum(np.abs(fzz), 1e-300)
    amb = crit_dist < critical_tol
    rep.ambiguous = int(amb.sum())
    rep.ambiguous_points = [[complex(a), complex(b)] for a, b in zip(c[amb], z[amb])]
    ok = ~amb
    rep.transversal = int(ok.sum())
    cs, zs, fzs, fcs = c[ok], z[ok], fz[ok], fc[ok]

    slope = -fcs / fzs
    zp = _solve_z(cs + fd_step, zs, n, line(cs + fd_step))
    zm = _solve_z(cs - fd_step, zs, n, line(cs - fd_step))
    fd = (zp - zm) / (2 * fd_step)
    err = np.abs(fd - slope) / (1 + np.abs(slope))
    rep.max_slope_error = float(err.max(initial=0.0))
    rep.slope_mismatches = int((err > 1e-4).sum())

    # tangent of the curve is (F_z, -F_c); its image must be parallel to (1, alpha)
    _, w1, w2, _ = lift_iterate_array(cs, zs, fzs, -fcs, n)
    u1, u2 = _normalize(np.ones_like(w1), np.full_like(w2, line.alpha))
    cross = projective_cross(w1, w2, u1, u2)
    rep.max_lift_cross = float(cross.max(initial=0.0))
    rep.lift_mismatches = int((cross > 1e-9).sum())

    atoms = vertical_tangencies(n, line, opts)
    c0, z0 = atoms.c, atoms.z
    rep.tangency_atoms = len(atoms)
    _, fz0, dc0, fzz0, _ = jet_iterate_array(c0, z0, n)
    fc0 = dc0 - line.alpha
    rep.non_critical_tangencies = int((np.abs(fz0) > 1e-8 * (1 + np.abs(fzz0))).sum())
    kappa = -fzz0 / (2 * fc0)
    s = model_step * np.exp(2j * np.pi * rng.uniform(size=len(atoms)))
    cs1 = _solve_c(c0.copy(), z0 + s, n, line)
    model_err = np.abs((cs1 - c0) / s ** 2 - kappa) / np.maximum(np.abs(kappa), 1e-300)
    rep.max_local_model_error = float(model_err.max(initial=0.0))
    order_one = (model_err < 0.05) & (np.abs(kappa) > 1e-12)
    rep.order_one = int(order_one.sum())
    rep.higher_order = int((np.abs(kappa) <= 1e-12).sum())
    return rep


# -- inverse graphs over a parameter disk -----------------------------------


class ContinuationBreak(RuntimeError):
    """Consecutive preimage fibers could not be matched unambiguously."""


class PostcriticalObstruction(ValueError):
    """The disk meets the Mandelbrot set, so inverse branches may collide."""


@dataclass
class BranchTable:
    c0: complex
    r0: float
    n: int
    grid_c: np.ndarray          # (rays, radii)
    values: np.ndarray          # (2^n, rays, radii)
    max_derivative: np.ndarray  # (2^n,)
    min_pairwise: float
    max_residual: float
    green_floor: float


def trace_inverse_graphs(c0: complex, r0: float, line: LineParams = DEFAULT_LINE,
                         n: int = 3, grid_pts: int = 16, max_refine: int = 12,
                         threads: int | None = None) -> BranchTable:
    """Follow the 2^n inverse branches gamma with p_c^n(gamma(c)) = a(c)
    along rays of the disk D(c0, r0) by nearest-preimage continuation.

    Each point moves to the nearest point of the next fiber, accepted only
    when that step is below half the smallest distance inside the current
    fiber, so no two branches can swap.  A rejected step is bisected up to
    ``max_refine`` times before :class:`ContinuationBreak` is raised.
    """
    rays = grid_pts
    angles = 2 * np.pi * np.arange(rays) / rays
    radii = r0 * np.arange(grid_pts + 1) / grid_pts
    grid_c = c0 + radii[None, :] * np.exp(1j * angles)[:, None]

    g0 = green_param_array(grid_c)
    floor = float(g0.min())
    if not floor > 0:
        raise PostcriticalObstruction(f"g_c(0) vanishes on D({c0}, {r0})")

    base = inverse_orbit_tree(c0, line(c0), n)

    def match(prev, c):
        fiber = inverse_orbit_tree(c, line(c), n)
        dist, idx = cKDTree(np.column_stack([fiber.real, fiber.imag])).query(
            np.column_stack([prev.real, prev.imag]))
        ok = dist.max() <= 0.5 * _min_pairwise(prev) and len(np.unique(idx)) == len(idx)
        return fiber[idx], ok, dist.max()

    def advance(prev, c_from, c_to, depth=0):
        nxt, ok, step = match(prev, c_to)
        if ok:
            return nxt
        if depth >= max_refine:
            raise ContinuationBreak(f"step {step:.3g} near c={c_to:.6g} exceeds half the "
                                    f"fiber separation {_min_pairwise(prev):.3g}")
        mid = advance(prev, c_from, 0.5 * (c_from + c_to), depth + 1)
        return advance(mid, 0.5 * (c_from + c_to), c_to, depth + 1)

    def follow(ray):
        out = np.empty((len(base), len(radii)), dtype=np.complex128)
        out[:, 0] = base
        for s in range(1, len(radii)):
            out[:, s] = advance(out[:, s - 1], grid_c[ray, s - 1], grid_c[ray, s])
        return out

    per_ray = pmap(follow, range(rays), threads)
    values = np.stack(per_ray, axis=1)
    dc = np.abs(np.diff(grid_c, axis=1))
    deriv = np.abs(np.diff(values, axis=2)) / dc[None, :, :]
    val, _, _, _, _ = jet_iterate_array(np.broadcast_to(grid_c, values.shape), values, n)
    residual = np.abs(val - line(grid_c)[None, :, :])
    min_pair = min(_min_pairwise(values[:, r, s])
                   for r in range(rays) for s in range(len(radii)))
    return BranchTable(c0=complex(c0), r0=r0, n=n, grid_c=grid_c, values=values,
                       max_derivative=deriv.reshape(len(base), -1).max(axis=1),
                       min_pairwise=min_pair, max_residual=float(residual.max()),
                       green_floor=floor)


def _min_pairwise(z: np.ndarray) -> float:
    if len(z) < 2:
        return math.inf
    d, _ = cKDTree(np.column_stack([z.real, z.imag])).query(
        np.column_stack([z.real, z.imag]), k=2)
    return float(d[:, 1].min())

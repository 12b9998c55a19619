"""Numerical campaigns built on the library: convergence of normalised
parameter potentials to g_c(0), the tangency measures against m, slices
against equilibrium measures, the Green-function inequalities and the
tangency-count table.

Limits are checked as trends with slack, never as rates: the runs give
observed rates only and the pass criteria do not depend on them.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.spatial import cKDTree

from bifcurrent import _kernels
from bifcurrent.dynamics import green_array, green_param_array
from bifcurrent.io import table_csv, to_jsonable
from bifcurrent.lifted import atom_residuals, tangency_count, vertical_tangencies
from bifcurrent.measures import (AtomCloud, GridField, GridSpec,
                                 grid_laplacian_measure, log_potential, marginal_c,
                                 potential_l1_distance, slice_cloud)
from bifcurrent.parallel import pmap
from bifcurrent.roots import DEFAULT_LINE, LineParams, Uncertified, sample_brolin

DEFAULT_RECT = (-2.5, 1.5, -1.5, 1.5)
DEFAULT_GRID = GridSpec(DEFAULT_RECT, 256, 256)
MASS_GRID = GridSpec((-3.0, 2.0, -2.5, 2.5), 2048, 2048)
WINDOW_MASS_GRID = GridSpec((-3.0, 2.0, -2.5, 2.5), 512, 512)
TREND_SLACK = 0.10
TREND_NOTE = ("pass criteria are monotone trends with slack; "
              "observed decay rates are empirical only")


@dataclass
class ExperimentReport:
    name: str
    parameters: dict
    metrics: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    passed: bool | None = None
    seed: int | None = None
    runtime: float | None = None
    notes: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict, repr=False)

    def to_dict(self, include_runtime: bool = False) -> dict:
        out = {"name": self.name, "parameters": self.parameters, "metrics": self.metrics,
               "tables": self.tables, "pass": self.passed, "seed": self.seed,
               "notes": self.notes}
        if include_runtime and self.runtime is not None:
            out["runtime_s"] = self.runtime
        return to_jsonable(out)

    def to_json(self, include_runtime: bool = False) -> str:
        return json.dumps(self.to_dict(include_runtime), indent=2, sort_keys=True) + "\n"


def weakly_decreasing(values, slack: float = TREND_SLACK) -> bool:
    return all(b <= (1 + slack) * a for a, b in zip(values, values[1:]))


def trend_pass(values, slack: float = TREND_SLACK, shrink: float = 3.0) -> bool:
    """Weakly decreasing within ``slack`` and the last value below first/shrink."""
    return weakly_decreasing(values, slack) and values[-1] < values[0] / shrink


# -- potentials -------------------------------------------------------------


def log_residuals(c, a_coeffs, b_coeffs, nmax: int) -> np.ndarray:
    """ln|b(c) Q_n(c) - a(c)| for n = 1..nmax, shape (nmax,) + c.shape.

    ``a_coeffs`` and ``b_coeffs`` are ascending polynomial coefficients.
    """
    c = np.asarray(c, dtype=np.complex128)
    flat = np.ascontiguousarray(c.ravel())
    a = np.ascontiguousarray(P.polyval(flat, np.asarray(a_coeffs, dtype=np.complex128)))
    b = np.ascontiguousarray(P.polyval(flat, np.asarray(b_coeffs, dtype=np.complex128)))
    a = np.broadcast_to(a, flat.shape).copy()
    b = np.broadcast_to(b, flat.shape).copy()
    out = np.empty((nmax, flat.size))
    _kernels.log_residual_kernel(flat, a, b, nmax, out)
    return out.reshape((nmax,) + c.shape)


def normalized_potential(c, n: int, a_coeffs=(0,), b_coeffs=(1,)) -> np.ndarray:
    """phi_n(c) = 2^-n ln|b(c) Q_n(c) - a(c)|."""
    return log_residuals(c, a_coeffs, b_coeffs, n)[n - 1] / 2.0 ** n


def line_coeffs(line: LineParams):
    return (line.beta, line.alpha)


def tangency_potential(c, n: int, line: LineParams = DEFAULT_LINE) -> np.ndarray:
    """U_n(c) = (2/n) sum_{k=1}^n 2^-k ln|Q_k(c) - a(c)|."""
    logs = log_residuals(c, line_coeffs(line), (1,), n)
    w = 2.0 ** -np.arange(1, n + 1)
    return (2.0 / n) * np.tensordot(w, logs, axes=1)


def linear_factor_offset(n: int, line: LineParams) -> float:
    """Constant by which U_n exceeds the logarithmic potential of the
    c-marginal of the tangency measure.

    Q_k - a is monic for k >= 2, while Q_1 - a = (1 - alpha) c - beta has
    leading coefficient 1 - alpha; its weight 2/n * 1/2 leaves ln|1-alpha|/n.
    """
    return math.log(abs(1 - line.alpha)) / n


def green_param_field(spec: GridSpec, n_cap: int = 4096) -> GridField:
    return GridField(spec, green_param_array(spec.points(), n_cap=n_cap))


# -- experiments -------------------------------------------------------------


def mandel_green_convergence(a_coeffs=(0,), b_coeffs=(1,), n_list=(4, 6, 8, 10, 12),
                             grid_spec: GridSpec = DEFAULT_GRID, n_cap: int = 4096,
                             name: str = "mandel_green_convergence") -> ExperimentReport:
    """L1 grid distance between 2^-n ln|b Q_n - a| and g_c(0), per n."""
    t0 = time.perf_counter()
    if not np.any(np.asarray(b_coeffs) != 0):
        raise ValueError("b must not vanish identically")
    n_list = sorted(int(n) for n in n_list)
    pts = grid_spec.points()
    target = green_param_field(grid_spec, n_cap)
    logs = log_residuals(pts, a_coeffs, b_coeffs, n_list[-1])
    dists = []
    for n in n_list:
        phi = GridField(grid_spec, np.maximum(logs[n - 1], -745.0) / 2.0 ** n)
        dists.append(potential_l1_distance(phi, target))
    rep = ExperimentReport(
        name=name,
        parameters={"a_coeffs": list(a_coeffs), "b_coeffs": list(b_coeffs), "n_list": n_list,
                    "rect": list(grid_spec.rect), "nx": grid_spec.nx, "ny": grid_spec.ny,
                    "n_cap": n_cap},
        metrics={"first_distance": dists[0], "final_distance": dists[-1],
                 "ratio_final_first": dists[-1] / dists[0]},
        tables={"distances": table_csv(["n", "l1_distance"], zip(n_list, dists))},
        passed=trend_pass(dists), notes=[TREND_NOTE])
    rep.artifacts["green_param"] = target
    rep.artifacts["distances"] = (n_list, dists)
    rep.runtime = time.perf_counter() - t0
    return rep


def _off_atom_probes(rng, rect, atoms: np.ndarray, count: int, min_dist: float):
    tree = cKDTree(np.column_stack([atoms.real, atoms.imag])) if len(atoms) else None
    out = []
    while len(out) < count:
        c = rng.uniform(rect[0], rect[1]) + 1j * rng.uniform(rect[2], rect[3])
        if tree is None or tree.query([c.real, c.imag])[0] > min_dist:
            out.append(c)
    return np.array(out)


def potential_identity(n: int, line: LineParams = DEFAULT_LINE, probes: int = 100,
                       seed: int = 0, rect=DEFAULT_RECT, cloud: AtomCloud | None = None):
    """Compare the logarithmic potential of the c-marginal of the tangency
    measure with U_n at seeded off-atom points.

    Returns ``(residual, literal_residual, cloud)``: the largest deviation
    after removing :func:`linear_factor_offset`, and without removing it.
    """
    cloud = cloud if cloud is not None else vertical_tangencies(n, line)
    marg = marginal_c(cloud)
    rng = np.random.default_rng(seed)
    pts = _off_atom_probes(rng, rect, marg.points, probes, 1e-6)
    lp = log_potential(marg, pts)
    u = tangency_potential(pts, n, line)
    literal = float(np.max(np.abs(lp - u)))
    corrected = float(np.max(np.abs(lp - (u - linear_factor_offset(n, line)))))
    return corrected, literal, cloud


def parameter_potential_check(n_list=(4, 6, 8, 10, 12), line: LineParams = DEFAULT_LINE,
                              grid_spec: GridSpec = DEFAULT_GRID, probes: int = 100,
                              seed: int = 0, mass_spec: GridSpec | None = None,
                              n_cap: int = 4096,
                              threads: int | None = None) -> ExperimentReport:
    """U_n against 2 g_c(0): exact potential identity at off-atom probes,
    L1 trend in n, and (optionally) total grid-Laplacian mass of U_n."""
    t0 = time.perf_counter()
    n_list = sorted(int(n) for n in n_list)
    clouds = pmap(lambda n: vertical_tangencies(n, line), n_list, threads)
    target = GridField(grid_spec, 2.0 * green_param_field(grid_spec, n_cap).values)
    pts = grid_spec.points()
    rows, dists, ids = [], [], []
    certified = True
    for n, cloud in zip(n_list, clouds):
        certified &= cloud.certified
        res, literal, _ = potential_identity(n, line, probes, seed, grid_spec.rect, cloud)
        ids.append(res)
        u = GridField(grid_spec, np.maximum(tangency_potential(pts, n, line), -745.0))
        d = potential_l1_distance(u, target)
        dists.append(d)
        row = [n, len(cloud), cloud.total_mass, res, literal, d]
        if mass_spec is not None:
            row.extend(_laplacian_mass(tangency_potential(mass_spec.points(), n, line),
                                       mass_spec))
        rows.append(row)
    header = ["n", "atoms", "mass", "identity_residual", "uncorrected_residual",
              "l1_to_2g"]
    metrics = {"max_identity_residual": max(ids), "first_l1": dists[0],
               "final_l1": dists[-1], "certified": certified}
    ok = certified and max(ids) < 1e-8 and weakly_decreasing(dists)
    if mass_spec is not None:
        header += ["grid_mass_signed", "grid_mass_clipped"]
        metrics["max_mass_error"] = max(abs(r[-2] - 1) for r in rows)
        metrics["max_clipped_mass_error"] = max(abs(r[-1] - 1) for r in rows)
        notes_mass = ["grid mass pass uses the signed total; the clipped total is "
                      "reported because atoms between nodes leave negative side lobes"]
        ok = ok and metrics["max_mass_error"] < 0.03
    else:
        notes_mass = []
    rep = ExperimentReport(
        name="parameter_potential_check",
        parameters={"n_list": n_list, "alpha": line.alpha, "beta": line.beta,
                    "rect": list(grid_spec.rect), "nx": grid_spec.nx, "ny": grid_spec.ny,
                    "probes": probes, "n_cap": n_cap},
        metrics=metrics, tables={"per_n": table_csv(header, rows)}, passed=ok, seed=seed,
        notes=[TREND_NOTE, "identity residual removes the constant ln|1-alpha|/n of the "
               "non-monic linear factor"] + notes_mass)
    rep.artifacts["clouds"] = dict(zip(n_list, clouds))
    rep.runtime = time.perf_counter() - t0
    return rep


def _laplacian_mass(values: np.ndarray, spec: GridSpec) -> tuple[float, float]:
    """Signed and clipped total grid-Laplacian mass of a potential.

    Potentials of atomic measures are never resolved by a grid: an atom
    between nodes leaves negative side lobes, so the clipped total
    overshoots while the signed total (boundary flux) stays exact.
    """
    m = grid_laplacian_measure(GridField(spec, np.maximum(values, -745.0)),
                               max_clip_fraction=math.inf)
    return m.signed_mass, m.total_mass


def m_mass(spec: GridSpec = MASS_GRID, n_cap: int = 4096):
    """Grid-Laplacian measure of 2 g_c(0) (the bifurcation measure)."""
    return grid_laplacian_measure(GridField(spec, 2.0 * green_param_field(spec, n_cap).values))


def _annulus_probes(rng, count, r_min, r_max, center=0j):
    r = rng.uniform(r_min, r_max, count)
    return center + r * np.exp(2j * np.pi * rng.uniform(size=count))


def slice_vs_equilibrium(n_list=(6, 8, 10, 12), c0: complex = 1j, width: float = 0.05,
                         brolin_count: int = 2 ** 16, seed: int = 0,
                         line: LineParams = DEFAULT_LINE, probes: int = 50,
                         probe_radii=(3.0, 5.0), threads: int | None = None,
                         mass_spec: GridSpec | None = WINDOW_MASS_GRID) -> ExperimentReport:
    """Empirical conditional of the tangency measure near c0 against the
    equilibrium measure of K_{c0}, compared through log potentials.

    With ``mass_spec`` the raw mass of each slice window is also compared
    with the grid mass of the bifurcation measure on the same disk.
    """
    t0 = time.perf_counter()
    n_list = sorted(int(n) for n in n_list)
    rng = np.random.default_rng(seed)
    z = _annulus_probes(rng, probes, *probe_radii)
    brolin = sample_brolin(c0, 1.0, brolin_count, seed=seed)
    u_eq = log_potential(brolin, z)
    clouds = pmap(lambda n: vertical_tangencies(n, line), n_list, threads)
    window = math.nan if mass_spec is None else m_mass(mass_spec).mass_in_disk(c0, width)
    rows, gaps, raws = [], [], []
    slices = {}
    for n, cloud in zip(n_list, clouds):
        sl, raw = slice_cloud(cloud, c0, width)
        raws.append(raw)
        if sl.is_empty:
            rows.append([n, 0, 0.0, math.nan, math.nan, math.nan])
            gaps.append(math.nan)
            continue
        gap = float(np.mean(np.abs(log_potential(sl, z) - u_eq)))
        gaps.append(gap)
        slices[n] = sl
        rows.append([n, len(sl), raw, gap, float(np.abs(sl.points.real).max()),
                     float(np.abs(sl.points.imag).max())])
    finite = [g for g in gaps if np.isfinite(g)]
    ok = len(finite) == len(gaps) and finite[-1] < finite[0] and weakly_decreasing(
        finite, 0.5)
    rep = ExperimentReport(
        name="slice_vs_equilibrium",
        parameters={"n_list": n_list, "c0": c0, "width": width, "brolin_count": brolin_count,
                    "alpha": line.alpha, "beta": line.beta, "probes": probes,
                    "probe_radii": list(probe_radii)},
        metrics={"first_gap": gaps[0], "final_gap": gaps[-1], "window_m_mass": window,
                 "first_mass_gap": abs(raws[0] - window),
                 "final_mass_gap": abs(raws[-1] - window)},
        tables={"per_n": table_csv(["n", "atoms", "raw_mass", "potential_gap",
                                    "max_abs_re", "max_abs_im"], rows)},
        passed=ok, seed=seed,
        notes=[TREND_NOTE, "empty slices are reported as nan and fail the trend"])
    rep.artifacts["slices"] = slices
    rep.artifacts["brolin"] = brolin
    rep.runtime = time.perf_counter() - t0
    return rep


def _log_uniform(rng, lo, hi, size):
    return np.exp(rng.uniform(math.log(lo), math.log(hi), size))


def _phase(rng, size):
    return np.exp(2j * np.pi * rng.uniform(size=size))


GREEN_C0 = 16384.0


def green_inequality_suite(samples: int = 10 ** 6, seed: int = 42, tol: float = 1e-9,
                           n_cap: int = 512, chunk: int = 2 ** 17) -> ExperimentReport:
    """Seeded checks of three Green-function inequalities.

    1. g_c(z) <= ln 2 + max(ln|c| / 2, ln|z|) for |c| >= 1 (plus a stress
       set with |c| = 1 exactly);
    2. max(g_c(z), g_c(c) / 2) >= ln(|z| / 4);
    3. g_c(alpha c + beta) < g_c(c) for |c| >= 16384,
       1e-2 <= |alpha| <= 1e-1, |beta| <= 2.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    gtol = 1e-13

    def g(c, z):
        return green_array(c, z, gtol, n_cap)[0]

    counts = {"item1": 0, "item1_unit_circle": 0, "item2": 0, "item3": 0}
    worst = {k: -math.inf for k in counts}
    n_stress = max(1, samples // 10)
    for name, n in (("item1", samples), ("item1_unit_circle", n_stress),
                    ("item2", samples), ("item3", samples)):
        for s in range(0, n, chunk):
            m = min(chunk, n - s)
            if name.startswith("item1"):
                mod = 1.0 if name == "item1_unit_circle" else _log_uniform(rng, 1.0, 1e4, m)
                c = mod * _phase(rng, m)
                z = _log_uniform(rng, 1e-3, 1e4, m) * _phase(rng, m)
                excess = g(c, z) - (math.log(2) + np.maximum(0.5 * np.log(np.abs(c)),
                                                             np.log(np.abs(z))))
            elif name == "item2":
                c = _log_uniform(rng, 1e-3, 1e4, m) * _phase(rng, m)
                z = _log_uniform(rng, 1e-3, 1e4, m) * _phase(rng, m)
                excess = np.log(np.abs(z) / 4) - np.maximum(g(c, z), 0.5 * g(c, c))
            else:
                c = _log_uniform(rng, GREEN_C0, 1e8, m) * _phase(rng, m)
                alpha = rng.uniform(1e-2, 1e-1, m) * _phase(rng, m)
                beta = 2 * np.sqrt(rng.uniform(size=m)) * _phase(rng, m)
                excess = g(c, alpha * c + beta) - g(c, c)
            # item 3 is strict, so equality already counts as a violation
            bad = excess >= 0 if name == "item3" else excess > tol
            counts[name] += int(bad.sum())
            worst[name] = max(worst[name], float(excess.max()))
    rep = ExperimentReport(
        name="green_inequality_suite",
        parameters={"samples": samples, "stress_samples": n_stress, "tol": tol,
                    "n_cap": n_cap, "c_min_item3": GREEN_C0,
                    "ranges": {"item1": "|c| in [1,1e4], |z| in [1e-3,1e4] log-uniform",
                               "item2": "|c|, |z| in [1e-3,1e4] log-uniform",
                               "item3": "|c| in [16384,1e8], |alpha| in [1e-2,1e-1], "
                                        "|beta| <= 2"}},
        metrics={f"violations_{k}": v for k, v in counts.items()}
        | {f"worst_excess_{k}": v for k, v in worst.items()},
        passed=sum(counts.values()) == 0, seed=seed)
    rep.runtime = time.perf_counter() - t0
    return rep


def tangency_count_table(n_max: int = 10, line: LineParams = DEFAULT_LINE,
                         threads: int | None = None) -> ExperimentReport:
    """Count of vertical tangencies against n 2^(n-1), n = 1..n_max."""
    t0 = time.perf_counter()

    def row(n):
        cloud = vertical_tangencies(n, line)
        zr, cr = atom_residuals(cloud, n, line) if len(cloud) else (np.zeros(1), np.zeros(1))
        return [n, len(cloud), n * 2 ** (n - 1), "certified" if cloud.certified else
                "uncertified", cloud.total_mass, float(max(zr.max(), cr.max()))], cloud

    results = pmap(row, range(1, n_max + 1), threads)
    rows = [r for r, _ in results]
    ok = all(r[3] == "certified" and r[1] == r[2] for r in rows)
    rep = ExperimentReport(
        name="tangency_count_table",
        parameters={"n_max": n_max, "alpha": line.alpha, "beta": line.beta},
        metrics={"rows_certified": sum(r[3] == "certified" for r in rows)},
        tables={"counts": table_csv(["n", "count", "expected", "status", "mass",
                                     "max_residual"], rows)},
        passed=ok)
    rep.artifacts["clouds"] = {r[0]: c for r, c in results}
    rep.runtime = time.perf_counter() - t0
    return rep


__all__ = [
    "ExperimentReport", "Uncertified", "green_inequality_suite", "linear_factor_offset",
    "m_mass", "mandel_green_convergence", "normalized_potential", "parameter_potential_check",
    "potential_identity", "slice_vs_equilibrium", "tangency_count", "tangency_count_table",
    "tangency_potential", "trend_pass",
]

"""Invariant checks shared by the ``verify`` command and the test-suite.

Each check returns a :class:`CheckResult` with its metrics; none of them
raises on a failed property, so a suite run always produces a full report.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from bifcurrent.dynamics import green_array, jet_iterate_array
from bifcurrent.experiments import (ExperimentReport, green_inequality_suite, m_mass,
                                    mandel_green_convergence, potential_identity)
from bifcurrent.io import table_csv
from bifcurrent.lifted import (contact_order_check, lift_iterate_array, projective_cross,
                               trace_inverse_graphs, vertical_tangencies)
from bifcurrent.measures import GridSpec, log_potential
from bifcurrent.oracle import aberth_roots, multiset_distance
from bifcurrent.parallel import pmap
from bifcurrent.roots import (DEFAULT_LINE, LineParams, Uncertified, sample_brolin,
                              solve_qk_eq)


@dataclass
class CheckResult:
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)


def _disk(rng, radius, size):
    return radius * np.sqrt(rng.uniform(size=size)) * np.exp(2j * np.pi * rng.uniform(size=size))


def v_invariance(samples: int = 10_000, seed: int = 0, n_max: int = 12,
                 tol: float = 1e-12) -> CheckResult:
    """Vertical directions [0:1] stay vertical under the lifted map."""
    rng = np.random.default_rng(seed)
    c = _disk(rng, 2.0, samples)
    z = _disk(rng, 2.0, samples)
    n = rng.integers(0, n_max + 1, samples)
    worst = 0.0
    for k in np.unique(n):
        sel = n == k
        val, w1, w2, ovf = lift_iterate_array(c[sel], z[sel], np.zeros(sel.sum()),
                                              np.ones(sel.sum()), int(k))
        good = ovf < 0
        cross = projective_cross(w1[good], w2[good], 0.0, 1.0)
        worst = max(worst, float(cross.max(initial=0.0)))
    return CheckResult("v_invariance", worst <= tol, {"samples": samples,
                                                       "max_cross": worst})


def composition(samples: int = 100, seed: int = 1, tol: float = 1e-9) -> CheckResult:
    """F^(a+b) and F^b o F^a agree projectively on non-degenerate samples."""
    rng = np.random.default_rng(seed)
    worst, used = 0.0, 0
    while used < samples:
        c, z = _disk(rng, 1.5, 1)[0], _disk(rng, 1.5, 1)[0]
        v1, v2 = _disk(rng, 1.0, 2)
        a, b = (int(x) for x in rng.integers(0, 7, 2))
        z_ab, w1, w2, o1 = lift_iterate_array(c, z, v1, v2, a + b)
        z_a, u1, u2, o2 = lift_iterate_array(c, z, v1, v2, a)
        z_b, x1, x2, o3 = lift_iterate_array(c, z_a, u1, u2, b)
        if max(o1, o2, o3) >= 0 or abs(z_ab) > 1e6:
            continue
        worst = max(worst, float(projective_cross(w1, w2, x1, x2)))
        used += 1
    return CheckResult("composition", worst <= tol, {"samples": samples, "max_cross": worst})


def jet_finite_differences(samples: int = 1000, seed: int = 2, n_max: int = 12,
                           step: float = 1e-6, tol: float = 1e-6,
                           orbit_bound: float = 4.0, min_derivative: float = 1e-3) -> CheckResult:
    """Jets against central differences on bounded orbits away from the
    critical set (there the roundoff eps |f| / step swamps a vanishing
    derivative).  The step shrinks with the derivative being tested, so
    the truncation error stays near step^2 instead of (step |f'|)^2."""
    rng = np.random.default_rng(seed)
    worst, used, tried = 0.0, 0, 0
    while used < samples:
        tried += 1
        c, z = _disk(rng, 1.5, 1)[0], _disk(rng, 1.0, 1)[0]
        n = int(rng.integers(1, n_max + 1))
        orbit = z
        bounded = abs(z) <= orbit_bound
        for _ in range(n):
            if not bounded:
                break
            orbit = orbit * orbit + c
            bounded = abs(orbit) <= orbit_bound
        val, dz, dc, _, _ = jet_iterate_array(c, z, n)
        if not bounded or abs(dz) < min_derivative or abs(dc) < min_derivative:
            continue
        f = lambda cc, zz: jet_iterate_array(cc, zz, n)[0]  # noqa: E731
        hz = step / max(1.0, abs(dz))
        hc = step / max(1.0, abs(dc))
        fz = (f(c, z + hz) - f(c, z - hz)) / (2 * hz)
        fc = (f(c + hc, z) - f(c - hc, z)) / (2 * hc)
        err = max(abs(fz - dz) / abs(dz), abs(fc - dc) / abs(dc))
        worst = max(worst, float(err))
        used += 1
    return CheckResult("jet_finite_differences", worst < tol,
                       {"samples": samples, "rejected": tried - samples, "max_rel_err": worst})


def brolin_potential(c_values=(0j, -2 + 0j, 1j), count: int = 2 ** 16, probes: int = 50,
                     seed: int = 0, tol: float = 5e-3) -> CheckResult:
    """Log potential of backward-iteration samples against g_c on |z| in [3, 5]."""
    rng = np.random.default_rng(seed)
    gaps = {}
    circle_err = None
    for c in c_values:
        cloud = sample_brolin(c, 1.0, count, seed=seed)
        z = rng.uniform(3, 5, probes) * np.exp(2j * np.pi * rng.uniform(size=probes))
        g = green_array(c, z)[0]
        gaps[str(complex(c))] = float(np.mean(np.abs(log_potential(cloud, z) - g)))
        if c == 0:
            circle_err = float(np.max(np.abs(np.abs(cloud.points) - 1)))
    ok = max(gaps.values()) < tol and (circle_err is None or circle_err <= 1e-9)
    return CheckResult("brolin_potential", ok, {"mean_gap": gaps, "unit_circle_err": circle_err})


def tangency_counts(n_max: int = 8, lines=None, threads: int | None = None) -> CheckResult:
    lines = lines or [DEFAULT_LINE]
    rows = []

    def one(args):
        line, n = args
        cloud = vertical_tangencies(n, line)
        return [line.alpha, line.beta, n, len(cloud), n * 2 ** (n - 1), cloud.certified,
                cloud.total_mass]

    rows = pmap(one, [(line, n) for line in lines for n in range(1, n_max + 1)], threads)
    ok = all(r[5] and r[3] == r[4] for r in rows)
    mass_err = max(abs(r[6] - 1) for r in rows)
    return CheckResult("tangency_counts", ok and mass_err <= 1e-12,
                       {"rows": len(rows), "max_mass_error": mass_err,
                        "table": table_csv(["alpha", "beta", "n", "count", "expected",
                                            "certified", "mass"], rows)})


def root_oracle(k_max: int = 8, oracle_k_max: int = 6, line: LineParams = DEFAULT_LINE,
                tol: float = 1e-7) -> CheckResult:
    """Certified counts up to k_max and agreement with the Aberth oracle."""
    counts, dists = {}, {}
    ok = True
    for k in range(1, k_max + 1):
        try:
            rs = solve_qk_eq(k, line)
            counts[k] = len(rs.roots)
        except Uncertified as exc:
            counts[k] = len(exc.result.roots)
            ok = False
            continue
        ok &= counts[k] == 2 ** (k - 1)
        if k <= oracle_k_max:
            dists[k] = multiset_distance(rs.roots, aberth_roots(k, line).roots)
            ok &= dists[k] <= tol
    return CheckResult("root_oracle", bool(ok), {"counts": counts, "oracle_distance": dists})


def run_suite(seed: int = 42, threads: int | None = None) -> tuple[list, dict]:
    """The ``verify`` suite: fast versions of every library invariant.

    Returns the check results and the artifacts worth writing to disk.
    """
    rng = np.random.default_rng(seed)
    lines = [DEFAULT_LINE] + [LineParams.random_admissible(rng) for _ in range(2)]
    results = [
        tangency_counts(8, lines, threads),
        root_oracle(8, 6),
        v_invariance(10_000, seed),
        composition(100, seed + 1),
        jet_finite_differences(1000, seed + 2),
        brolin_potential(seed=seed),
    ]
    ident = {n: potential_identity(n, DEFAULT_LINE, 100, seed)[0] for n in (4, 8)}
    results.append(CheckResult("potential_identity", max(ident.values()) < 1e-8,
                               {"residual": ident}))
    grid = GridSpec((-2.5, 1.5, -1.5, 1.5), 128, 128)
    for label, a in (("a0", (0,)), ("aline", (DEFAULT_LINE.beta, DEFAULT_LINE.alpha))):
        rep = mandel_green_convergence(a, (1,), grid_spec=grid, n_cap=1024)
        results.append(CheckResult(f"mandel_green_{label}", bool(rep.passed), rep.metrics))
    gis = green_inequality_suite(100_000, seed)
    results.append(CheckResult("green_inequalities", bool(gis.passed), gis.metrics))
    mspec = GridSpec((-3.0, 2.0, -2.5, 2.5), 512, 512)
    mm = m_mass(mspec, n_cap=1024)
    results.append(CheckResult("m_mass", abs(mm.total_mass - 1) < 0.03,
                               {"total_mass": mm.total_mass, "clipped": mm.clipped_mass,
                                "signed_mass": mm.signed_mass}))
    cr = contact_order_check(4, DEFAULT_LINE, 2000, seed)
    results.append(CheckResult("contact_order", cr.ok,
                               {"order_one": cr.order_one, "atoms": cr.tangency_atoms,
                                "ambiguous": cr.ambiguous,
                                "max_slope_error": cr.max_slope_error}))
    bt = trace_inverse_graphs(4.0, 0.5, DEFAULT_LINE, 3, 16, threads=threads)
    results.append(CheckResult("inverse_graphs",
                               bt.max_residual < 1e-9 and bt.min_pairwise > 0,
                               {"branches": bt.values.shape[0], "max_residual": bt.max_residual,
                                "min_pairwise": bt.min_pairwise,
                                "max_derivative": float(bt.max_derivative.max())}))
    artifacts = {"m_measure": mm, "tangency_cloud": vertical_tangencies(6, DEFAULT_LINE)}
    return results, artifacts


def suite_report(results, seed: int) -> ExperimentReport:
    return ExperimentReport(
        name="verify", parameters={"checks": [r.name for r in results]},
        metrics={r.name: r.metrics for r in results},
        tables={"summary": table_csv(["check", "pass"],
                                     [[r.name, "pass" if r.passed else "FAIL"]
                                      for r in results])},
        passed=all(r.passed for r in results), seed=seed)


__all__ = ["CheckResult", "brolin_potential", "composition", "jet_finite_differences",
           "root_oracle", "run_suite", "suite_report", "tangency_counts", "v_invariance"]

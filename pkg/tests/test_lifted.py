import cmath

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bifcurrent.dynamics import Overflow
from bifcurrent.lifted import (ContinuationBreak, DegenerateDirection, PostcriticalObstruction, TangentChartPoint,
                               atom_residuals, contact_order_check, lift_iterate,
                               lift_iterate_array, projective_cross, tangency_count,
                               tangency_weight, trace_inverse_graphs, vertical_tangencies)
from bifcurrent.roots import DEFAULT_LINE, LineParams, SolveOptions, Uncertified

small = st.complex_numbers(max_magnitude=1.5, allow_nan=False, allow_infinity=False)


def test_chart_point_normalizes():
    p = TangentChartPoint(0, 1, 3, 4)
    assert (p.v1, p.v2) == (0.6, 0.8)
    assert p.t == pytest.approx(0.75)
    assert TangentChartPoint(0, 0, 1, 0).t.real == np.inf
    with pytest.raises(ValueError):
        TangentChartPoint(0, 0, 0, 0)


def test_direction_distance():
    a = TangentChartPoint(0, 0, 1, 1)
    assert a.direction_distance(TangentChartPoint(0, 0, 2, 2)) == pytest.approx(0, abs=1e-16)
    assert a.direction_distance(TangentChartPoint(0, 0, 1, -1)) == pytest.approx(1)


def test_lift_one_step():
    # dz = 2, dc = 1 at (c, z) = (0, 1): (1, 1) -> (1, 1 + 2) = [1 : 3]
    img = lift_iterate(TangentChartPoint(0, 1, 1, 1), 1)
    assert img.z == 1
    assert img.t == pytest.approx(1 / 3, abs=1e-15)


def test_lift_zero_steps_is_identity():
    p = TangentChartPoint(0.2j, -0.4, 1, 2j)
    q = lift_iterate(p, 0)
    assert q.direction_distance(p) < 1e-16 and q.z == p.z


def test_lift_overflow_and_validation():
    assert isinstance(lift_iterate(TangentChartPoint(0, 10, 1, 0), 20), Overflow)
    with pytest.raises(ValueError):
        lift_iterate(TangentChartPoint(0, 0, 1, 0), -1)


@settings(max_examples=200)
@given(small, small, st.integers(0, 10))
def test_vertical_is_invariant(c, z, n):
    val, w1, w2, ovf = lift_iterate_array(c, z, 0, 1, n)
    if ovf < 0 and not np.isnan(w2):
        assert abs(w1) <= 1e-12


def test_subnormal_derivative_keeps_direction():
    val, w1, w2, ovf = lift_iterate_array(0, 2.2e-311 + 2.2e-311j, 0, 1, 1)
    assert w1 == 0 and abs(abs(w2) - 1) < 1e-15


def test_vertical_at_critical_point_is_annihilated():
    w = lift_iterate_array(0.3, 0, 0, 1, 2)
    assert np.isnan(w[1]) and np.isnan(w[2])
    with pytest.raises(DegenerateDirection):
        lift_iterate(TangentChartPoint(0.3, 0, 0, 1), 2)
    # a non-vertical direction survives: dc = 1 at the first step
    assert lift_iterate(TangentChartPoint(0.3, 0, 1, 0), 1).t == 1


@settings(max_examples=100)
@given(small, small, small, small, st.integers(0, 5), st.integers(0, 5))
def test_composition(c, z, v1, v2, a, b):
    if abs(v1) + abs(v2) < 1e-3:
        return
    z_ab, w1, w2, o1 = lift_iterate_array(c, z, v1, v2, a + b)
    z_a, u1, u2, o2 = lift_iterate_array(c, z, v1, v2, a)
    z_b, x1, x2, o3 = lift_iterate_array(c, z_a, u1, u2, b)
    if max(o1, o2, o3) < 0 and abs(z_ab) < 1e6 and not np.isnan(w1 * x1):
        assert projective_cross(w1, w2, x1, x2) <= 1e-9


def test_tangency_weight():
    assert tangency_weight(1) == 1.0
    assert tangency_weight(3) == 2 / 24


def test_tangencies_n1_through_critical_value():
    # the horizontal line z = 1 meets the critical value z = c at c = 1
    cloud = vertical_tangencies(1, LineParams(0, 1))
    assert len(cloud) == 1
    np.testing.assert_allclose(cloud.points[0], [1, 0], atol=1e-15)


def test_tangencies_n2_default_line():
    cloud = vertical_tangencies(2)
    assert len(cloud) == 4 and cloud.total_mass == pytest.approx(1)
    depth1 = cloud.points[cloud.labels == 1]
    # depth one: c = c/20 + 1 and z^2 + c = 0
    c = 20 / 19
    expected = sorted([(c, 1j * cmath.sqrt(c)), (c, -1j * cmath.sqrt(c))],
                      key=lambda p: p[1].imag)
    got = sorted(map(tuple, depth1), key=lambda p: p[1].imag)
    np.testing.assert_allclose(got, expected, atol=1e-14)


@pytest.mark.parametrize("n", range(1, 9))
def test_tangency_counts_and_mass(n):
    cloud = vertical_tangencies(n)
    assert cloud.certified
    assert len(cloud) == tangency_count(n) == n * 2 ** (n - 1)
    assert abs(cloud.total_mass - 1) <= 1e-12
    z_res, c_res = atom_residuals(cloud, n, DEFAULT_LINE)
    assert z_res.max() < 1e-10 and c_res.max() < 1e-10


def test_tangencies_sorted_and_deterministic():
    a = vertical_tangencies(6)
    b = vertical_tangencies(6, threads=1)
    assert a.points.tobytes() == b.points.tobytes()
    keys = list(zip(a.c.real, a.c.imag))
    assert keys == sorted(keys)


def test_tangencies_uncertified_path():
    opts = SolveOptions(starts_per_root=0, retries=0, completion_maxit=0)
    assert not vertical_tangencies(8, DEFAULT_LINE, opts).certified
    with pytest.raises(Uncertified):
        tangency_count(8, DEFAULT_LINE, opts)
    with pytest.raises(ValueError):
        vertical_tangencies(0)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_contact_order(n):
    rep = contact_order_check(n, DEFAULT_LINE, 1000, seed=n)
    assert rep.ok
    assert rep.transversal + rep.ambiguous == 1000
    assert rep.order_one == rep.tangency_atoms == n * 2 ** (n - 1)


def test_contact_order_random_line():
    line = LineParams.random_admissible(np.random.default_rng(3))
    assert contact_order_check(3, line, 500, seed=1).ok


def test_inverse_graphs_outside_m():
    bt = trace_inverse_graphs(4.0, 0.5, DEFAULT_LINE, n=3, grid_pts=8)
    assert bt.values.shape == (8, 8, 9)
    assert bt.max_residual < 1e-9
    assert bt.min_pairwise > 0
    assert bt.green_floor > 0
    assert np.all(np.isfinite(bt.max_derivative))


def test_inverse_graphs_derivative_stable_in_depth():
    d = [trace_inverse_graphs(4.0, 0.5, DEFAULT_LINE, n, 8).max_derivative.max()
         for n in (3, 4, 5)]
    assert max(d) / min(d) < 1.2


def test_inverse_graphs_obstructed_by_m():
    with pytest.raises(PostcriticalObstruction):
        trace_inverse_graphs(0.0, 0.5, DEFAULT_LINE, 3, 4)


def test_inverse_graphs_refinement_limit():
    with pytest.raises(ContinuationBreak):
        trace_inverse_graphs(4.0, 1.5, DEFAULT_LINE, n=5, grid_pts=2, max_refine=0)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bifcurrent.oracle import (aberth_roots, companion_roots, line_coeffs, multiset_distance,
                               qk_coeffs)
from bifcurrent.roots import DEFAULT_LINE, LineParams, qk_eval, solve_qk_eq


def test_qk_coeffs_small():
    assert qk_coeffs(1) == [0, 1]
    assert qk_coeffs(2) == [0, 1, 1]
    assert qk_coeffs(3) == [0, 1, 1, 2, 1]


@pytest.mark.parametrize("k", range(1, 10))
def test_qk_coeffs_structure(k):
    a = qk_coeffs(k)
    assert len(a) == 2 ** (k - 1) + 1
    assert a[-1] == 1 and a[0] == 0 and a[1] == 1
    assert all(x >= 0 for x in a)


@settings(max_examples=30)
@given(st.integers(1, 7), st.complex_numbers(max_magnitude=1.2))
def test_qk_coeffs_agree_with_recursion(k, c):
    a = qk_coeffs(k)
    poly = sum(complex(x) * c ** i for i, x in enumerate(a))
    q, _ = qk_eval(k, c)
    # rounding in the dense sum scales with sum |a_i| |c|^i, not with |q|
    scale = sum(x * abs(c) ** i for i, x in enumerate(a))
    assert abs(poly - q) <= 1e-13 * (1 + scale)


def test_qk_coeffs_exact_at_one():
    # Q_k(1) is the integer orbit 1, 2, 5, 26, 677, ...
    orbit = 0
    for k in range(1, 12):
        orbit = orbit * orbit + 1
        assert sum(qk_coeffs(k)) == orbit


def test_qk_coeffs_bounds():
    with pytest.raises(ValueError):
        qk_coeffs(0)
    with pytest.raises(ValueError):
        qk_coeffs(15)


def test_line_coeffs():
    assert line_coeffs(2, LineParams(0.25, 3)) == [-3, 0.75, 1]


def test_companion_roots_quadratic():
    r = companion_roots([2, -3, 1])
    np.testing.assert_allclose(np.sort(r.real), [1, 2], atol=1e-12)


def test_companion_roots_trims_zeros():
    assert len(companion_roots([1, 1, 0, 0])) == 1
    assert len(companion_roots([5])) == 0


@pytest.mark.parametrize("k", range(1, 7))
def test_aberth_matches_newton(k):
    res = aberth_roots(k, DEFAULT_LINE)
    assert res.converged
    assert multiset_distance(res.roots, solve_qk_eq(k).roots) < 1e-10


def test_aberth_matches_companion_for_small_k():
    line = LineParams(0.3 - 0.2j, 0.5j)
    comp = companion_roots(line_coeffs(4, line))
    assert multiset_distance(aberth_roots(4, line).roots, comp) < 1e-10


def test_multiset_distance():
    a = [0, 1, 1j]
    assert multiset_distance(a, [1j + 1e-3, 0, 1]) == pytest.approx(1e-3)
    assert multiset_distance(a, [0, 1]) == np.inf
    assert multiset_distance([], []) == 0.0

from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import legendre as npleg
from numpy.testing import assert_allclose, assert_array_equal

from capsobolev.errors import DomainError
from capsobolev.legendre import (
    UltrasphericalBasis,
    P_deriv_at_one,
    eval_one_minus_P_table,
    eval_P,
    eval_P_deriv,
    eval_P_explicit,
    eval_P_table,
    remainder_from_gap,
    sharp_bound_ratio,
    taylor_coeff,
    taylor_remainder,
    taylor_table,
)


def gegenbauer_normalized(d, l, s, dps=40):
    """Independent oracle: mpmath Gegenbauer / Chebyshev normalized to 1 at s = 1."""
    with mp.workdps(dps):
        if d == 2:
            return float(mp.chebyt(l, s))
        lam = mp.mpf(d - 2) / 2
        return float(mp.gegenbauer(l, lam, s) / mp.gegenbauer(l, lam, 1))


def remainder_oracle(d, l, n, gap, dps=60):
    """Exact tail sum in extended precision with rational Taylor coefficients."""
    with mp.workdps(dps):
        g = mp.mpf(gap)
        c, total = mp.mpf(1), mp.mpf(0)
        for k in range(l + 1):
            if k > n:
                total += c * g**k
            c *= -mp.mpf((l - k) * (l + k + d - 2)) / ((k + 1) * (2 * k + d - 1))
        return float(total)


class TestEvalP:
    @pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
    def test_value_at_one(self, d):
        vals = eval_P_table(d, 256, 1.0)
        assert np.max(np.abs(vals - 1.0)) <= 1e-14
        for l in (0, 7, 100):
            assert abs(eval_P(d, l, 1.0) - 1.0) <= 1e-14

    @pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
    def test_degree_one_is_identity(self, d):
        s = np.linspace(-1, 1, 11)
        assert_allclose(eval_P(d, 1, s), s, rtol=0, atol=1e-15)

    def test_classical_p2_at_zero(self):
        assert eval_P(3, 2, 0.0) == pytest.approx(-0.5, abs=1e-15)

    @pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
    @pytest.mark.parametrize("l", range(11))
    def test_recurrence_matches_explicit_sum(self, d, l):
        for s in np.linspace(-1, 1, 13):
            ref = eval_P_explicit(d, l, float(s))
            assert eval_P(d, l, float(s)) == pytest.approx(ref, rel=1e-12, abs=1e-15)

    @pytest.mark.parametrize("d,l", [(2, 40), (3, 64), (4, 25), (5, 128), (7, 33)])
    def test_matches_gegenbauer_oracle(self, d, l):
        s = np.cos(np.linspace(0.0, math.pi, 17))
        ref = np.array([gegenbauer_normalized(d, l, float(x)) for x in s])
        assert_allclose(eval_P(d, l, s), ref, rtol=0, atol=1e-13)

    def test_classical_legendre_against_numpy(self):
        s = np.linspace(-1, 1, 101)
        table = eval_P_table(3, 50, s)
        for l in (3, 17, 50):
            assert_allclose(table[l], npleg.legval(s, [0] * l + [1]), atol=1e-13)

    @given(st.integers(2, 8), st.integers(0, 200), st.floats(-1, 1))
    @settings(max_examples=200, deadline=None)
    def test_bounded_by_one(self, d, l, s):
        assert abs(eval_P(d, l, s)) <= 1.0 + 1e-12

    def test_basis_table_shape(self):
        basis = UltrasphericalBasis(4, 6)
        out = basis(np.zeros((2, 3)))
        assert out.shape == (7, 2, 3)

    @pytest.mark.parametrize("bad", [1.5, -1.0001, float("nan")])
    def test_out_of_range_s(self, bad):
        with pytest.raises(DomainError):
            eval_P(3, 2, bad)

    def test_negative_degree(self):
        with pytest.raises(DomainError):
            eval_P(3, -1, 0.3)
        with pytest.raises(DomainError):
            UltrasphericalBasis(1, 4)

    @pytest.mark.parametrize("d", [3, 4, 5])
    def test_deficit_table_keeps_relative_precision(self, d):
        gaps = np.array([1e-12, 1e-8, 1e-5, 1e-3])
        e = eval_one_minus_P_table(d, 40, gaps)
        for l in (1, 10, 40):
            # 1 - P_l(1 - g) = -sum_k c_k g^k exactly
            ref = [-remainder_oracle(d, l, 0, g) for g in gaps]
            assert_allclose(e[l], ref, rtol=1e-13)


class TestDerivatives:
    @pytest.mark.parametrize("d,l,k,expected", [(3, 2, 1, 3.0), (3, 5, 0, 1.0), (4, 3, 5, 0.0)])
    def test_at_one_examples(self, d, l, k, expected):
        assert P_deriv_at_one(d, l, k) == pytest.approx(expected, rel=1e-15)

    def test_examples(self):
        assert eval_P_deriv(3, 2, 1, 1.0) == pytest.approx(3.0)
        assert eval_P_deriv(3, 2, 1, 0.0) == pytest.approx(0.0, abs=1e-15)
        assert_array_equal(eval_P_deriv(5, 3, 4, np.linspace(-1, 1, 5)), 0.0)

    @pytest.mark.parametrize("l", [1, 4, 9, 20])
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_classical_against_numpy(self, l, k):
        s = np.linspace(-1, 1, 41)
        ref = npleg.legval(s, npleg.legder([0] * l + [1], k))
        assert_allclose(eval_P_deriv(3, l, k, s), ref, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(ref).max()))

    @pytest.mark.parametrize("d", [4, 5, 6])
    def test_general_d_against_mpmath(self, d):
        l = 7
        lam = mp.mpf(d - 2) / 2
        norm = mp.gegenbauer(l, lam, 1)
        for k in (1, 2, 3):
            for s in (-0.8, 0.1, 0.65):
                ref = float(mp.diff(lambda x: mp.gegenbauer(l, lam, x) / norm, s, k))
                assert eval_P_deriv(d, l, k, s) == pytest.approx(ref, rel=1e-10, abs=1e-10)

    @pytest.mark.parametrize("d", [2, 3, 4, 5])
    @pytest.mark.parametrize("l", [3, 12, 40])
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_bounded_by_value_at_one(self, d, l, k):
        s = np.linspace(-1, 1, 401)
        top = P_deriv_at_one(d, l, k)
        assert np.all(np.abs(eval_P_deriv(d, l, k, s)) <= top * (1 + 1e-12))
        assert eval_P_deriv(d, l, k, 1.0) == pytest.approx(top, rel=1e-13)

    def test_growth_like_l_to_2k(self):
        # P^{(k)}(1) ~ l^{2k} / ((d-1)(d+1)...(d+2k-3))
        d, k = 4, 2
        ratios = [P_deriv_at_one(d, l, k) / l ** (2 * k) for l in (100, 1000, 10000)]
        limit = 1.0 / ((d - 1) * (d + 1))
        assert abs(ratios[-1] - limit) < abs(ratios[0] - limit)
        assert ratios[-1] == pytest.approx(limit, rel=1e-3)

    def test_negative_order(self):
        with pytest.raises(DomainError):
            P_deriv_at_one(3, 2, -1)
        with pytest.raises(DomainError):
            eval_P_deriv(3, 2, -1, 0.0)


class TestTaylor:
    def test_examples(self):
        assert taylor_coeff(3, 0, 9) == 1.0
        assert taylor_coeff(3, 1, 2) == pytest.approx(-3.0)
        assert taylor_coeff(4, 6, 5) == 0.0

    @pytest.mark.parametrize("d", [2, 3, 5])
    def test_table_invariants(self, d):
        tab = taylor_table(d, 8, 30)
        assert_array_equal(tab.c[0], 1.0)
        for k in range(9):
            for l in range(31):
                v = tab[k, l]
                if k > l:
                    assert v == 0.0
                else:
                    assert np.sign(v) == (-1) ** k
                    assert v == pytest.approx(taylor_coeff(d, k, l), rel=1e-14)

    @pytest.mark.parametrize("l", [2, 5, 11])
    def test_coefficients_expand_the_polynomial(self, l):
        # classical Legendre rewritten in powers of (1 - s)
        with mp.workdps(40):
            ref = mp.taylor(lambda x: mp.legendre(l, 1 - x), 0, l)
        got = [taylor_coeff(3, k, l) for k in range(l + 1)]
        assert_allclose(got, [float(r) for r in ref], rtol=1e-13)

    def test_relation_to_derivative(self):
        for k in range(5):
            assert taylor_coeff(5, k, 9) == pytest.approx((-1) ** k * P_deriv_at_one(5, 9, k) / math.factorial(k))


class TestRemainder:
    def test_examples(self):
        assert taylor_remainder(3, 5, 2, 1.0) == 0.0
        assert_array_equal(taylor_remainder(4, 3, 3, np.linspace(-1, 1, 7)), 0.0)
        assert taylor_remainder(3, 2, 0, 0.0) == pytest.approx(-1.5, rel=1e-15)

    @pytest.mark.parametrize("d", [3, 4, 5])
    @pytest.mark.parametrize("l", [8, 32, 128])
    @pytest.mark.parametrize("n", [0, 1, 2])
    def test_paths_agree_on_overlap(self, d, l, n):
        gaps = np.linspace(0.5, 2.0, 7) / l**2
        tail = remainder_from_gap(d, l, n, gaps, "tail")
        direct = remainder_from_gap(d, l, n, gaps, "direct")
        assert_allclose(direct, tail, rtol=1e-10)

    @pytest.mark.parametrize("d,l,n", [(3, 128, 2), (5, 128, 2), (4, 32, 1), (3, 256, 0)])
    def test_tail_matches_extended_precision(self, d, l, n):
        gaps = np.array([1e-9, 1e-6, 0.5, 1.0]) / l**2
        ref = [remainder_oracle(d, l, n, g) for g in gaps]
        assert_allclose(remainder_from_gap(d, l, n, gaps), ref, rtol=1e-14)

    @pytest.mark.parametrize("d", [2, 3, 6])
    @pytest.mark.parametrize("l", [5, 20, 60])
    def test_direct_far_from_one(self, d, l):
        s = np.linspace(-0.95, 0.9, 9)
        for n in (0, 1, 3):
            ref = np.array([remainder_oracle(d, l, n, 1 - x, dps=120) for x in s])
            # recurrence rounding is absolute, about l * eps
            assert_allclose(taylor_remainder(d, l, n, s), ref, rtol=1e-11, atol=l * 1e-15)

    def test_identity_with_polynomial(self):
        d, l, n = 4, 9, 3
        s = np.linspace(-1, 1, 21)
        partial = sum(taylor_coeff(d, k, l) * (1 - s) ** k for k in range(n + 1))
        assert_allclose(taylor_remainder(d, l, n, s), eval_P(d, l, s) - partial, atol=1e-12)

    def test_small_gap_order(self):
        # R_{n+1} ~ c_{n+1} gap^{n+1}
        d, l, n = 3, 40, 2
        g = np.array([1e-8, 5e-9])
        r = remainder_from_gap(d, l, n, g)
        assert r[0] / r[1] == pytest.approx(2.0 ** (n + 1), rel=1e-5)

    def test_scalar_and_array(self):
        assert isinstance(taylor_remainder(3, 6, 1, 0.3), float)
        assert taylor_remainder(3, 6, 1, np.array([[0.3]])).shape == (1, 1)

    def test_bad_method(self):
        with pytest.raises(DomainError):
            remainder_from_gap(3, 6, 1, np.array([0.1]), "fast")


class TestSharpBound:
    @pytest.mark.parametrize("d", [3, 4, 5])
    def test_finite_and_stable(self, d):
        ls = [8, 16, 32, 64, 128, 256]
        ratios = np.array([sharp_bound_ratio(d, l) for l in ls])
        assert np.all(np.isfinite(ratios))
        # settles as l grows: each doubling moves it less, the last by under 2%
        changes = np.abs(np.diff(ratios)) / ratios[1:]
        assert np.all(np.diff(changes) < 0)
        assert changes[-1] < 0.02
        assert ratios.max() / ratios.min() < 2.0

    def test_empty_window(self):
        with pytest.raises(DomainError):
            sharp_bound_ratio(3, 2)

from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy.integrate import quad
from scipy.special import eval_gegenbauer

from capsobolev.caps import (
    CapAverageContext,
    _refined,
    apply_multiplier,
    default_t_grid,
    distance_power_average,
    multiplier,
    multiplier_deficits,
    multiplier_table,
    multipliers,
    normalizer,
    sphere_area,
    z_bracket,
)
from capsobolev.errors import DomainError, ParameterError, QuadratureError, WeightError
from capsobolev.sphere2 import HarmonicCoeffs
from capsobolev.weights import Weight, eval_rho


def uniform_cap_multiplier(l, t, dps=30):
    """Uniform cap average of P_l on S^2, from integrating Legendre polynomials over the cap."""
    with mp.workdps(dps):
        c = mp.cos(mp.mpf(t))
        if l == 0:
            return 1.0
        return float((mp.legendre(l - 1, c) - mp.legendre(l + 1, c)) / ((2 * l + 1) * (1 - c)))


def quad_multiplier(d, w, l, t):
    """Independent oracle: adaptive quadrature with scipy's Gegenbauer polynomials."""
    lam = 0.5 * (d - 2)

    def P(s):
        if d == 2:
            return math.cos(l * math.acos(s))
        return eval_gegenbauer(l, lam, s) / eval_gegenbauer(l, lam, 1.0)

    cuts = sorted({0.0, w.T, w.t0, w.T0})
    num = den = 0.0
    for a, b in zip(cuts, cuts[1:]):
        meas = lambda th: math.sin(t * th / w.T) ** (d - 2) * eval_rho(w, th)  # noqa: E731
        num += quad(lambda th: P(math.cos(t * th / w.T)) * meas(th), a, b, limit=500, epsabs=1e-15, epsrel=1e-13)[0]
        den += quad(meas, a, b, limit=500, epsabs=1e-15, epsrel=1e-13)[0]
    return num / den


class TestContext:
    def test_rejects_few_nodes(self, uniform):
        with pytest.raises(ParameterError):
            CapAverageContext(3, uniform, nodes=8)

    def test_rejects_bad_dimension(self, uniform):
        with pytest.raises(DomainError):
            CapAverageContext(1, uniform)

    def test_rejects_invalid_weight(self):
        with pytest.raises(WeightError):
            CapAverageContext(3, Weight.indicator(2.0, 1.5, 1.0))

    @pytest.mark.parametrize("t", [0.0, -0.1, 4.0])
    def test_t_range(self, uniform_ctx, t):
        with pytest.raises(DomainError):
            multiplier(uniform_ctx, 2, t)

    def test_sphere_area(self):
        assert sphere_area(0) == pytest.approx(2.0)
        assert sphere_area(1) == pytest.approx(2 * math.pi)
        assert sphere_area(2) == pytest.approx(4 * math.pi)


class TestNormalizer:
    @pytest.mark.parametrize("t", [1e-3, 0.4, math.pi / 2, math.pi])
    def test_uniform_cap_area(self, uniform_ctx, t):
        assert normalizer(uniform_ctx, t) == pytest.approx(2 * math.pi * (1 - math.cos(t)), rel=1e-13)

    @pytest.mark.parametrize("d", [3, 4, 5])
    def test_bracket_small_t(self, d):
        w = Weight.indicator(2.5, 0.5, 1.5)
        ctx = CapAverageContext(d, w)
        cz, Cz = z_bracket(ctx)
        eps = 0.1
        for t in np.geomspace(1e-4, 0.7, 12):
            # sin x >= (1 - eps) x holds for x <= t here
            ratio = normalizer(ctx, t) / t ** (d - 1)
            assert cz * (1 - eps) ** (d - 2) <= ratio <= Cz

    def test_small_t_limit(self):
        w = Weight.power(2.0, 1.0)
        ctx = CapAverageContext(4, w)
        r = [normalizer(ctx, t) / t**3 for t in (1e-2, 1e-3, 1e-4)]
        assert abs(r[2] - r[1]) < abs(r[1] - r[0])
        _, Cz = z_bracket(ctx)
        assert r[2] == pytest.approx(Cz, rel=1e-6)


class TestMultiplier:
    @pytest.mark.parametrize("name", ["constant", "indicator", "power", "table"])
    def test_degree_zero(self, sample_weights, name):
        ctx = CapAverageContext(3, sample_weights[name])
        tab = multiplier_table(ctx, 8, default_t_grid(ctx.T, 40))
        assert np.max(np.abs(tab.values[0] - 1.0)) <= 1e-12

    def test_examples(self, uniform_ctx):
        assert multiplier(uniform_ctx, 0, 1.1) == 1.0
        assert multiplier(uniform_ctx, 1, math.pi / 2) == pytest.approx(0.5, rel=1e-14)
        m = multipliers(uniform_ctx, 20, math.pi)
        assert np.max(np.abs(m[1:])) <= 1e-13

    @pytest.mark.parametrize("t", [0.003, 0.2, 1.0, 2.9])
    def test_uniform_closed_form(self, uniform_ctx, t):
        m = multipliers(uniform_ctx, 64, t)
        ref = [uniform_cap_multiplier(l, t) for l in range(65)]
        assert_allclose(m, ref, rtol=1e-10, atol=1e-15)

    @pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
    @pytest.mark.parametrize("d", [2, 4, 5])
    @pytest.mark.parametrize("name", ["indicator", "power"])
    def test_general_d_against_quad(self, sample_weights, d, name):
        w = sample_weights[name]
        ctx = CapAverageContext(d, w)
        for t in (0.3, 1.7):
            m = multipliers(ctx, 12, t)
            for l in (1, 5, 12):
                assert m[l] == pytest.approx(quad_multiplier(d, w, l, t), rel=1e-9, abs=1e-12)

    @pytest.mark.parametrize("d", [3, 4])
    @pytest.mark.parametrize("name", ["constant", "constant-short", "indicator", "power", "power-frac", "table"])
    def test_bounded_by_one(self, sample_weights, d, name):
        ctx = CapAverageContext(d, sample_weights[name])
        tab = multiplier_table(ctx, 64, default_t_grid(ctx.T, 30))
        assert np.max(np.abs(tab.values)) <= 1 + 1e-10

    @pytest.mark.parametrize("t", [1e-6, 1e-4, 1e-2])
    def test_deficit_relative_precision(self, uniform_ctx, t):
        dm = multiplier_deficits(uniform_ctx, 30, t)
        with mp.workdps(40):
            c = mp.cos(mp.mpf(t))
            for l in (1, 7, 30):
                ref = 1 - (mp.legendre(l - 1, c) - mp.legendre(l + 1, c)) / ((2 * l + 1) * (1 - c))
                assert dm[l] == pytest.approx(float(ref), rel=1e-12)
        assert dm[0] == 0.0

    def test_small_t_tends_to_one(self, sample_weights):
        ctx = CapAverageContext(3, sample_weights["indicator"])
        devs = [np.max(np.abs(multipliers(ctx, 10, t) - 1)) for t in (1e-1, 1e-2, 1e-3)]
        assert devs[0] > devs[1] > devs[2]
        assert devs[2] < 1e-4

    def test_refinement_failure(self, uniform_ctx):
        rng = np.random.default_rng(0)

        def noisy(gap, W):
            return np.array([rng.standard_normal()])

        with pytest.raises(QuadratureError) as info:
            _refined(uniform_ctx, 0.5, 4, noisy)
        assert info.value.estimate > 0


class TestTable:
    def test_invariants(self, uniform_ctx):
        tab = multiplier_table(uniform_ctx, 16)
        assert tab.values.shape == (17, 200)
        assert_array_equal(tab.ls, np.arange(17))
        assert tab.ts[0] == pytest.approx(math.pi * 1e-4)
        assert tab.ts[-1] == pytest.approx(math.pi)
        assert not tab.values.flags.writeable
        ratios = tab.ts[1:] / tab.ts[:-1]
        assert_allclose(ratios, ratios[0])

    def test_matches_pointwise(self, sample_weights):
        ctx = CapAverageContext(4, sample_weights["table"])
        ts = np.array([0.01, 0.5, 3.0])
        tab = multiplier_table(ctx, 20, ts)
        for j, t in enumerate(ts):
            assert_allclose(tab.values[:, j], multipliers(ctx, 20, t), rtol=1e-12, atol=1e-14)


class TestDistancePower:
    def test_examples(self, uniform_ctx):
        assert distance_power_average(uniform_ctx, 0, 0.7) == 1.0
        for t in (0.1, 1.0, 2.5):
            assert distance_power_average(uniform_ctx, 1, t) == pytest.approx(1 - math.cos(t), rel=1e-13)
        assert distance_power_average(uniform_ctx, 1, math.pi / 2) == pytest.approx(1.0, rel=1e-14)

    def test_independent_oracle(self, sample_weights):
        w = sample_weights["power"]
        d, k, t = 4, 2, 1.3
        meas = lambda th: math.sin(t * th / w.T) ** (d - 2) * th  # noqa: E731
        num = quad(lambda th: (2 - 2 * math.cos(t * th / w.T)) ** k * meas(th), 0, w.T, epsrel=1e-13)[0]
        den = quad(meas, 0, w.T, epsrel=1e-13)[0]
        ctx = CapAverageContext(d, w)
        assert distance_power_average(ctx, k, t) == pytest.approx(num / den, rel=1e-12)

    @pytest.mark.parametrize("k", [1, 2, 3])
    @pytest.mark.parametrize("name", ["indicator", "power-frac", "constant"])
    def test_scales_like_t_to_2k(self, sample_weights, name, k):
        ctx = CapAverageContext(3, sample_weights[name])
        ts = np.geomspace(1e-4, ctx.T, 25)
        r = np.array([distance_power_average(ctx, k, t) / t ** (2 * k) for t in ts])
        # chord >= (2 / pi) arc, so the ratio moves by at most (pi / 2)^{2k}
        assert r.min() > 0
        assert r.max() / r.min() <= (math.pi / 2) ** (2 * k) * (1 + 1e-12)

    def test_negative_order(self, uniform_ctx):
        with pytest.raises(DomainError):
            distance_power_average(uniform_ctx, -1, 0.5)


class TestApply:
    def test_constant_unchanged(self, uniform_ctx):
        c = HarmonicCoeffs.single(3, 6, 0, [2.5])
        out = apply_multiplier(uniform_ctx, c, 1.0)
        assert out.blocks[0][0] == pytest.approx(2.5)
        assert out.norm_sq() == pytest.approx(c.norm_sq())

    def test_degree_one_halved(self, uniform_ctx):
        c = HarmonicCoeffs.single(3, 4, 1, [0.3, -1.0, 2.0])
        out = apply_multiplier(uniform_ctx, c, math.pi / 2)
        assert_allclose(out.blocks[1], 0.5 * c.blocks[1], rtol=1e-14)

    def test_identity_as_t_to_zero(self, uniform_ctx, rng):
        c = HarmonicCoeffs.random(3, 12, rng)
        diffs = [(apply_multiplier(uniform_ctx, c, t) - c).norm_sq() for t in (1e-1, 1e-2, 1e-3)]
        assert diffs[0] > diffs[1] > diffs[2]
        assert diffs[2] < 1e-8 * c.norm_sq()

    @pytest.mark.parametrize("name", ["constant", "indicator", "power", "table"])
    def test_norm_not_increased(self, sample_weights, name, rng):
        ctx = CapAverageContext(3, sample_weights[name])
        c = HarmonicCoeffs.random(3, 20, rng)
        for t in np.geomspace(0.01, ctx.T, 6):
            assert apply_multiplier(ctx, c, t).norm_sq() <= c.norm_sq() * (1 + 1e-12)

    def test_general_d(self, rng):
        ctx = CapAverageContext(5, Weight.constant(2.0))
        c = HarmonicCoeffs.random(5, 6, rng)
        out = apply_multiplier(ctx, c, 0.8)
        m = multipliers(ctx, 6, 0.8)
        for l in range(7):
            assert_allclose(out.blocks[l], m[l] * c.blocks[l])

    def test_dimension_mismatch(self, uniform_ctx):
        with pytest.raises(ParameterError):
            apply_multiplier(uniform_ctx, HarmonicCoeffs.zeros(4, 3), 0.5)

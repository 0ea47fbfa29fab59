import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparse_rp.ensembles import EnsembleSpec
from sparse_rp.theory import (
    SQRT_2_OVER_PI,
    JLBoundParams,
    SignalModel,
    expected_abs_dot_gaussian,
    expected_abs_dot_mixture,
    expected_abs_dot_sparse,
    expected_abs_truncnorm,
    expected_feature_hits,
    feature_hit_ratio,
    jl_lower_tail_bound,
    jl_upper_tail_bound,
    lemma4_sufficient_condition,
    norm_ratio_variance,
    normal_cdf,
    normalized_abs_dot_sparse,
    row_weight,
)


# -- JL bounds -------------------------------------------------------------------


def test_lower_tail_examples():
    assert jl_lower_tail_bound(JLBoundParams(100, 100, 0.5)) == pytest.approx(math.exp(-3.125), rel=1e-14)
    assert jl_lower_tail_bound(JLBoundParams(100, 100, 0.5)) == pytest.approx(0.0439, abs=5e-5)
    assert jl_lower_tail_bound(JLBoundParams(100, 1, 0.5)) == pytest.approx(math.exp(-12.5 / 202), rel=1e-14)
    assert jl_lower_tail_bound(JLBoundParams(100, 1, 0.5)) == pytest.approx(0.9399, abs=1e-4)
    assert jl_lower_tail_bound(JLBoundParams(100, 100, 0.5)) < jl_lower_tail_bound(JLBoundParams(100, 1, 0.5))


@pytest.mark.parametrize("eps", [0.0, 1.0, -0.1, 1.5])
def test_lower_tail_rejects_eps(eps):
    with pytest.raises(ValueError):
        jl_lower_tail_bound(JLBoundParams(10, 2, eps))


def test_params_derived_quantities():
    p = JLBoundParams(100, 4, 0.3)
    assert p.B == 25.0
    assert p.L == pytest.approx(math.sqrt(50))
    assert JLBoundParams.for_fourth_moment(50, 3.0, 0.5).s == pytest.approx(50 / 3)
    with pytest.raises(ValueError):
        JLBoundParams(10, 11, 0.5)
    with pytest.raises(ValueError):
        JLBoundParams(10, 0.5, 0.5)


def test_upper_tail_example():
    # (1.5 e^{-0.5})^{50}; hand value 0.0088553
    ub = jl_upper_tail_bound(JLBoundParams(100, 100, 0.5))
    assert ub.first_form == pytest.approx((1.5 * math.exp(-0.5)) ** 50, rel=1e-12)
    assert ub.first_form == pytest.approx(0.0088553, rel=1e-4)
    assert ub.bound == ub.first_form
    assert ub.L_squared == pytest.approx(2.0)


def test_upper_tail_limit_and_errors():
    assert jl_upper_tail_bound(JLBoundParams(100, 10, 1e-9)).bound == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        jl_upper_tail_bound(JLBoundParams(100, 10, 0.0))


@settings(max_examples=200)
@given(eps=st.floats(1e-4, 0.999), k=st.integers(1, 5000))
def test_upper_first_form_below_second(eps, k):
    ub = jl_upper_tail_bound(JLBoundParams(k, 1, eps))
    assert ub.first_form <= ub.second_form * (1 + 1e-12)


@settings(max_examples=200)
@given(k=st.integers(2, 2000), s1=st.floats(1, 1e6), s2=st.floats(1, 1e6), eps=st.floats(0.01, 0.99))
def test_lower_tail_monotone_in_B(k, s1, s2, eps):
    s1, s2 = min(s1, k), min(s2, k)
    lo, hi = sorted([s1, s2])
    # larger s means smaller B
    assert jl_lower_tail_bound(JLBoundParams(k, lo, eps)) >= jl_lower_tail_bound(JLBoundParams(k, hi, eps))


@settings(max_examples=200)
@given(B=st.floats(1, 100), k=st.integers(100, 5000), eps=st.floats(0.01, 0.99))
def test_lower_tail_decreasing_in_k(B, k, eps):
    a = jl_lower_tail_bound(JLBoundParams.for_fourth_moment(k, B, eps))
    b = jl_lower_tail_bound(JLBoundParams.for_fourth_moment(k + 1, B, eps))
    assert b <= a


# -- sparse rows, two-point differences -------------------------------------------


def exact_normalized(s):
    h = (s + 1) // 2
    return 2 * Fraction(h * math.comb(s, h), 2**s)


def test_sparse_examples():
    assert expected_abs_dot_sparse(100, 1, 2.0) == pytest.approx(20.0, rel=1e-15)
    assert normalized_abs_dot_sparse(1) == 1.0
    assert expected_abs_dot_sparse(1, 1, 1.0) == 1.0
    assert normalized_abs_dot_sparse(2) == pytest.approx(1 / math.sqrt(2), rel=1e-15)
    assert normalized_abs_dot_sparse(2) == pytest.approx(0.70711, abs=5e-6)
    assert normalized_abs_dot_sparse(3) == pytest.approx(1.5 / math.sqrt(3), rel=1e-15)
    assert normalized_abs_dot_sparse(3) == pytest.approx(0.86603, abs=5e-6)
    assert normalized_abs_dot_sparse(10**6) == pytest.approx(0.7979, abs=1e-4)


def test_sparse_exact_to_twelve_digits():
    for s in range(1, 51):
        exact = float(exact_normalized(s)) / math.sqrt(s)
        assert normalized_abs_dot_sparse(s) == pytest.approx(exact, rel=1e-12)


def test_log_gamma_path_is_continuous_with_exact_path():
    # the log-gamma branch starts at s = 51; compare it with exact rationals
    for s in range(51, 120):
        exact = float(exact_normalized(s)) / math.sqrt(s)
        assert normalized_abs_dot_sparse(s) == pytest.approx(exact, rel=1e-12)


def test_sparse_large_s_no_overflow():
    vals = normalized_abs_dot_sparse(np.array([10**4, 10**5, 10**6]))
    assert np.all(np.isfinite(vals))
    assert np.allclose(vals, SQRT_2_OVER_PI, atol=1e-3)


def test_sparse_errors():
    with pytest.raises(ValueError):
        expected_abs_dot_sparse(10, 11, 1.0)
    with pytest.raises(ValueError):
        expected_abs_dot_sparse(10, 0, 1.0)
    with pytest.raises(ValueError):
        expected_abs_dot_sparse(10, 2, 0.0)


def test_parity_monotonicity():
    e = normalized_abs_dot_sparse(np.arange(1, 202))
    odd = e[0::2]   # s = 1, 3, 5, ...
    even = e[1::2]  # s = 2, 4, 6, ...
    assert np.all(np.diff(odd) < 0)
    assert np.all(np.diff(even) > 0)
    assert np.all(odd > SQRT_2_OVER_PI) and np.all(even < SQRT_2_OVER_PI)


def test_adjacent_pair_average():
    # within 0.01 of sqrt(2/pi) from s = 4 on; s = 2 and 3 miss by a little more
    e = normalized_abs_dot_sparse(np.arange(2, 202))
    gap = np.abs(0.5 * (e[:-1] + e[1:]) - SQRT_2_OVER_PI)
    assert np.all(gap[2:] < 0.01)
    assert gap[0] == pytest.approx(SQRT_2_OVER_PI - 0.5 * (1 / math.sqrt(2) + 1.5 / math.sqrt(3)), rel=1e-12)
    assert gap[0] == pytest.approx(0.011318, abs=1e-6)
    assert gap[1] == pytest.approx(0.010128, abs=1e-6)


def test_maximum_at_one():
    e = normalized_abs_dot_sparse(np.arange(1, 10_001))
    assert e[0] == 1.0
    assert np.all(e[1:] < 1.0)


def test_gaussian_examples():
    assert expected_abs_dot_gaussian(1, 1.0) == pytest.approx(0.79788, abs=5e-6)
    assert expected_abs_dot_gaussian(4, 1.0) == pytest.approx(2 * math.sqrt(2 / math.pi), rel=1e-15)
    assert expected_abs_dot_gaussian(400, 1.0) == pytest.approx(15.9577, abs=5e-5)
    assert expected_abs_dot_sparse(400, 400, 1.0) == pytest.approx(expected_abs_dot_gaussian(400, 1.0), rel=2e-3)


# -- Gaussian differences ---------------------------------------------------------


def test_truncnorm_examples():
    assert expected_abs_truncnorm(0.0, 1.0) == pytest.approx(SQRT_2_OVER_PI, rel=1e-15)
    assert expected_abs_truncnorm(5.0, 0.0) == 5.0
    assert expected_abs_truncnorm(1.0, 1.0) == pytest.approx(1.16663, abs=5e-6)
    with pytest.raises(ValueError):
        expected_abs_truncnorm(1.0, -1.0)


def test_normal_cdf():
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(-1.0) == pytest.approx(0.15865525393145707, abs=1e-15)
    assert normal_cdf(-30.0) == pytest.approx(4.906713927148187e-198, rel=1e-12)


@pytest.mark.parametrize("s", [1, 2, 3, 7, 20, 64])
def test_mixture_collapses_to_two_point(s):
    model = SignalModel(200, 200, 1.5, 0.0)
    assert expected_abs_dot_mixture(200, s, model) == pytest.approx(expected_abs_dot_sparse(200, s, 1.5), rel=1e-12)
    tiny = SignalModel(200, 200, 1.5, 1e-12)
    assert expected_abs_dot_mixture(200, s, tiny) == pytest.approx(expected_abs_dot_sparse(200, s, 1.5), rel=1e-9)


@pytest.mark.parametrize("mu,sigma", [(1.0, 1.0), (3.0, 1.0), (0.2, 2.0)])
def test_mixture_s1_is_scaled_truncnorm(mu, sigma):
    model = SignalModel(100, 100, mu, sigma)
    assert expected_abs_dot_mixture(100, 1, model) == pytest.approx(10 * expected_abs_truncnorm(mu, sigma), rel=1e-14)


def test_mixture_large_s_is_finite():
    model = SignalModel(10**5, 10**5, 1.0, 0.5)
    val = expected_abs_dot_mixture(10**5, 20_000, model)
    assert math.isfinite(val)
    assert val / math.sqrt(10**5) == pytest.approx(math.sqrt(2 / math.pi) * math.sqrt(1.25), rel=1e-3)


def test_signal_model():
    m = SignalModel(10, 4, 1.0, 1.0)
    assert m.d_r == 6
    assert m.epsilon_sign == pytest.approx(0.15865525393145707)
    assert SignalModel(10, 4, 1.0, 0.0).epsilon_sign == 0.0
    for bad in [(10, 0, 1, 1), (10, 11, 1, 1), (10, 4, 0, 1), (10, 4, 1, -1)]:
        with pytest.raises(ValueError):
            SignalModel(*bad)


def test_lemma4_examples():
    limit = lemma4_sufficient_condition(SignalModel(10, 10, 1.0, 1e-12))
    assert limit.holds
    assert limit.lhs == pytest.approx((9 / 8) ** 1.5 * SQRT_2_OVER_PI, rel=1e-9)
    assert limit.lhs == pytest.approx(0.952070, abs=1e-6)
    same = lemma4_sufficient_condition(SignalModel(10, 10, 1.0, 1.0))
    assert not same.holds and same.lhs > 1
    with pytest.raises(ValueError):
        lemma4_sufficient_condition(SignalModel(10, 10, 1.0, 0.0))


def test_lemma4_threshold_region():
    # the condition turns on between mu/sigma = 20 and 25
    assert not lemma4_sufficient_condition(SignalModel(10, 10, 20.0, 1.0)).holds
    assert lemma4_sufficient_condition(SignalModel(10, 10, 25.0, 1.0)).holds


@settings(max_examples=30, deadline=None)
@given(ratio=st.floats(1.0, 500.0))
def test_lemma4_holds_implies_s1_dominates(ratio):
    model = SignalModel(100, 100, 1.0, 1.0 / ratio)
    if lemma4_sufficient_condition(model).holds:
        top = expected_abs_dot_mixture(100, 1, model)
        assert all(top > expected_abs_dot_mixture(100, s, model) for s in range(2, 65))


# -- feature hits ------------------------------------------------------------------


def test_feature_hit_examples():
    assert feature_hit_ratio(12, 4, 4, 1) == pytest.approx(112 / 52, rel=1e-12)
    assert feature_hit_ratio(12, 4, 4, 2) < feature_hit_ratio(12, 4, 4, 1)
    assert feature_hit_ratio(12, 12, 12, 1) == math.inf
    assert expected_feature_hits(2000, 1000, 1000, 1) == 1.0
    assert expected_feature_hits(2000, 1000, 1000, 2) == 2.0
    assert expected_feature_hits(2000, 1000, 200, 1) == 5.0


@pytest.mark.parametrize("args", [(12, 4, 5, 1), (12, 4, 4, 5), (12, 1, 4, 1), (12, 13, 4, 1)])
def test_feature_hit_errors(args):
    with pytest.raises(ValueError):
        feature_hit_ratio(*args)


def test_feature_hit_ratio_zero_when_no_single_hit_possible():
    # w = 6 but only one redundant coordinate: every support holds >= 5 features
    assert feature_hit_ratio(12, 11, 4, 2) == 0.0


def test_row_weight():
    assert row_weight(2000, 200, 1) == 10
    with pytest.raises(ValueError):
        row_weight(10, 3, 1)


def test_feature_hit_ratio_against_integer_formula():
    # no subtraction in the closed form, so compare against exact integers on a big case
    d, d_f, k, s = 3000, 40, 100, 1
    w = s * d // k
    d_r = d - d_f
    p1 = d_f * math.comb(d_r, w - 1)
    ge2 = math.comb(d, w) - math.comb(d_r, w) - p1
    assert feature_hit_ratio(d, d_f, k, s) == pytest.approx(float(Fraction(p1, ge2)), rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(d=st.integers(4, 60), data=st.data())
def test_feature_hit_ratio_decreasing(d, data):
    d_f = data.draw(st.integers(2, d))
    k = data.draw(st.integers(1, d))
    ratios = []
    for s in range(1, k + 1):
        try:
            ratios.append(feature_hit_ratio(d, d_f, k, s))
        except ValueError:
            continue
    finite = [r for r in ratios if math.isfinite(r)]
    positive = [r for r in ratios if r > 0]
    assert all(a > b for a, b in zip(positive, positive[1:]))
    assert ratios[len(positive):] == [0.0] * (len(ratios) - len(positive))
    assert len(finite) >= len(ratios) - 1


# -- norm ratio variance -----------------------------------------------------------


def test_norm_ratio_variance_values():
    k, d = 50, 500
    c = 3 / (d + 2)
    assert norm_ratio_variance(EnsembleSpec.preset("GM", k, d)) == pytest.approx(2 / k)
    assert norm_ratio_variance(EnsembleSpec.preset("SM", k, d)) == pytest.approx(2 / k)
    assert norm_ratio_variance(EnsembleSpec.preset("VSM", k, d)) == pytest.approx((2 + (math.sqrt(d) - 3) * c) / k)
    assert norm_ratio_variance(EnsembleSpec.preset("StM", k, d)) == pytest.approx(2 * (1 - c) / k)
    # one nonzero per column never does worse than Gaussian on random directions
    assert norm_ratio_variance(EnsembleSpec.preset("StM", k, d)) < norm_ratio_variance(EnsembleSpec.preset("GM", k, d))
    # a basis vector is preserved exactly by a fixed column weight
    assert norm_ratio_variance(EnsembleSpec.preset("StM", k, d), sum_v4=1.0) == 0.0

"""Closed-form reference quantities: pinned values, regime guards, shape
properties."""

import math

import pytest
from hypothesis import given, strategies as st

from crnsim.env import EnvSpec
from crnsim.theory import (
    TheoryResult,
    expected_ttr_b,
    expected_ttr_btilde_envelope,
    expected_ttr_c_independent,
    lower_bounds,
    per_round_upper_bound,
    prob_b_round,
    restriction_interval,
)


def stable(n=20, p_a=0.6, p_b=None):
    return EnvSpec(n, p_a, p_b if p_b is not None else p_a)


def independent(n=20, p_a=0.6, p_b=None):
    return EnvSpec(n, p_a, p_b if p_b is not None else p_a, 1.0, 1.0)


class TestResultType:
    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            TheoryResult(0.5, "posterior", "x")

    def test_probability_range(self):
        with pytest.raises(ValueError):
            TheoryResult(1.2, "per_round_prob", "x")

    def test_expected_ttr_floor(self):
        with pytest.raises(ValueError):
            TheoryResult(0.5, "expected_ttr", "x")


class TestWaitingRule:
    def test_round_one_at_desk_values(self):
        r = prob_b_round(1, stable())
        assert r.value == pytest.approx(3.0 / 7.0, rel=1e-12)
        assert r.kind == "per_round_prob"
        assert r.assumptions == "finite n"

    def test_last_round_drops_to_single_channel_mass(self):
        # window start n leaves one candidate channel: success iff both open
        r = prob_b_round(20, stable())
        assert r.value == pytest.approx(0.36, rel=1e-12)

    def test_asymptotic_value(self):
        r = prob_b_round(3, stable(p_a=0.5), asymptotic=True)
        assert r.value == pytest.approx(1.0 / 3.0, rel=1e-12)
        assert r.assumptions == "n->inf"

    def test_mean_is_reciprocal_of_asymptotic_round_prob(self):
        env = stable(p_a=0.6, p_b=0.75)
        mean = expected_ttr_b(env)
        prob = prob_b_round(1, env, asymptotic=True)
        assert mean.value == pytest.approx(1.0 / prob.value, rel=1e-12)

    def test_mean_at_desk_values(self):
        assert expected_ttr_b(stable()).value == pytest.approx(7.0 / 3.0)
        assert expected_ttr_b(stable(p_a=0.5, p_b=1.0)).value == pytest.approx(2.0)

    def test_half_speed_envelope_doubles(self):
        env = stable(p_a=0.75)
        assert (expected_ttr_btilde_envelope(env).value
                == pytest.approx(2 * expected_ttr_b(env).value, rel=1e-15))

    def test_round_index_domain(self):
        with pytest.raises(ValueError):
            prob_b_round(0, stable())
        with pytest.raises(ValueError):
            prob_b_round(21, stable())

    def test_requires_stable(self):
        with pytest.raises(ValueError):
            prob_b_round(1, independent())
        with pytest.raises(ValueError):
            expected_ttr_b(independent())
        with pytest.raises(ValueError):
            expected_ttr_b(EnvSpec(4, 0.5, 0.5, deterministic_flip=True))

    @given(
        n=st.integers(1, 60),
        p_a=st.floats(0.05, 1.0),
        p_b=st.floats(0.05, 1.0),
        i=st.integers(1, 60),
    )
    def test_round_prob_never_grows_with_i(self, n, p_a, p_b, i):
        env = stable(n, p_a, p_b)
        i = min(i, n)
        here = prob_b_round(i, env).value
        assert 0.0 <= here <= 1.0
        if i < n:
            assert prob_b_round(i + 1, env).value <= here + 1e-15
        assert prob_b_round(i, env, asymptotic=True).value >= here - 1e-15


class TestIndependentRedraw:
    def test_per_round_bound_small_cases(self):
        assert per_round_upper_bound(independent(n=1, p_a=0.3, p_b=0.8)).value \
            == pytest.approx(0.24, rel=1e-12)
        assert per_round_upper_bound(independent(n=2, p_a=0.5)).value == 0.3125
        assert per_round_upper_bound(independent()).value \
            == pytest.approx(3.0 / 7.0, rel=1e-12)

    def test_first_open_mean_is_reciprocal_bound(self):
        env = independent(n=7, p_a=0.6, p_b=0.75)
        mean = expected_ttr_c_independent(env)
        bound = per_round_upper_bound(env)
        assert mean.value == pytest.approx(1.0 / bound.value, rel=1e-15)

    def test_desk_value(self):
        assert expected_ttr_c_independent(independent()).value \
            == pytest.approx(7.0 / 3.0, rel=1e-12)

    def test_asymptotic_form(self):
        r = expected_ttr_c_independent(independent(p_a=0.75, p_b=0.9),
                                       finite_n=False)
        assert r.value == pytest.approx(13.0 / 9.0, rel=1e-12)

    def test_finite_n_sits_above_asymptote(self):
        for n in (1, 2, 5, 40):
            env = independent(n=n, p_a=0.6, p_b=0.9)
            assert (expected_ttr_c_independent(env).value
                    >= expected_ttr_c_independent(env, finite_n=False).value
                    - 1e-14)  # the two code paths may differ by an ulp

    def test_regime_guard(self):
        with pytest.raises(ValueError):
            per_round_upper_bound(stable())
        with pytest.raises(ValueError):
            expected_ttr_c_independent(EnvSpec(4, 0.6, 0.6, 0.5, 1.0))

    @given(n=st.integers(1, 30), p_a=st.floats(0.05, 0.99),
           p_b=st.floats(0.05, 0.99))
    def test_bound_grows_with_n(self, n, p_a, p_b):
        # p=1 would coerce lambda to 0 and leave the independent regime
        lo = per_round_upper_bound(independent(n, p_a, p_b)).value
        hi = per_round_upper_bound(independent(n + 1, p_a, p_b)).value
        assert 0.0 <= lo <= hi <= 1.0


class TestLowerBounds:
    def test_values(self):
        uni, sta = lower_bounds(stable(p_a=0.6, p_b=0.9))
        assert uni.value == pytest.approx(1.0 / 0.6)
        assert sta.value == pytest.approx(1.0 / 0.54)
        uni, sta = lower_bounds(stable(p_a=0.5, p_b=0.5))
        assert (uni.value, sta.value) == (2.0, 4.0)

    @given(p_a=st.floats(0.05, 1.0), p_b=st.floats(0.05, 1.0))
    def test_universal_never_exceeds_stationary(self, p_a, p_b):
        uni, sta = lower_bounds(stable(5, p_a, p_b))
        assert uni.value <= sta.value + 1e-12

    def test_lower_bounds_apply_in_any_regime(self):
        lower_bounds(independent())  # no guard to trip
        lower_bounds(EnvSpec(4, 0.5, 0.5, deterministic_flip=True))


class TestRestrictionInterval:
    def test_pinned_interval(self):
        iv, envl = restriction_interval(EnvSpec(50, 0.6, 0.6, 0.5, 0.5))
        assert iv.value == pytest.approx(10.702749878828294, rel=1e-13)
        assert envl.value == pytest.approx(24.973083050599357, rel=1e-13)
        assert iv.kind == "restriction_interval"
        assert envl.kind == "upper_bound"

    def test_distance_from_one_is_what_matters(self):
        # lambda 0.5 and 1.5 share |1-lambda| and therefore the interval
        a, _ = restriction_interval(EnvSpec(50, 0.6, 0.6, 0.5, 0.5))
        b, _ = restriction_interval(EnvSpec(50, 0.6, 0.6, 1.5, 1.5))
        assert a.value == b.value

    def test_slower_mixing_needs_longer_interval(self):
        slow, _ = restriction_interval(EnvSpec(50, 0.6, 0.6, 0.1, 0.1))
        fast, _ = restriction_interval(EnvSpec(50, 0.6, 0.6, 0.5, 0.5))
        assert slow.value == pytest.approx(70.41139516477931, rel=1e-13)
        assert slow.value > fast.value

    def test_single_step_mixing(self):
        iv, envl = restriction_interval(independent(p_a=0.6, p_b=0.75))
        assert iv.value == 1.0
        assert envl.value == pytest.approx(1 / 0.6 + 1 / 0.75 - 1, rel=1e-12)

    def test_worst_node_wins(self):
        mixed, _ = restriction_interval(EnvSpec(50, 0.6, 0.6, 1.0, 0.5))
        solo, _ = restriction_interval(EnvSpec(50, 0.6, 0.6, 0.5, 0.5))
        assert mixed.value == solo.value

    def test_eps_domain(self):
        env = EnvSpec(50, 0.6, 0.6, 0.5, 0.5)
        with pytest.raises(ValueError):
            restriction_interval(env, eps=0.0)
        with pytest.raises(ValueError):
            restriction_interval(env, eps=1.0)
        wide, _ = restriction_interval(env, eps=0.01)
        tight, _ = restriction_interval(env, eps=0.0001)
        assert wide.value < tight.value

    def test_non_mixing_regimes_rejected(self):
        with pytest.raises(ValueError):
            restriction_interval(stable(n=50))
        with pytest.raises(ValueError):
            restriction_interval(EnvSpec(50, 0.5, 0.5, 2.0, 2.0))
        with pytest.raises(ValueError):
            restriction_interval(EnvSpec(50, 0.5, 0.5, deterministic_flip=True))

    @given(lam=st.floats(0.05, 1.6), p=st.floats(0.3, 0.9))
    def test_interval_at_least_one_round(self, lam, p):
        if lam in (0.0, 2.0):
            return
        lam = min(lam, 1.0 / p - 1e-9, 1.0 / (1.0 - p) - 1e-9)
        iv, envl = restriction_interval(EnvSpec(50, p, p, lam, lam))
        assert iv.value >= 1.0
        assert envl.value >= iv.value * (2.0 / p - 1.0) - 1e-9
        assert math.isfinite(envl.value)

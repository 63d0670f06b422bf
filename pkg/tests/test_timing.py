"""Tests for generation and storage duration formulas."""

from __future__ import annotations

import math

import numpy as np
import pytest

from ionlink.timing import (
    RateSet,
    dc_norepeater_branches,
    duration_dc_norepeater,
    duration_dc_repeater,
    duration_tsc_norepeater,
    duration_tsc_repeater,
    mc_half_preparation,
    mc_race_completion,
    race_completion_time,
    storage_duration,
)

MC_KERNEL_RTOL = 0.02
MC_POLICY_RTOL = 0.10


def random_rates(rng: np.random.Generator, **overrides) -> RateSet:
    kwargs = dict(
        r_bb=10.0 ** rng.uniform(-2.0, 4.0),
        r_en=10.0 ** rng.uniform(-2.0, 4.0),
    )
    for name in (
        "p_s1",
        "p_s2",
        "p_s3",
        "p_s4",
        "p_s2_series",
        "p_s3_series",
        "p_s4_series",
        "p_p",
    ):
        kwargs[name] = rng.uniform(0.05, 0.9)
    kwargs.update(overrides)
    return RateSet(**kwargs)


class TestRateSet:
    @pytest.mark.parametrize("field", ["r_bb", "r_en"])
    @pytest.mark.parametrize("value", [0.0, -3.0, math.inf, math.nan])
    def test_rejects_bad_rate(self, field, value):
        kwargs = {"r_bb": 1.0, "r_en": 1.0, field: value}
        with pytest.raises(ValueError, match=field):
            RateSet(**kwargs)

    @pytest.mark.parametrize("field", ["p_s1", "p_s4", "p_s2_series", "p_p"])
    @pytest.mark.parametrize("value", [0.0, -0.1, 1.0 + 1e-9])
    def test_rejects_bad_probability(self, field, value):
        with pytest.raises(ValueError, match=field):
            RateSet(r_bb=1.0, r_en=1.0, **{field: value})

    def test_probability_one_is_allowed(self):
        RateSet(r_bb=1.0, r_en=1.0, p_s1=1.0, p_p=1.0)


class TestTscRepeater:
    def test_symmetric_rates(self):
        # 3/2 halves factor times the 3/(2R) race kernel
        rates = RateSet(r_bb=3.7, r_en=3.7, p_s1=0.8, p_s2=0.5)
        t_single, t_total = duration_tsc_repeater(rates)
        assert t_single == pytest.approx(9.0 / (4.0 * 3.7 * 0.8 * 0.5), rel=1e-12)
        assert t_total == pytest.approx(2.0 * t_single, rel=1e-15)

    def test_fast_backbone_limit(self):
        rates = RateSet(r_bb=2.1e9, r_en=2.1, p_s1=0.7, p_s2=0.6)
        t_single, _ = duration_tsc_repeater(rates)
        assert t_single == pytest.approx(1.5 / (2.1 * 0.7 * 0.6), rel=1e-8)

    def test_purified_total_scales_with_herald_probability(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            rates = random_rates(rng)
            t_single, t_total = duration_tsc_repeater(rates)
            assert t_total == pytest.approx(2.0 * t_single / rates.p_p, rel=1e-15)


class TestTscNorepeater:
    def test_symmetric_ideal_rates(self):
        rates = RateSet(r_bb=1.9, r_en=1.9)
        t_single, _ = duration_tsc_norepeater(rates)
        assert t_single == pytest.approx(11.0 / (6.0 * 1.9), rel=1e-12)

    def test_certain_swaps_reduce_bracket(self):
        # with both swaps certain the retry prefactor drops out and the
        # bracket takes its bare geometric form
        rng = np.random.default_rng(9)
        for _ in range(20):
            rates = random_rates(rng, p_s1=1.0, p_s2=1.0)
            rb, re = rates.r_bb, rates.r_en
            expected = (
                1.0
                + 1.5 * rb / re
                + (2.0 * re / (re + rb)) * (1.0 + re / rb + rb / re)
            ) / (2.0 * re + rb)
            assert duration_tsc_norepeater(rates)[0] == pytest.approx(
                expected, rel=1e-12
            )

    def test_fast_edges_limit(self):
        # with instant edge links only the backbone wait and the two swap
        # retries remain
        rates = RateSet(r_bb=3.3, r_en=3.3e9, p_s1=0.7, p_s2=0.6)
        t_single, _ = duration_tsc_norepeater(rates)
        assert t_single == pytest.approx(1.0 / (0.7 * 0.6 * 3.3), rel=1e-8)


class TestDcRepeater:
    def test_symmetric_ideal_rates(self):
        rates = RateSet(r_bb=2.6, r_en=2.6)
        assert duration_dc_repeater(rates) == pytest.approx(
            15.0 / (4.0 * 2.6), rel=1e-12
        )

    def test_fast_backbone_limit(self):
        rates = RateSet(
            r_bb=2.1e9, r_en=2.1, p_s1=0.7, p_s2=0.6, p_s3=0.9, p_s4=0.8
        )
        assert duration_dc_repeater(rates) == pytest.approx(
            1.5 / (2.1 * 0.7 * 0.6 * 0.9 * 0.8), rel=1e-8
        )


class TestDcNorepeater:
    def test_symmetric_order_probabilities(self):
        rates = RateSet(r_bb=4.4, r_en=4.4)
        probs, _ = dc_norepeater_branches(rates)
        expected = (1.0 / 9, 1.0 / 9, 1.0 / 6, 1.0 / 3, 1.0 / 6, 1.0 / 9)
        assert probs == pytest.approx(expected, rel=1e-12)

    def test_order_probabilities_sum_to_one(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            rates = random_rates(rng)
            probs, _ = dc_norepeater_branches(rates)
            assert math.fsum(probs) == pytest.approx(1.0, abs=1e-12)

    def test_symmetric_ideal_value(self):
        # 22/(9R): weighted sum of the six branch durations at equal rates
        rates = RateSet(r_bb=1.3, r_en=1.3)
        assert duration_dc_norepeater(rates) == pytest.approx(
            22.0 / (9.0 * 1.3), rel=1e-12
        )

    def test_asymmetric_ideal_value(self):
        # r_bb = 2 r_en, all swaps certain: branch durations
        # (2, 11/6, 23/12, 19/12, 17/12, 4/3)/r_en weighted by
        # (1/4, 1/6, 2/9, 1/6, 1/9, 1/12) give 127/(72 r_en)
        rates = RateSet(r_bb=2.0, r_en=1.0)
        probs, times = dc_norepeater_branches(rates)
        assert probs == pytest.approx(
            (0.25, 1.0 / 6, 2.0 / 9, 1.0 / 6, 1.0 / 9, 1.0 / 12), rel=1e-12
        )
        assert times == pytest.approx(
            (2.0, 11.0 / 6, 23.0 / 12, 19.0 / 12, 17.0 / 12, 4.0 / 3), rel=1e-12
        )
        assert duration_dc_norepeater(rates) == pytest.approx(127.0 / 72.0, rel=1e-12)

    def test_faster_edges_can_slow_the_protocol(self):
        # the swap-when-ready policy cannot discard links: raising r_en
        # moves order probability into the series branches, and with a
        # weak series swap those are slower, so the average duration
        # genuinely rises
        rates = RateSet(r_bb=17.2, r_en=9.26, p_s1=0.23, p_s2=0.8, p_s2_series=0.11)
        faster = RateSet(r_bb=17.2, r_en=10.2, p_s1=0.23, p_s2=0.8, p_s2_series=0.11)
        assert duration_dc_norepeater(faster) > duration_dc_norepeater(rates) * 1.01


class TestStorageDuration:
    def test_tsc_repeater_symmetric_ideal(self):
        rates = RateSet(r_bb=2.2, r_en=2.2)
        assert storage_duration("tsc", "repeater", rates) == pytest.approx(
            2.5 / 2.2, rel=1e-12
        )

    def test_tsc_repeater_half_term_identity(self):
        # the partner-half term equals 2 p_s2 t_single_link / 3
        rng = np.random.default_rng(21)
        for _ in range(50):
            rates = random_rates(rng)
            t_single, _ = duration_tsc_repeater(rates)
            residual = 1.0 / min(rates.r_bb, rates.r_en)
            half = storage_duration("tsc", "repeater", rates) - residual
            assert half == pytest.approx(
                2.0 * rates.p_s2 * t_single / 3.0, rel=1e-12
            )

    def test_slow_backbone_dominates(self):
        rates = RateSet(r_bb=1e-4, r_en=1.0)
        storage = storage_duration("tsc", "repeater", rates)
        assert storage > 1.0 / rates.r_bb
        assert storage == pytest.approx(2.0 / rates.r_bb, rel=1e-3)

    def test_symmetric_ideal_values_per_case(self):
        rates = RateSet(r_bb=2.0, r_en=2.0)
        assert storage_duration("tsc", "direct", rates) == pytest.approx(
            1.5 / 2.0, rel=1e-12
        )
        assert storage_duration("dc", "repeater", rates) == pytest.approx(
            3.5 / 2.0, rel=1e-12
        )
        assert storage_duration("dc", "direct", rates) == pytest.approx(
            2.5 / 2.0, rel=1e-12
        )

    def test_rejects_unknown_case(self):
        rates = RateSet(r_bb=1.0, r_en=1.0)
        with pytest.raises(ValueError, match="protocol"):
            storage_duration("sc", "repeater", rates)
        with pytest.raises(ValueError, match="topology"):
            storage_duration("tsc", "ring", rates)


class TestMonotonicity:
    FIELDS = (
        "r_bb",
        "r_en",
        "p_s1",
        "p_s2",
        "p_s3",
        "p_s4",
        "p_s2_series",
        "p_s3_series",
        "p_s4_series",
        "p_p",
    )

    @staticmethod
    def monotone_durations(rates: RateSet) -> list[float]:
        return [
            duration_tsc_repeater(rates)[1],
            duration_tsc_norepeater(rates)[1],
            duration_dc_repeater(rates),
            storage_duration("tsc", "repeater", rates),
            storage_duration("tsc", "direct", rates),
            storage_duration("dc", "repeater", rates),
            storage_duration("dc", "direct", rates),
        ]

    def test_improving_any_parameter_never_slows(self):
        # every duration except the repeater-less double-click (see the
        # policy caveat demonstrated above) is non-increasing in every
        # rate and swap probability
        rng = np.random.default_rng(29)
        for _ in range(60):
            rates = random_rates(rng)
            base = self.monotone_durations(rates)
            base_dc = duration_dc_norepeater(rates)
            for field in self.FIELDS:
                bumped = RateSet(
                    **{
                        name: getattr(rates, name)
                        * (1.1 if name == field else 1.0)
                        for name in self.FIELDS
                    }
                )
                newer = self.monotone_durations(bumped)
                for before, after in zip(base, newer):
                    assert after <= before * (1.0 + 1e-12)
                if field.startswith("p_"):
                    assert duration_dc_norepeater(bumped) <= base_dc * (1.0 + 1e-12)


class TestMonteCarlo:
    def test_race_kernel_matches_expectation_of_maximum(self):
        rng = np.random.default_rng(101)
        for rate_a, rate_b in [(1.0, 1.0), (3.0, 0.4), (17.0, 250.0)]:
            mc = mc_race_completion(rate_a, rate_b, n_samples=1_000_000, rng=rng)
            assert mc == pytest.approx(
                race_completion_time(rate_a, rate_b), rel=MC_KERNEL_RTOL
            )

    def test_tsc_half_policy_matches_closed_form(self):
        rates = RateSet(r_bb=7.0, r_en=3.0, p_s1=0.6)
        rng = np.random.default_rng(103)
        mc = mc_half_preparation(rates, protocol="tsc", n_samples=6000, rng=rng)
        expected = race_completion_time(7.0, 3.0) / 0.6
        assert mc == pytest.approx(expected, rel=MC_POLICY_RTOL)

    def test_dc_storage_matches_event_simulation(self):
        # the double-click repeater storage formula against the stated
        # event policy: residual sibling wait plus simulated partner half
        rates = RateSet(r_bb=7.0, r_en=3.0, p_s1=0.6, p_s2=0.5)
        rng = np.random.default_rng(107)
        mc_half = mc_half_preparation(rates, protocol="dc", n_samples=4000, rng=rng)
        mc_storage = 1.0 / min(rates.r_bb, rates.r_en) + mc_half
        assert mc_storage == pytest.approx(
            storage_duration("dc", "repeater", rates), rel=MC_POLICY_RTOL
        )

    def test_half_preparation_rejects_unknown_protocol(self):
        with pytest.raises(ValueError, match="protocol"):
            mc_half_preparation(RateSet(r_bb=1.0, r_en=1.0), protocol="sc")

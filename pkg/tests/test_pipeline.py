"""Tests for the end-to-end protocol assembly."""

from __future__ import annotations

import math

import pytest

from ionlink.backbone import bb_state, bb_success, eta_bb
from ionlink.baselines import direct_double_click, direct_single_click
from ionlink.core import (
    EmissionSettings,
    HardwareParams,
    bell_fidelity,
    normalize,
)
from ionlink.edge import en_double_success, en_single_state, en_single_success
from ionlink.pipeline import (
    PROTOCOLS,
    TOPOLOGIES,
    communication_round_trip,
    evaluate,
    evaluate_direct,
    evaluate_tsc,
)
from ionlink.swaps import swap1, swap2
from ionlink.timing import (
    duration_dc_norepeater,
    duration_dc_repeater,
    duration_tsc_norepeater,
    duration_tsc_repeater,
    race_completion_time,
    storage_duration,
)

WIRING_RTOL = 1e-12


def make_params(**overrides):
    defaults = dict(
        eta=0.8,
        eta_prime=0.64,
        eta_bb_intrinsic=0.8,
        eta_m=0.5,
        l_att_km=21.7,
        dark_rate_hz=1e-3,
        detector_resolution_s=1e-9,
        t_a_s=1e-5,
        n_bins=10,
        t_bb_s=1e-6,
        swap_window_factor=10.0,
        n_bb=1000,
        o_en=0.1,
        o_bb=1.0,
        fiber_speed_m_s=2e8,
    )
    defaults.update(overrides)
    return HardwareParams(**defaults)


def make_settings(**overrides):
    defaults = dict(p_ion=1e-3, p_spdc_en=1e-3, p_spdc_bb=1e-3)
    defaults.update(overrides)
    return EmissionSettings(**defaults)


def ideal_params(**overrides):
    defaults = dict(
        eta=1.0,
        eta_prime=1.0,
        eta_bb_intrinsic=1.0,
        eta_m=1.0,
        dark_rate_hz=0.0,
    )
    defaults.update(overrides)
    return make_params(**defaults)


class TestCommunication:
    def test_round_trip_is_one_span_of_light(self):
        assert communication_round_trip(200.0, make_params()) == pytest.approx(1e-3)

    def test_zero_length_floors_at_source_cycle(self):
        """At zero distance the backbone rate is set by the source cycle."""
        params = make_params()
        result = evaluate("tsc", "repeater", params, make_settings(), 0.0)
        assert math.isfinite(result.duration_s) and result.duration_s > 0.0
        expected = (
            params.o_bb
            * params.n_bb
            * bb_success(params, make_settings(), eta_bb(0.0, 4, params))
            / params.t_bb_s
        )
        assert result.rates.r_bb == pytest.approx(expected, rel=WIRING_RTOL)


class TestTscAssembly:
    def test_rate_wiring(self):
        """Edge and backbone rates rebuild from the component formulas."""
        params = make_params()
        settings = make_settings()
        result = evaluate_tsc(params, settings, 200.0, "repeater")
        r_en = params.o_en * en_single_success(params, settings) / params.t_a_s
        period = max(100.0 * 1000.0 / params.fiber_speed_m_s, params.t_bb_s)
        p_bb = bb_success(params, settings, eta_bb(200.0, 4, params))
        r_bb = params.o_bb * params.n_bb * p_bb / period
        assert result.rates.r_en == pytest.approx(r_en, rel=WIRING_RTOL)
        assert result.rates.r_bb == pytest.approx(r_bb, rel=WIRING_RTOL)
        for prob in (result.rates.p_s1, result.rates.p_s2, result.rates.p_p):
            assert 0.0 < prob < 1.0

    @pytest.mark.parametrize("topology", TOPOLOGIES)
    def test_duration_and_storage_dispatch(self, topology):
        params = make_params()
        result = evaluate_tsc(params, make_settings(), 120.0, topology)
        if topology == "repeater":
            _, total = duration_tsc_repeater(result.rates)
        else:
            _, total = duration_tsc_norepeater(result.rates)
        assert result.duration_s == total
        assert result.storage_s == storage_duration("tsc", topology, result.rates)
        assert result.storage_s > 0.0

    def test_purification_raises_fidelity(self):
        """The final pair beats the single link it was distilled from."""
        params = make_params()
        settings = make_settings()
        en = en_single_state(params, settings)
        bb = bb_state(params, settings, eta_bb(200.0, 4, params))
        _, once = swap1(en, bb, params)
        chain, _ = normalize(once)
        _, raw = swap2(chain, chain, params)
        link, _ = normalize(raw)
        result = evaluate_tsc(params, settings, 200.0, "repeater")
        assert result.fidelity > bell_fidelity(link)

    @pytest.mark.parametrize(
        "topology, exponent", [("repeater", 14), ("direct", 10)]
    )
    def test_visibility_scales_final_coherence(self, topology, exponent):
        settings = make_settings()
        clean = evaluate_tsc(make_params(), settings, 150.0, topology)
        blurred = evaluate_tsc(make_params(visibility=0.9), settings, 150.0, topology)
        ratio = blurred.state.alpha / clean.state.alpha
        assert ratio == pytest.approx(0.9**exponent, rel=WIRING_RTOL)
        assert blurred.state.d01 == pytest.approx(clean.state.d01, rel=WIRING_RTOL)
        assert blurred.fidelity < clean.fidelity


class TestDcAssembly:
    def test_rate_wiring(self):
        params = make_params()
        settings = make_settings()
        result = evaluate("dc", "repeater", params, settings, 200.0)
        r_en = params.o_en * en_double_success(params, settings) / params.t_a_s
        period = max(100.0 * 1000.0 / params.fiber_speed_m_s, params.t_bb_s)
        p_bb = bb_success(params, settings, eta_bb(200.0, 4, params))
        r_bb = params.o_bb * params.n_bb * p_bb / period
        assert result.rates.r_en == pytest.approx(r_en, rel=WIRING_RTOL)
        assert result.rates.r_bb == pytest.approx(r_bb, rel=WIRING_RTOL)
        assert result.duration_s == duration_dc_repeater(result.rates)

    def test_repeater_leaves_series_probabilities_alone(self):
        result = evaluate("dc", "repeater", make_params(), make_settings(), 100.0)
        assert result.rates.p_s2_series == 1.0
        assert result.rates.p_s3_series == 1.0
        assert result.rates.p_s4_series == 1.0

    def test_direct_series_probabilities_share_the_total(self):
        """Station ordering moves the conditionals, not their product."""
        result = evaluate("dc", "direct", make_params(), make_settings(), 100.0)
        rates = result.rates
        parallel = rates.p_s2 * rates.p_s3 * rates.p_s4
        series = rates.p_s2_series * rates.p_s3_series * rates.p_s4_series
        assert series == pytest.approx(parallel, rel=1e-9)
        assert result.duration_s == duration_dc_norepeater(rates)

    @pytest.mark.parametrize(
        "topology, exponent", [("repeater", 14), ("direct", 10)]
    )
    def test_visibility_scales_final_coherence(self, topology, exponent):
        settings = make_settings()
        clean = evaluate("dc", topology, make_params(), settings, 150.0)
        blurred = evaluate(
            "dc", topology, make_params(visibility=0.9), settings, 150.0
        )
        ratio = blurred.state.alpha / clean.state.alpha
        assert ratio == pytest.approx(0.9**exponent, rel=WIRING_RTOL)
        assert blurred.fidelity < clean.fidelity


class TestDirectAssembly:
    def test_norepeater_duration_formula(self):
        params = make_params()
        settings = make_settings(p_ion=1e-2)
        result = evaluate_direct("direct_sc", params, settings, 200.0, "direct")
        p, _ = direct_single_click(params, 1e-2, eta_bb(200.0, 2, params))
        period = max(1e-3, params.t_a_s)
        assert result.duration_s == pytest.approx(
            period / (params.o_en * p), rel=WIRING_RTOL
        )
        assert result.storage_s is None
        assert result.rates is None

    def test_repeater_duration_is_the_race_over_half_spans(self):
        params = make_params()
        settings = make_settings(p_ion=1e-2)
        result = evaluate_direct("direct_sc", params, settings, 200.0, "repeater")
        p_half, _ = direct_single_click(params, 1e-2, eta_bb(200.0, 4, params))
        period = max(100.0 * 1000.0 / params.fiber_speed_m_s, params.t_a_s)
        rate = params.o_en * p_half / period
        assert result.duration_s == pytest.approx(
            race_completion_time(rate, rate), rel=WIRING_RTOL
        )
        assert result.duration_s == pytest.approx(1.5 / rate, rel=WIRING_RTOL)

    def test_ion_repeater_doubles_the_infidelity(self):
        """A good half-span link loses twice its infidelity when fused."""
        params = make_params(dark_rate_hz=0.0)
        settings = make_settings(p_ion=1e-3)
        half = evaluate_direct("direct_sc", params, settings, 100.0, "direct")
        fused = evaluate_direct("direct_sc", params, settings, 200.0, "repeater")
        ratio = (1.0 - fused.fidelity) / (1.0 - half.fidelity)
        assert 1.8 < ratio < 2.2

    def test_double_click_reference(self):
        """Detector loss costs rate but not fidelity without dark counts."""
        params = make_params(dark_rate_hz=0.0)
        result = evaluate_direct(
            "direct_dc", params, make_settings(), 150.0, "direct"
        )
        assert result.fidelity == 1.0
        eta_d = eta_bb(150.0, 2, params)
        period = 150.0 * 1000.0 / params.fiber_speed_m_s
        assert result.duration_s == pytest.approx(
            period / (params.o_en * eta_d**2 / 2.0), rel=WIRING_RTOL
        )

    @pytest.mark.parametrize(
        "protocol, topology, exponent",
        [("direct_sc", "direct", 1), ("direct_sc", "repeater", 2),
         ("direct_dc", "direct", 2)],
    )
    def test_visibility_exponent(self, protocol, topology, exponent):
        settings = make_settings(p_ion=1e-2)
        clean = evaluate(protocol, topology, make_params(), settings, 100.0)
        blurred = evaluate(
            protocol, topology, make_params(visibility=0.9), settings, 100.0
        )
        ratio = blurred.state.alpha / clean.state.alpha
        assert ratio == pytest.approx(0.9**exponent, rel=WIRING_RTOL)

    def test_rejects_unknown_cells(self):
        args = (make_params(), make_settings(), 100.0)
        with pytest.raises(ValueError, match="unknown protocol"):
            evaluate("telecloning", "direct", *args)
        with pytest.raises(ValueError, match="unknown topology"):
            evaluate("tsc", "ring", *args)
        with pytest.raises(ValueError, match="negative link length"):
            evaluate("tsc", "direct", make_params(), make_settings(), -1.0)
        with pytest.raises(ValueError, match="not a direct-link protocol"):
            evaluate_direct("tsc", make_params(), make_settings(), 100.0, "direct")


class TestIdealLimit:
    @pytest.mark.parametrize("protocol", ["tsc", "dc"])
    def test_hybrid_protocols_reach_unit_fidelity(self, protocol):
        """Perfect hardware and weak driving leave no infidelity behind."""
        params = ideal_params()
        settings = make_settings(p_ion=1e-6, p_spdc_en=1e-6, p_spdc_bb=1e-6)
        result = evaluate(protocol, "repeater", params, settings, 0.0)
        assert result.fidelity >= 0.999
        assert math.isclose(result.state.trace(), 1.0, rel_tol=1e-12)

    def test_direct_references_reach_unit_fidelity(self):
        params = ideal_params()
        settings = make_settings(p_ion=1e-6)
        sc = evaluate("direct_sc", "direct", params, settings, 0.0)
        dc = evaluate("direct_dc", "direct", params, settings, 0.0)
        assert sc.fidelity >= 0.999
        assert dc.fidelity == 1.0


class TestTrends:
    @pytest.mark.parametrize("protocol", PROTOCOLS)
    def test_duration_grows_with_distance(self, protocol):
        settings = make_settings(p_ion=1e-2)
        durations = [
            evaluate(protocol, "repeater", make_params(), settings, l).duration_s
            for l in (50.0, 100.0, 200.0)
        ]
        assert durations[0] < durations[1] < durations[2]

    @pytest.mark.parametrize("protocol", PROTOCOLS)
    def test_fidelity_never_improves_with_distance(self, protocol):
        settings = make_settings(p_ion=1e-2)
        fidelities = [
            evaluate(protocol, "repeater", make_params(), settings, l).fidelity
            for l in (50.0, 100.0, 200.0)
        ]
        assert fidelities[0] >= fidelities[1] - 1e-12
        assert fidelities[1] >= fidelities[2] - 1e-12

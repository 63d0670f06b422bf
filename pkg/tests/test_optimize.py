"""Tests for the constrained emission-probability search."""

from __future__ import annotations

import numpy as np
import pytest

from ionlink.core import EmissionSettings, HardwareParams
from ionlink.optimize import (
    DIRECT_SC_GRID_MAX,
    DIRECT_SC_GRID_POINTS,
    PROB_MIN,
    TargetUnreachableError,
    grid_search,
    optimize,
)
from ionlink.pipeline import evaluate


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


class TestTscSearch:
    def test_meets_target_and_repeats(self):
        """Deterministic search: a restart lands on the same point."""
        first = optimize("tsc", "repeater", make_params(), 100.0, 0.9)
        again = optimize("tsc", "repeater", make_params(), 100.0, 0.9)
        settings, duration, fidelity, storage = first
        assert fidelity >= 0.9 - 1e-9
        assert np.isfinite(duration) and duration > 0.0
        assert storage > 0.0
        assert again[1] == pytest.approx(duration, rel=1e-9)
        assert again[1] / duration < 1.01

    def test_not_worse_than_coarse_grid(self):
        params = make_params()
        _, duration, _, _ = optimize("tsc", "repeater", params, 100.0, 0.9)
        _, reference, _, _ = grid_search(
            "tsc", "repeater", params, 100.0, 0.9, points_per_axis=8
        )
        assert duration <= reference * 1.05

    def test_duration_non_increasing_in_memory_efficiency(self):
        durations = [
            optimize("tsc", "repeater", make_params(eta_m=em), 100.0, 0.9, n_starts=1)[1]
            for em in (0.5, 0.7, 0.9)
        ]
        assert durations[1] <= durations[0] * 1.02
        assert durations[2] <= durations[1] * 1.02

    def test_duration_non_increasing_in_multiplexing(self):
        durations = [
            optimize("tsc", "repeater", make_params(n_bb=n), 100.0, 0.9, n_starts=1)[1]
            for n in (200, 1000)
        ]
        assert durations[1] <= durations[0] * 1.02

    def test_unreachable_target_reports_ceiling(self):
        """Poor visibility caps the coherence below what the target needs."""
        with pytest.raises(TargetUnreachableError, match="target unreachable"):
            optimize("tsc", "repeater", make_params(visibility=0.97), 100.0, 0.9)

    def test_thread_pool_matches_sequential(self):
        params = make_params()
        serial = optimize("tsc", "repeater", params, 100.0, 0.9)
        pooled = optimize("tsc", "repeater", params, 100.0, 0.9, n_workers=2)
        assert pooled[1] == pytest.approx(serial[1], rel=1e-9)


class TestDcSearch:
    def test_only_the_pair_sources_are_tuned(self):
        settings, duration, fidelity, storage = optimize(
            "dc", "direct", make_params(), 60.0, 0.9, n_starts=1
        )
        assert settings.p_ion == 0.0
        assert settings.p_spdc_en > 0.0 and settings.p_spdc_bb > 0.0
        assert fidelity >= 0.9 - 1e-9
        assert duration > 0.0 and storage > 0.0


class TestDirectSearch:
    def test_grid_rule_picks_largest_feasible_emission(self):
        """The returned emission sits on the grid with no feasible point above."""
        params = make_params()
        settings, duration, fidelity, storage = optimize(
            "direct_sc", "direct", params, 100.0, 0.9
        )
        assert fidelity >= 0.9 - 1e-9
        assert storage is None
        grid = np.geomspace(PROB_MIN, DIRECT_SC_GRID_MAX, DIRECT_SC_GRID_POINTS)
        idx = int(np.argmin(np.abs(grid - settings.p_ion)))
        assert grid[idx] == pytest.approx(settings.p_ion, rel=1e-12)
        for above in grid[idx + 1 :][::-1]:
            probe = evaluate(
                "direct_sc",
                "direct",
                params,
                EmissionSettings(p_ion=float(above), p_spdc_en=0.0, p_spdc_bb=0.0),
                100.0,
            )
            assert probe.fidelity < 0.9 - 1e-9

    def test_double_click_is_a_fixed_evaluation(self):
        params = make_params()
        settings, duration, fidelity, storage = optimize(
            "direct_dc", "direct", params, 100.0, 0.9
        )
        assert settings == EmissionSettings(p_ion=0.0, p_spdc_en=0.0, p_spdc_bb=0.0)
        reference = evaluate("direct_dc", "direct", params, settings, 100.0)
        assert duration == reference.duration_s
        assert fidelity == reference.fidelity
        assert storage is None

    def test_double_click_unreachable_with_poor_visibility(self):
        params = make_params(visibility=0.95)
        with pytest.raises(TargetUnreachableError, match="target unreachable"):
            optimize("direct_dc", "direct", params, 100.0, 0.999)


class TestArguments:
    def test_rejects_bad_targets_and_protocols(self):
        params = make_params()
        with pytest.raises(ValueError, match="f_target"):
            optimize("tsc", "repeater", params, 100.0, 0.4)
        with pytest.raises(ValueError, match="f_target"):
            optimize("tsc", "repeater", params, 100.0, 1.0)
        with pytest.raises(ValueError, match="unknown protocol"):
            optimize("telecloning", "repeater", params, 100.0, 0.9)
        with pytest.raises(ValueError, match="nothing to search"):
            grid_search("direct_dc", "direct", params, 100.0, 0.9)

"""Randomized equivalence sweeps of the closed forms against the engine.

Every element family has two independent implementations: the
perturbative closed forms used by the protocol pipeline and the exact
truncated-Fock scenarios in :mod:`ionlink.oracles`.  This module draws
random hardware points at a chosen emission scale, compares the two
implementations family by family, and reports the worst relative
deviation.  Deviations are perturbative leftovers, so they must both sit
inside a budget proportional to the emission scale and shrink when the
scale is lowered; both checks are exposed here and wired into the
command-line validation report.

Direct ion-ion links are compared with the detector window opened to
the full attempt, where the closed forms and the engine share the same
partner-photon veto convention; the multimode families use the narrow
window they are derived for.
"""

from __future__ import annotations

import dataclasses
import logging
from collections.abc import Callable, Mapping
from dataclasses import dataclass

import numpy as np

from .backbone import bb_click_probability, bb_state
from .baselines import direct_double_click, direct_single_click
from .core import (
    EmissionSettings,
    HardwareParams,
    bell_fidelity,
    normalize,
)
from .edge import (
    en_double_state,
    en_double_success,
    en_single_state,
    en_single_success,
)
from .oracles import (
    oracle_bb,
    oracle_direct_dc,
    oracle_direct_sc,
    oracle_en_double,
    oracle_en_single,
    oracle_swap1,
    oracle_swap2,
)
from .swaps import swap1, swap2

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-3
DEFAULT_POINTS = 100
DEFAULT_SEED = 20250822
TOLERANCE_FACTOR = 5.0
# a tenfold emission drop must shrink the worst deviation at least this
# much; true linear scaling gives ten, the slack absorbs floor effects
SCALING_SHRINK = 3.0
# families that agree to rounding noise have nothing left to contract
NOISE_DEV = 1e-8

FAMILIES = (
    "backbone",
    "edge_single",
    "edge_double",
    "swap_near",
    "swap_final",
    "direct_single",
    "direct_double",
)


@dataclass(frozen=True)
class FamilyReport:
    """Worst relative deviation of one element family at one scale."""

    family: str
    epsilon: float
    points: int
    max_rel_dev: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_dev <= self.tolerance


@dataclass(frozen=True)
class ScalingReport:
    """Deviation contraction between two emission scales."""

    family: str
    epsilon_coarse: float
    epsilon_fine: float
    dev_coarse: float
    dev_fine: float
    required_shrink: float

    @property
    def passed(self) -> bool:
        if max(self.dev_coarse, self.dev_fine) <= NOISE_DEV:
            return True
        return self.dev_fine <= self.dev_coarse / self.required_shrink


def _rel_dev(value: float, reference: float, floor: float) -> float:
    scale = max(abs(value), abs(reference), floor)
    return abs(value - reference) / scale


def _draw_params(rng: np.random.Generator, **overrides) -> HardwareParams:
    defaults = dict(
        eta=rng.uniform(0.3, 1.0),
        eta_bb_intrinsic=0.8,
        eta_m=rng.uniform(0.3, 1.0),
        l_att_km=21.7,
        dark_rate_hz=0.0,
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
    defaults.setdefault("eta_prime", defaults["eta"] * rng.uniform(0.3, 1.0))
    return HardwareParams(**defaults)


def _with_dark(
    params: HardwareParams,
    rng: np.random.Generator,
    epsilon: float,
    click_scale: float,
) -> HardwareParams:
    """Dark counts drawn as an epsilon-fraction of the family's click trace.

    The closed forms model dark counts at leading order only, so their
    relative depth has to shrink with the emission scale for the
    comparison to probe the modeled structure rather than drown it.
    """
    p_dark = rng.uniform(0.0, 0.3) * epsilon * click_scale
    return dataclasses.replace(
        params, dark_rate_hz=p_dark / params.detector_resolution_s
    )


def _draw_settings(rng: np.random.Generator, epsilon: float) -> EmissionSettings:
    return EmissionSettings(
        p_ion=epsilon * rng.uniform(0.5, 1.5),
        p_spdc_en=epsilon * rng.uniform(0.5, 1.5),
        p_spdc_bb=epsilon * rng.uniform(0.5, 1.5),
    )


def _sweep_backbone(rng, epsilon, points, closed=bb_state) -> float:
    worst = 0.0
    floor = epsilon**3
    for _ in range(points):
        params = _draw_params(rng)
        settings = _draw_settings(rng, epsilon)
        eta_link = rng.uniform(0.05, 1.0)
        params = _with_dark(
            params, rng, epsilon, 2.0 * eta_link * settings.p_spdc_bb * params.w_bb
        )
        state = closed(params, settings, eta_link)
        trace, raw = oracle_bb(params, settings, eta_link)
        reference, _ = normalize(raw)
        for label, expected in reference.elements.items():
            worst = max(worst, _rel_dev(state.elements[label], expected, floor))
        worst = max(
            worst,
            _rel_dev(bb_click_probability(params, settings, eta_link), trace, floor),
        )
    return worst


def _edge_click_scale(params: HardwareParams, settings: EmissionSettings) -> float:
    window = min(params.w_ion, params.w_edge)
    return 0.5 * window * (
        params.eta * settings.p_ion + params.eta_prime * settings.p_spdc_en
    )


def _sweep_edge_single(rng, epsilon, points, closed=en_single_state) -> float:
    worst = 0.0
    floor = epsilon**3
    for _ in range(points):
        params = _draw_params(rng)
        settings = _draw_settings(rng, epsilon)
        params = _with_dark(params, rng, epsilon, _edge_click_scale(params, settings))
        state = closed(params, settings)
        p_success, raw, theta = oracle_en_single(params, settings)
        reference, _ = normalize(raw)
        for label, expected in reference.elements.items():
            worst = max(worst, _rel_dev(state.elements[label], expected, floor))
        worst = max(worst, _rel_dev(state.theta_tan2, theta, floor))
        worst = max(
            worst, _rel_dev(en_single_success(params, settings), p_success, floor)
        )
    return worst


def _sweep_edge_double(rng, epsilon, points, closed=en_double_state) -> float:
    worst = 0.0
    floor = epsilon**3
    for _ in range(points):
        params = _draw_params(rng)
        settings = _draw_settings(rng, epsilon)
        params = _with_dark(params, rng, epsilon, _edge_click_scale(params, settings))
        state, _ = normalize(closed(params, settings))
        p_success, raw = oracle_en_double(params, settings)
        reference, _ = normalize(raw)
        for label, expected in reference.en_elements.items():
            worst = max(worst, _rel_dev(state.en_elements[label], expected, floor))
        worst = max(
            worst, _rel_dev(en_double_success(params, settings), p_success, floor)
        )
    return worst


def _link_inputs(rng, epsilon):
    # the swap sweeps validate the station maps on normalized inputs, so
    # the upstream dark depth follows the proven quadratic scaling
    params = _draw_params(
        rng, dark_rate_hz=rng.uniform(0.0, 50.0) * (epsilon / 1e-3) ** 2
    )
    settings = _draw_settings(rng, epsilon)
    en = en_single_state(params, settings)
    bb = bb_state(params, settings, rng.uniform(0.05, 1.0))
    return params, en, bb


def _sweep_swap_near(rng, epsilon, points, closed=swap1) -> float:
    # raw swap outputs: weights below the squared scale of the heralded
    # trace only carry truncated cross-terms and meet that floor instead
    worst = 0.0
    for _ in range(points):
        params, en, bb = _link_inputs(rng, epsilon)
        prob, out = closed(en, bb, params)
        trace, engine = oracle_swap1(en, bb, params)
        floor = epsilon**2 * out.trace()
        for label, value in out.elements.items():
            worst = max(worst, _rel_dev(value, engine.elements[label], floor))
        worst = max(worst, _rel_dev(prob, 2.0 * trace / params.w_swap, floor))
    return worst


def _sweep_swap_final(rng, epsilon, points, closed=swap2) -> float:
    worst = 0.0
    for _ in range(points):
        params, en, bb = _link_inputs(rng, epsilon)
        _, once = swap1(en, bb, params)
        half, _ = normalize(once)
        prob, out = closed(half, half, params)
        trace, engine = oracle_swap2(half, half, params)
        floor = epsilon**2 * out.trace()
        for name in ("d00", "d01", "d10", "d11"):
            worst = max(
                worst, _rel_dev(getattr(out, name), getattr(engine, name), floor)
            )
        worst = max(worst, _rel_dev(out.alpha.real, engine.alpha.real, floor))
        worst = max(worst, _rel_dev(prob, 2.0 * trace / params.w_swap, floor))
    return worst


def _direct_params(rng, epsilon, click_scale: float) -> HardwareParams:
    """Detector window opened to the whole attempt for convention parity."""
    params = _draw_params(rng, detector_resolution_s=1e-5)
    return _with_dark(params, rng, epsilon, click_scale)


def _sweep_direct_single(rng, epsilon, points, closed=direct_single_click) -> float:
    worst = 0.0
    floor = epsilon**3
    for _ in range(points):
        eta_d = rng.uniform(0.05, 1.0)
        p_ion = epsilon * rng.uniform(0.5, 1.5)
        params = _direct_params(rng, epsilon, 2.0 * eta_d * p_ion)
        p_closed, state = closed(params, p_ion, eta_d)
        p_engine, engine = oracle_direct_sc(params, p_ion, eta_d)
        reference, _ = normalize(engine)
        worst = max(worst, _rel_dev(p_closed, p_engine, floor))
        worst = max(worst, _rel_dev(state.alpha.real, reference.alpha.real, floor))
        worst = max(worst, _rel_dev(state.d01, reference.d01, floor))
        worst = max(worst, _rel_dev(state.d10, reference.d10, floor))
        worst = max(
            worst,
            _rel_dev(state.d00 + state.d11, reference.d00 + reference.d11, floor),
        )
        worst = max(
            worst, _rel_dev(bell_fidelity(state), bell_fidelity(reference), floor)
        )
    return worst


def _sweep_direct_double(rng, epsilon, points, closed=direct_double_click) -> float:
    worst = 0.0
    floor = epsilon**3
    for _ in range(points):
        eta_d = rng.uniform(0.05, 1.0)
        params = _direct_params(rng, epsilon, eta_d**2 / 2.0)
        p_closed, state = closed(params, eta_d)
        p_engine, engine = oracle_direct_dc(params, eta_d)
        reference, _ = normalize(engine)
        worst = max(worst, _rel_dev(p_closed, p_engine, floor))
        worst = max(
            worst, _rel_dev(state.d00 + state.d11, reference.d00 + reference.d11, floor)
        )
        worst = max(
            worst, _rel_dev(bell_fidelity(state), bell_fidelity(reference), floor)
        )
    return worst


_SWEEPS: dict[str, Callable] = {
    "backbone": _sweep_backbone,
    "edge_single": _sweep_edge_single,
    "edge_double": _sweep_edge_double,
    "swap_near": _sweep_swap_near,
    "swap_final": _sweep_swap_final,
    "direct_single": _sweep_direct_single,
    "direct_double": _sweep_direct_double,
}


def run_family(
    family: str,
    *,
    epsilon: float = DEFAULT_EPSILON,
    points: int = DEFAULT_POINTS,
    seed: int = DEFAULT_SEED,
    closed_override: Callable | None = None,
) -> FamilyReport:
    """Sweep one family and report its worst relative deviation.

    ``closed_override`` substitutes the closed-form implementation under
    test, which is how the report is shown to catch a wrong formula.
    """
    try:
        sweep = _SWEEPS[family]
    except KeyError:
        raise ValueError(f"unknown family {family!r}") from None
    rng = np.random.default_rng([seed, FAMILIES.index(family)])
    if closed_override is None:
        worst = sweep(rng, epsilon, points)
    else:
        worst = sweep(rng, epsilon, points, closed_override)
    return FamilyReport(
        family=family,
        epsilon=epsilon,
        points=points,
        max_rel_dev=worst,
        tolerance=TOLERANCE_FACTOR * epsilon,
    )


def run_all(
    *,
    epsilon: float = DEFAULT_EPSILON,
    points: int = DEFAULT_POINTS,
    seed: int = DEFAULT_SEED,
    overrides: Mapping[str, Callable] | None = None,
) -> list[FamilyReport]:
    """Sweep every family at one emission scale."""
    overrides = dict(overrides or {})
    unknown = sorted(set(overrides) - set(FAMILIES))
    if unknown:
        raise ValueError(f"unknown families in overrides: {', '.join(unknown)}")
    return [
        run_family(
            family,
            epsilon=epsilon,
            points=points,
            seed=seed,
            closed_override=overrides.get(family),
        )
        for family in FAMILIES
    ]


def run_scaling(
    *,
    epsilon_coarse: float = DEFAULT_EPSILON,
    epsilon_fine: float = 1e-4,
    points: int = DEFAULT_POINTS,
    seed: int = DEFAULT_SEED,
) -> list[ScalingReport]:
    """Check that deviations contract when the emission scale drops."""
    reports = []
    for family in FAMILIES:
        coarse = run_family(family, epsilon=epsilon_coarse, points=points, seed=seed)
        fine = run_family(family, epsilon=epsilon_fine, points=points, seed=seed)
        reports.append(
            ScalingReport(
                family=family,
                epsilon_coarse=epsilon_coarse,
                epsilon_fine=epsilon_fine,
                dev_coarse=coarse.max_rel_dev,
                dev_fine=fine.max_rel_dev,
                required_shrink=SCALING_SHRINK,
            )
        )
    return reports

"""Closed-form backbone link: memory-memory entanglement heralded by one click.

Two correlated pair sources emit toward a midpoint station; a single
detection entangles the two stored twins.  This module carries the
element-form heralded state, the click probability and the (optionally
multiplexed) per-attempt success probability.
"""

from __future__ import annotations

import logging
import math
import warnings

from .core import (
    EmissionSettings,
    HardwareParams,
    PerturbationBreakdownError,
    SingleRailState,
    normalize,
)

logger = logging.getLogger(__name__)


def eta_bb(l_km: float, n_segments: int, params: HardwareParams) -> float:
    """Photon transmission of one backbone segment over ``l_km`` total length.

    The total span is divided into ``n_segments`` equal segments (4 with a
    central repeater, 2 without); the intrinsic source/detector efficiency
    multiplies the fiber transmission of one segment.
    """
    if n_segments not in (2, 4):
        raise ValueError(f"segment count must be 2 or 4, got {n_segments}")
    if l_km < 0:
        raise ValueError(f"negative link length: {l_km}")
    return params.eta_bb_intrinsic * math.exp(-l_km / (n_segments * params.l_att_km))


def bb_elements_raw(
    params: HardwareParams, settings: EmissionSettings, eta_link: float
) -> dict[str, float]:
    """Non-normalized B elements for a single detector click.

    Exact through two emitted pairs; the trace (with the sixfold B2
    multiplicity) is the click probability.
    """
    g2 = settings.p_spdc_bb
    em = params.eta_m
    base = eta_link * g2 * (1.0 - g2) * params.w_bb
    two = 0.5 * eta_link * g2**2 * (1.0 - eta_link) * params.w_bb
    return {
        "B0": (1.0 - em) * (base + 6.0 * (1.0 - em) * two) + params.p_dark,
        "B1": em * (base + 10.0 * (1.0 - em) * two),
        "B1'": 2.0 * em * (1.0 - em) * two,
        "B2": em**2 * two,
    }


def bb_state_linear(
    params: HardwareParams, settings: EmissionSettings, eta_link: float
) -> dict[str, float]:
    """Leading-order normalized B elements.

    Readable approximation and the breakdown diagnostic: the dark-count
    subtraction inside B1 is the first term to go negative when the
    perturbative treatment stops being meaningful.
    """
    g2 = settings.p_spdc_bb
    em = params.eta_m
    if g2 <= 0.0:
        raise ValueError("pair emission probability must be positive")
    dark = params.p_dark / (params.w_bb * eta_link * g2)
    return {
        "B0": (1.0 - em) * (1.0 - 3.0 * em * (1.0 - eta_link) * g2) + em * dark,
        "B1": em * (1.0 + (2.0 - 5.0 * em) * (1.0 - eta_link) * g2 - dark),
        "B1'": g2 * (1.0 - eta_link) * em * (1.0 - em),
        "B2": 0.5 * g2 * (1.0 - eta_link) * em**2,
    }


def bb_state(
    params: HardwareParams, settings: EmissionSettings, eta_link: float
) -> SingleRailState:
    """Normalized heralded backbone state (B family, pure rail: no angle)."""
    if settings.p_spdc_bb > 0.0:
        if bb_state_linear(params, settings, eta_link)["B1"] < 0.0:
            raise PerturbationBreakdownError(
                "perturbation breakdown: dark counts dominate the backbone click"
            )
    raw = SingleRailState(elements=bb_elements_raw(params, settings, eta_link))
    state, _ = normalize(raw)
    return state


def bb_click_probability(
    params: HardwareParams, settings: EmissionSettings, eta_link: float
) -> float:
    """Single-detector click probability (second order, plus dark counts)."""
    g2 = settings.p_spdc_bb
    return (
        params.w_bb * eta_link * g2 * (1.0 + (2.0 - 3.0 * eta_link) * g2)
        + params.p_dark
    )


def bb_success(
    params: HardwareParams, settings: EmissionSettings, eta_link: float
) -> float:
    """Per-attempt success probability of one backbone mode pair.

    Both detectors and all click times within the source repetition window
    are counted; the detection-window factor cancels.
    """
    g2 = settings.p_spdc_bb
    p = (
        2.0 * eta_link * g2 * (1.0 + (2.0 - 3.0 * eta_link) * g2)
        + 2.0 * params.t_bb_s * params.dark_rate_hz
    )
    if p > 1.0:
        warnings.warn(
            f"backbone success probability {p:.3g} clamped to 1", stacklevel=2
        )
        return 1.0
    return p


def bb_success_multiplexed(
    params: HardwareParams, settings: EmissionSettings, eta_link: float
) -> float:
    """Success probability over all multiplexed backbone modes in one attempt."""
    plain = bb_success(params, settings, eta_link)
    return 1.0 - (1.0 - plain) ** params.n_bb

"""Closed-form edge node links: ion vs pair-source heralding.

Single-click generation entangles the ion with one stored memory mode (A
family with a mixing angle); double-click generation entangles the ion
with two memory rails (dual-rail element family).  Element values include
memory transmission up to the later swap detection.
"""

from __future__ import annotations

import dataclasses
import logging
import warnings

from .core import (
    DualRailState,
    EmissionSettings,
    HardwareParams,
    PerturbationBreakdownError,
    SingleRailState,
    normalize,
)

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class MixingAngle:
    """Superposition weight tan^2(theta) between the ion and memory branches."""

    tan2: float

    def __post_init__(self) -> None:
        if not self.tan2 >= 0.0:
            raise ValueError(f"tan^2(theta) must be non-negative, got {self.tan2}")
        if self.tan2 == 0.0:
            warnings.warn("degenerate mixing angle (no memory branch)", stacklevel=3)

    @property
    def degenerate(self) -> bool:
        return self.tan2 == 0.0


def _flux_ratio(params: HardwareParams) -> float:
    # per-bin pair envelopes are a factor n_bins brighter than the ion pulse
    return float(params.n_bins)


def mixing_angle(params: HardwareParams, settings: EmissionSettings) -> MixingAngle:
    """Second-order mixing angle of the single-click heralded state."""
    if settings.p_ion == 0.0:
        raise ValueError("ion emission probability must be positive")
    if params.eta == 0.0:
        raise ValueError("ion photon transmission must be positive")
    a1 = settings.p_ion
    b1 = settings.p_spdc_en
    tan2 = (
        _flux_ratio(params)
        * (params.eta_prime * params.eta_m / params.eta)
        * (b1 / a1)
        * (1.0 - a1 + b1)
    )
    return MixingAngle(tan2=tan2)


def mixing_angle_exact(params: HardwareParams, settings: EmissionSettings) -> float:
    """All-orders tan^2(theta): the weight ratio inside the heralded block."""
    if settings.p_ion == 0.0:
        raise ValueError("ion emission probability must be positive")
    if params.eta == 0.0:
        raise ValueError("ion photon transmission must be positive")
    a1 = settings.p_ion
    b1 = settings.p_spdc_en
    b0_sq = 1.0 - b1 - 0.5 * b1**2
    if b0_sq <= 0.0:
        raise ValueError("pair emission beyond the two-pair truncation")
    return (
        params.eta_prime
        * params.eta_m
        * params.w_edge
        * (1.0 - a1)
        * b1
        / (params.eta * params.w_ion * a1 * b0_sq)
    )


def en_single_elements_raw(
    params: HardwareParams, settings: EmissionSettings
) -> dict[str, float]:
    """Non-normalized A elements for a single detector click.

    Exact through two pair emissions; the lost-herald correlation factor
    multiplies the branches whose twin remains stored.
    """
    a1 = settings.p_ion
    b1 = settings.p_spdc_en
    a0 = 1.0 - a1
    b0 = 1.0 - b1 - 0.5 * b1**2
    em = params.eta_m
    corr = 1.0 + (1.0 - params.eta_prime) * b1
    ion_branch = 0.5 * params.eta * params.w_ion * a1 * b0
    pair_branch = 0.5 * params.eta_prime * params.w_edge * a0 * b1
    lost_ion = 0.5 * params.eta_prime * (1.0 - params.eta) * params.w_edge * a1 * b1
    return {
        "A0": corr * (1.0 - em) * pair_branch + params.p_dark,
        "A1": corr * (ion_branch + em * pair_branch),
        "A1'": (1.0 - em) * lost_ion,
        "A2": em * lost_ion,
    }


def en_single_state_linear(
    params: HardwareParams, settings: EmissionSettings
) -> dict[str, float]:
    """Leading-order normalized A elements, parameterized by the mixing angle.

    Used as the breakdown diagnostic (A1 turns negative first) and as the
    readable approximation of the heralded state.
    """
    a1 = settings.p_ion
    t2 = mixing_angle_exact(params, settings)
    em = params.eta_m
    denom = em + t2
    if denom == 0.0:
        raise ValueError("memory branch and mixing angle both vanish")
    dark = params.p_dark / (params.w_ion * params.eta * a1)
    loss = (t2 / denom) * (1.0 - params.eta) * a1
    a0_dark = 0.0
    if em < 1.0 and t2 > 0.0:
        a0_dark = (1.0 / ((1.0 - em) * t2) - 1.0 / denom) * 2.0 * em * dark
    return {
        "A0": (1.0 - em) * (t2 / denom) * (1.0 - loss + a0_dark),
        "A1": em * ((1.0 + t2) / denom) * (1.0 - loss - (2.0 * em / denom) * dark),
        "A1'": (1.0 - em) * (1.0 - params.eta) * a1 * t2 / denom,
        "A2": em * (1.0 - params.eta) * a1 * t2 / denom,
    }


def en_single_state(
    params: HardwareParams, settings: EmissionSettings
) -> SingleRailState:
    """Normalized single-click heralded state with its mixing angle."""
    theta = mixing_angle_exact(params, settings)
    if params.p_dark > 0.0:
        try:
            linear = en_single_state_linear(params, settings)
        except ValueError:
            linear = None
        if linear is not None and linear["A1"] < 0.0:
            raise PerturbationBreakdownError(
                "perturbation breakdown: dark counts dominate the edge-node click"
            )
    raw = SingleRailState(
        elements=en_single_elements_raw(params, settings), theta_tan2=theta
    )
    state, _ = normalize(raw)
    return state


def en_vacuum_bin(params: HardwareParams, settings: EmissionSettings) -> float:
    """No-herald probability of one idle pair-source time-bin."""
    b1 = settings.p_spdc_en
    b2_sq = 0.5 * b1**2
    miss = 1.0 - params.eta_prime
    return (1.0 - b1 - b2_sq) + b1 * miss + b2_sq * miss**2


def en_single_success(params: HardwareParams, settings: EmissionSettings) -> float:
    """Per-attempt single-click success probability (both detectors, all bins)."""
    raw = en_single_elements_raw(params, settings)
    trace = sum(raw.values())
    idle = en_vacuum_bin(params, settings) ** (params.n_bins - 1)
    return 2.0 * trace * idle / params.w_ion


def en_double_state(params: HardwareParams, settings: EmissionSettings) -> DualRailState:
    """Dual-rail heralded state after one click in each rail.

    Second-order element values; the trace is 1 up to second order, so
    callers normalize before further processing.

    A pair whose herald is lost leaves no stored photon (the twin sits in
    an orthogonal temporal mode), and the environment record of such a loss
    is the same whether the rail's click came from the ion photon or from a
    second emitted pair.  Both rails therefore keep their full coherence:
    the lost-pair weight enhances the Bell-block element ``a`` rather than
    feeding the incoherent single-photon elements, which is why A1 and A1'
    coincide here.
    """
    b1 = settings.p_spdc_en
    n = float(params.n_bins)
    em = params.eta_m
    eta, etp = params.eta, params.eta_prime
    if eta == 0.0:
        raise ValueError("ion photon transmission must be positive")
    if params.p_dark > 0.0 and (etp == 0.0 or b1 == 0.0):
        raise PerturbationBreakdownError(
            "perturbation breakdown: dark counts with no pair-source clicks"
        )
    dark_ratio = (
        params.p_dark / (params.w_ion * etp * b1 * n) if params.p_dark > 0.0 else 0.0
    )
    a_over_em = (
        1.0
        - n * b1 * (etp / eta) * (1.0 - eta)
        + 2.0 * b1 * (1.0 - etp)
        + 2.0 * dark_ratio
    )
    if a_over_em < 0.0:
        raise PerturbationBreakdownError(
            "perturbation breakdown: dual-rail Bell weight went negative"
        )
    a2_base = n * b1 * 0.5 * (1.0 - eta) * (etp / eta)
    a2 = em**2 * a2_base
    a1p = (1.0 - em) * em * a2_base
    a1 = a1p
    a0 = (
        a_over_em * 0.5 * (1.0 - em)
        + (1.0 - em) ** 2 * a2_base
        + dark_ratio
    )
    return DualRailState(
        en_elements={
            "a": em * a_over_em,
            "A0": a0,
            "A0'": a0,
            "A1": a1,
            "A1'": a1p,
            "A2": a2,
        }
    )


def en_double_success(params: HardwareParams, settings: EmissionSettings) -> float:
    """Per-attempt double-click success probability."""
    b1 = settings.p_spdc_en
    n = float(params.n_bins)
    eta, etp = params.eta, params.eta_prime
    main = b1 * etp * n * (
        eta + eta * b1 + etp * n * b1 - (3.0 * n - 1.0) * eta * etp * b1
    )
    dark = eta * 2.0 * params.t_a_s * params.dark_rate_hz
    return params.dc_acceptance * (main + dark)

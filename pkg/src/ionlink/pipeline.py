"""End-to-end protocol assembly: heralded state, rates and durations.

Wires the per-component maps into full link evaluations: edge and
backbone preparation, the swap chain for the chosen topology, the
purification stage of the two-single-click protocol, interference
visibility, and the rate bookkeeping that feeds the scheduling
formulas.  One call per (protocol, topology, distance, emission
settings) returns everything the optimizer and the sweep runner need.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .backbone import bb_state, bb_success, eta_bb
from .baselines import direct_double_click, direct_single_click, ion_swap
from .core import (
    BipartiteIonState,
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
from .purify import purify
from .swaps import dc_swap_chain, swap1, swap2
from .timing import (
    RateSet,
    duration_dc_norepeater,
    duration_dc_repeater,
    duration_tsc_norepeater,
    duration_tsc_repeater,
    race_completion_time,
    storage_duration,
)

logger = logging.getLogger(__name__)

PROTOCOLS = ("tsc", "dc", "direct_sc", "direct_dc")
TOPOLOGIES = ("repeater", "direct")

# heralded interference events per assembled link: every edge click,
# backbone herald and swap-station click multiplies the coherence by
# the visibility factor once
_EVENTS = {
    ("tsc", "repeater"): 7,
    ("tsc", "direct"): 5,
    ("dc", "repeater"): 14,
    ("dc", "direct"): 10,
}


@dataclass(frozen=True)
class ProtocolResult:
    """One evaluated cell: the heralded state and its time accounting."""

    protocol: str
    topology: str
    l_km: float
    fidelity: float
    duration_s: float
    storage_s: float | None
    state: BipartiteIonState
    rates: RateSet | None


def _check_cell(protocol: str, topology: str, l_km: float) -> None:
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}")
    if topology not in TOPOLOGIES:
        raise ValueError(f"unknown topology {topology!r}")
    if l_km < 0.0:
        raise ValueError(f"negative link length: {l_km}")


def communication_round_trip(span_km: float, params: HardwareParams) -> float:
    """Herald latency of a link spanning ``span_km``: photons reach the
    midpoint station and the click travels back, one full span of light
    propagation in total."""
    return span_km * 1000.0 / params.fiber_speed_m_s


def _attempt_period(span_km: float, floor_s: float, params: HardwareParams) -> float:
    # communication-bound at distance, never faster than the source cycle
    return max(communication_round_trip(span_km, params), floor_s)


def _bb_span_km(l_km: float, topology: str) -> float:
    return l_km / 2.0 if topology == "repeater" else l_km


def _with_visibility(state: BipartiteIonState, factor: complex) -> BipartiteIonState:
    if factor == 1.0:
        return state
    return BipartiteIonState(
        alpha=state.alpha * factor,
        d00=state.d00,
        d01=state.d01,
        d10=state.d10,
        d11=state.d11,
        normalized=state.normalized,
    )


def _snap_probability(p: float) -> float:
    # conditional trace ratios can land an ulp above one at perfect
    # hardware; anything further out is a real error and must stay loud
    if 1.0 < p <= 1.0 + 1e-12:
        return 1.0
    return p


def _edge_rate(p_en: float, params: HardwareParams) -> float:
    return params.o_en * p_en / params.t_a_s


def _backbone_rate(
    p_bb: float, l_km: float, topology: str, params: HardwareParams
) -> float:
    period = _attempt_period(_bb_span_km(l_km, topology), params.t_bb_s, params)
    return params.o_bb * params.n_bb * p_bb / period


def evaluate_tsc(
    params: HardwareParams,
    settings: EmissionSettings,
    l_km: float,
    topology: str,
) -> ProtocolResult:
    """Two-single-click protocol: swap chain, purification, timing.

    With a repeater the two backbone links each span half the distance
    and their far memories fuse at the center; without one a single
    full-span backbone link is swapped against the edge memories at both
    ends.  Two such links are always purified into the final pair.
    """
    _check_cell("tsc", topology, l_km)
    segments = 4 if topology == "repeater" else 2
    eta_link = eta_bb(l_km, segments, params)
    en = en_single_state(params, settings)
    bb = bb_state(params, settings, eta_link)
    p_s1, once = swap1(en, bb, params)
    chain, _ = normalize(once)
    if topology == "repeater":
        p_s2, raw = swap2(chain, chain, params)
    else:
        p_s2, raw = swap2(chain, en, params)
    link, _ = normalize(raw)
    link = _with_visibility(link, params.visibility ** _EVENTS[("tsc", topology)])
    p_p, final = purify(link, link)

    rates = RateSet(
        r_bb=_backbone_rate(bb_success(params, settings, eta_link), l_km, topology, params),
        r_en=_edge_rate(en_single_success(params, settings), params),
        p_s1=_snap_probability(p_s1),
        p_s2=_snap_probability(p_s2),
        p_p=_snap_probability(p_p),
    )
    if topology == "repeater":
        _, total = duration_tsc_repeater(rates)
    else:
        _, total = duration_tsc_norepeater(rates)
    return ProtocolResult(
        protocol="tsc",
        topology=topology,
        l_km=l_km,
        fidelity=bell_fidelity(final),
        duration_s=total,
        storage_s=storage_duration("tsc", topology, rates),
        state=final,
        rates=rates,
    )


def evaluate_dc(
    params: HardwareParams,
    settings: EmissionSettings,
    l_km: float,
    topology: str,
) -> ProtocolResult:
    """Double-click protocol: per-rail swap chain on the photon engine.

    Each edge state is extended rail by rail with backbone links; the
    repeater fuses the far memories at the center, the repeater-less
    chain swaps at the four ends of two full-span backbone links, where
    the duration model also needs the station probabilities conditioned
    on completing one rail first.
    """
    _check_cell("dc", topology, l_km)
    segments = 4 if topology == "repeater" else 2
    eta_link = eta_bb(l_km, segments, params)
    en, _ = normalize(en_double_state(params, settings))
    bb = bb_state(params, settings, eta_link)
    if topology == "repeater":
        probs, final = dc_swap_chain(en, en, [bb] * 4, "repeater", params)
        series = {}
    else:
        probs, final = dc_swap_chain(en, en, [bb] * 2, "direct", params)
        ordered, _ = dc_swap_chain(en, en, [bb] * 2, "direct", params, ordering="series")
        series = dict(
            p_s2_series=_snap_probability(ordered[1]),
            p_s3_series=_snap_probability(ordered[2]),
            p_s4_series=_snap_probability(ordered[3]),
        )
    final = _with_visibility(final, params.visibility ** _EVENTS[("dc", topology)])

    rates = RateSet(
        r_bb=_backbone_rate(bb_success(params, settings, eta_link), l_km, topology, params),
        r_en=_edge_rate(en_double_success(params, settings), params),
        p_s1=_snap_probability(probs[0]),
        p_s2=_snap_probability(probs[1]),
        p_s3=_snap_probability(probs[2]),
        p_s4=_snap_probability(probs[3]),
        **series,
    )
    if topology == "repeater":
        total = duration_dc_repeater(rates)
    else:
        total = duration_dc_norepeater(rates)
    return ProtocolResult(
        protocol="dc",
        topology=topology,
        l_km=l_km,
        fidelity=bell_fidelity(final),
        duration_s=total,
        storage_s=storage_duration("dc", topology, rates),
        state=final,
        rates=rates,
    )


def evaluate_direct(
    protocol: str,
    params: HardwareParams,
    settings: EmissionSettings,
    l_km: float,
    topology: str,
) -> ProtocolResult:
    """Direct ion-ion reference links, optionally through an ion repeater.

    Without a repeater one link spans the full distance.  The repeater
    variant runs two half-span links in parallel on a middle station
    with two ions and fuses them deterministically, so its duration is
    the completion time of the slower half.  Every heralding trip is
    communication-bound and the ions carry the edge duty cycle; there is
    no multimode memory, so no storage duration is reported.
    """
    _check_cell(protocol, topology, l_km)
    if protocol not in ("direct_sc", "direct_dc"):
        raise ValueError(f"not a direct-link protocol: {protocol!r}")
    clicks = 1 if protocol == "direct_sc" else 2
    segments = 4 if topology == "repeater" else 2
    eta_d = eta_bb(l_km, segments, params)

    def one_link() -> tuple[float, BipartiteIonState]:
        if protocol == "direct_sc":
            p, state = direct_single_click(params, settings.p_ion, eta_d)
        else:
            p, state = direct_double_click(params, eta_d)
        return p, _with_visibility(state, params.visibility**clicks)

    span = _bb_span_km(l_km, topology)
    period = _attempt_period(span, params.t_a_s, params)
    p_success, state = one_link()
    rate = params.o_en * p_success / period
    if topology == "repeater":
        state = ion_swap(state, state)
        duration = race_completion_time(rate, rate)
    else:
        duration = 1.0 / rate
    return ProtocolResult(
        protocol=protocol,
        topology=topology,
        l_km=l_km,
        fidelity=bell_fidelity(state),
        duration_s=duration,
        storage_s=None,
        state=state,
        rates=None,
    )


def evaluate(
    protocol: str,
    topology: str,
    params: HardwareParams,
    settings: EmissionSettings,
    l_km: float,
) -> ProtocolResult:
    """Evaluate one sweep cell; see the per-protocol functions."""
    if protocol == "tsc":
        return evaluate_tsc(params, settings, l_km, topology)
    if protocol == "dc":
        return evaluate_dc(params, settings, l_km, topology)
    return evaluate_direct(protocol, params, settings, l_km, topology)

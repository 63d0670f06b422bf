"""Optical entanglement swaps between stored photonic memories.

A swap station reads two memories out into a balanced splitter and heralds
on a single click, transferring the ion correlation one link outward.  The
single-click chain has closed element maps: :func:`swap1` couples a
heralded edge state to the near memory of a backbone link, :func:`swap2`
fuses the two remaining memories into an ion-ion state.  The double-click
chain has no closed form and is evaluated photon-by-photon on the Fock
engine (:func:`dc_swap_chain`).

Probabilities returned by this module are per-attempt success
probabilities, integrated over the flat read-out envelope of the stored
photons; states come back non-normalized from the closed-form swaps (their
elements are exact products of the input weights) and normalized from the
engine chain.
"""

from __future__ import annotations

import logging
import math

from .core import (
    DUAL_EXT_COHERENCES,
    DUAL_EXT_DIAGONALS,
    BipartiteIonState,
    DualRailState,
    HardwareParams,
    NullStateError,
    SingleRailState,
    normalize,
)
from .fock import (
    FockOperator,
    ModeRegister,
    beamsplitter,
    elements_from_operator,
    expand_cap,
    herald_click,
    operator_from_elements,
    tensor,
    window_filter,
)

logger = logging.getLogger(__name__)


def _require_normalized(state: SingleRailState, family: str, role: str) -> None:
    if state.family != family:
        raise ValueError(f"{role} must be a {family}-family state, got {state.family}")
    if not state.normalized:
        raise ValueError(f"{role} must be normalized before swapping")


def swap1(
    en: SingleRailState, bb: SingleRailState, params: HardwareParams
) -> tuple[float, SingleRailState]:
    """First swap: edge memory against the near memory of a backbone link.

    Both inputs must be normalized.  Returns the per-attempt success
    probability and the non-normalized element state of the ion and the
    surviving far memory, which inherits the edge mixing angle.  The dark
    contribution keeps the leading vacuum-heralding products only.
    """
    _require_normalized(en, "A", "edge input")
    _require_normalized(bb, "B", "backbone input")
    a, b = en.elements, bb.elements
    q = params.w_swap / 4.0
    p_d = params.p_dark
    s2, c2 = en.sin2_theta, en.cos2_theta
    b1_sum = b["B1"] + b["B1'"]
    c1 = q * a["A1"] * (b["B1"] - b["B1'"])
    if c1 < 0.0:
        raise ValueError(
            "first-swap coherence would be negative (B1' exceeds B1); "
            "the backbone input is not a valid heralded link"
        )
    elements = {
        "C0": q * (a["A0"] * b1_sum + 2.0 * s2 * a["A1"] * b["B0"])
        + p_d * a["A0"] * b["B0"],
        "C1": c1,
        "C1'": q
        * (2.0 * c2 * a["A1"] * b["B1'"] + a["A1'"] * b1_sum + 2.0 * a["A2"] * b["B0"])
        + p_d * c2 * a["A1"] * b["B0"],
        "C1''": q * (2.0 * s2 * a["A1"] * b["B1'"] + 4.0 * a["A0"] * b["B2"])
        + p_d * 0.5 * a["A0"] * b["B1"],
        "C2": q
        * (4.0 * a["A1'"] * b["B2"] + 2.0 * c2 * a["A1"] * b["B2"] + a["A2"] * b1_sum)
        + p_d * 0.5 * c2 * a["A1"] * b["B1"],
        "C2'": q * 2.0 * a["A1"] * b["B2"],
        "C3": q * 4.0 * a["A2"] * b["B2"],
    }
    out = SingleRailState(elements, theta_tan2=en.theta_tan2)
    return 2.0 * out.trace() / params.w_swap, out


def _final_swap_factors(
    state: SingleRailState, role: str
) -> tuple[float, float, float, float, float, float, float]:
    """Element 7-tuple (X0, X1, X1', X1'', X2, X2', X3) seen by the final swap.

    An edge state that skipped the first swap exposes its A weights in the
    slots of matching photon content; the slots that only exist after a
    swap (X1'', X2', X3) are empty for it.
    """
    e = state.elements
    if state.family == "C":
        return (e["C0"], e["C1"], e["C1'"], e["C1''"], e["C2"], e["C2'"], e["C3"])
    if state.family == "A":
        return (e["A0"], e["A1"], e["A1'"], 0.0, e["A2"], 0.0, 0.0)
    raise ValueError(f"{role} of the final swap must be A- or C-family")


def swap2(
    left: SingleRailState,
    right: SingleRailState,
    params: HardwareParams,
    sign: int = +1,
) -> tuple[float, BipartiteIonState]:
    """Final swap of the single-click chain: two memories into two ions.

    Accepts once-swapped (C-family) or fresh edge (A-family) states on
    either side, both normalized.  ``sign`` is the product of the detector
    labels collected along the chain and lands on the coherence.  Returns
    the per-attempt success probability and the non-normalized two-ion
    state; the coherence carries no interference-visibility factor, which
    is attached once per assembled link downstream.
    """
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    for role, state in (("left input", left), ("right input", right)):
        if not state.normalized:
            raise ValueError(f"{role} must be normalized before swapping")
    c0, c1, c1p, c1pp, c2, c2p, _ = _final_swap_factors(left, "left input")
    f0, f1, f1p, f1pp, f2, f2p, _ = _final_swap_factors(right, "right input")
    h = params.w_swap / 2.0
    p_d = params.p_dark
    s2l, c2l = left.sin2_theta, left.cos2_theta
    s2r, c2r = right.sin2_theta, right.cos2_theta
    alpha = sign * h * c1 * f1 * math.sqrt(s2l * c2l * s2r * c2r)
    d00 = h * (c0 * (f1pp + s2r * f1) + (c1pp + s2l * c1) * f0) + p_d * c0 * f0
    d01 = (
        h * ((c1pp + s2l * c1) * (f1p + c2r * f1) + c0 * (f2 + c2r * f2p))
        + p_d * c2r * c0 * f1
    )
    d10 = (
        h * ((c1p + c2l * c1) * (f1pp + s2r * f1) + (c2 + c2l * c2p) * f0)
        + p_d * c2l * c1 * f0
    )
    d11 = (
        h * ((c1p + c2l * c1) * (f2 + c2r * f2p) + (c2 + c2l * c2p) * (f1p + c2r * f1))
        + p_d * c2l * c2r * c1 * f1
    )
    trace = d00 + d01 + d10 + d11
    if trace <= 0.0:
        raise NullStateError("final swap cannot herald: no photon-bearing weight")
    out = BipartiteIonState(alpha=alpha, d00=d00, d01=d01, d10=d10, d11=d11)
    return 2.0 * trace / params.w_swap, out


# --- double-click chain, evaluated on the Fock engine ---------------------


def _swap_station(
    state: FockOperator,
    mem_a: str,
    mem_b: str,
    params: HardwareParams,
    label: str,
) -> tuple[float, FockOperator]:
    """Window-filtered read-out of two memories into one heralding click."""
    before = state.trace()
    state = window_filter(state, mem_a, params.w_swap)
    state = window_filter(state, mem_b, params.w_swap)
    need = state.register.cap(mem_a) + state.register.cap(mem_b)
    if state.register.cap(mem_a) < need:
        state = expand_cap(state, mem_a, need)
    if state.register.cap(mem_b) < need:
        state = expand_cap(state, mem_b, need)
    state = beamsplitter(state, mem_a, mem_b)
    trace, state = herald_click(
        state, mem_a, p_dark=params.p_dark, other_detectors=(mem_b,)
    )
    if trace <= 0.0:
        raise NullStateError(f"{label} heralded nothing")
    return 2.0 * (trace / before) / params.w_swap, state


def _half_chain_op(
    en: DualRailState,
    bb_pair: tuple[SingleRailState, SingleRailState],
    params: HardwareParams,
    side: str,
) -> tuple[list[float], FockOperator]:
    """Extend the rails of one edge state by backbone links.

    Returns the per-rail swap probabilities and the operator on the ion
    and the far memories.
    """
    if en.en_elements is None:
        raise ValueError("the double-click chain starts from an edge-form state")
    register = ModeRegister(
        ((f"ion_{side}", 1), (f"r0_{side}", 1), (f"r1_{side}", 1))
    )
    state = operator_from_elements(en, register=register)
    probs = []
    for rail, bb in enumerate(bb_pair):
        if bb.family != "B":
            raise ValueError("rail extensions must be B-family states")
        near, far = f"n{rail}_{side}", f"f{rail}_{side}"
        bb_op = operator_from_elements(
            bb, register=ModeRegister(((near, 2), (far, 2)))
        )
        state = tensor(state, bb_op)
        prob, state = _swap_station(
            state, f"r{rail}_{side}", near, params, f"swap {rail + 1}"
        )
        probs.append(prob)
    return probs, state


def _extended_from_half(state: FockOperator) -> DualRailState:
    """Read the rail-extended element set off a (ion, rail, rail) operator."""
    elements = {}
    for name in DUAL_EXT_DIAGONALS:
        occ = tuple(int(c) for c in name[1:])
        elements[name] = state.diagonal(occ)
    for name, (low, high) in DUAL_EXT_COHERENCES.items():
        bra = tuple(int(c) for c in low[1:])
        ket = tuple(int(c) for c in high[1:])
        elements[name] = state.entry(bra, ket).real
    return DualRailState(extended_elements=elements)


def dc_half_chain(
    en: DualRailState,
    bb_pair: tuple[SingleRailState, SingleRailState],
    params: HardwareParams,
) -> tuple[list[float], DualRailState]:
    """One half of the repeater chain: edge state extended on both rails.

    Returns the two swap probabilities and the normalized rail-extended
    state of the ion and the two far memories.
    """
    probs, op = _half_chain_op(en, tuple(bb_pair), params, "l")
    extended, _ = normalize(_extended_from_half(op))
    return probs, extended


def _finalize(state: FockOperator) -> BipartiteIonState:
    final, _ = normalize(elements_from_operator(state, "bipartite"))
    return final


def dc_swap_chain(
    en_left: DualRailState,
    en_right: DualRailState,
    bb_states: list[SingleRailState],
    topology: str,
    params: HardwareParams,
    ordering: str = "parallel",
) -> tuple[tuple[float, float, float, float], BipartiteIonState]:
    """Swap chain of the double-click protocol, per-rail single clicks.

    ``repeater`` extends both edge states by backbone links (``bb_states``
    holds four: rail 0 and 1 of the left half, then of the right half) and
    fuses the far memories rail by rail at the center; the probabilities
    come back as (rail-0 extension, rail-1 extension, rail-0 fuse, rail-1
    fuse), extensions evaluated on the left half.  ``direct`` spans one
    backbone link per rail between the two edge states (two entries) and
    swaps at the four link ends; ``ordering`` picks the sequence the
    conditional probabilities refer to: ``parallel`` completes the left
    ends first (left 0, left 1, right 0, right 1), ``series`` completes
    rail 0 first (left 0, right 0, left 1, right 1).  The final state is
    ordering-independent.

    All swap stations click on the first detector; the heralded coherence
    is positive, and no visibility factor is attached here.
    """
    if topology == "repeater":
        if ordering != "parallel":
            raise ValueError("the repeater chain has a single swap ordering")
        if len(bb_states) != 4:
            raise ValueError("repeater topology extends four rails")
        probs_l, half_l = _half_chain_op(en_left, tuple(bb_states[:2]), params, "l")
        _, half_r = _half_chain_op(en_right, tuple(bb_states[2:]), params, "r")
        state = tensor(half_l, half_r)
        p3, state = _swap_station(state, "f0_l", "f0_r", params, "swap 3")
        p4, state = _swap_station(state, "f1_l", "f1_r", params, "swap 4")
        return (probs_l[0], probs_l[1], p3, p4), _finalize(state)

    if topology != "direct":
        raise ValueError("topology must be 'repeater' or 'direct'")
    if len(bb_states) != 2:
        raise ValueError("direct topology spans one backbone link per rail")
    if ordering not in ("parallel", "series"):
        raise ValueError("ordering must be 'parallel' or 'series'")
    for en in (en_left, en_right):
        if en.en_elements is None:
            raise ValueError("the double-click chain starts from edge-form states")

    right_reg = ModeRegister((("ion_r", 1), ("r0_r", 1), ("r1_r", 1)))
    right_op = operator_from_elements(en_right, register=right_reg)

    if ordering == "parallel":
        [p1, p2], state = _half_chain_op(en_left, tuple(bb_states), params, "l")
        state = tensor(state, right_op)
        p3, state = _swap_station(state, "r0_r", "f0_l", params, "swap 3")
        p4, state = _swap_station(state, "r1_r", "f1_l", params, "swap 4")
        return (p1, p2, p3, p4), _finalize(state)

    # series: both ends of rail 0, then both ends of rail 1
    [p1], state = _half_chain_op(en_left, (bb_states[0],), params, "l")
    state = tensor(state, right_op)
    p2, state = _swap_station(state, "r0_r", "f0_l", params, "swap 2")
    bb1 = operator_from_elements(
        bb_states[1], register=ModeRegister((("n1_l", 2), ("f1_l", 2)))
    )
    state = tensor(state, bb1)
    p3, state = _swap_station(state, "r1_l", "n1_l", params, "swap 3")
    p4, state = _swap_station(state, "r1_r", "f1_l", params, "swap 4")
    return (p1, p2, p3, p4), _finalize(state)

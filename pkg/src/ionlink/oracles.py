"""Brute-force reference scenarios built on the Fock engine.

Every heralded link of the protocol stack is assembled here from first
principles: source states, loss channels, window filters, beamsplitters and
the click model, with nothing shared with the closed-form element
expressions.  The closed forms are validated against these scenarios, and
the returned element states are exact within the photon-number truncation.

Conventions: a ``+1`` sign refers to the first detector of a station (the
``d+`` output of the splitter); probabilities returned here are per-attempt
success probabilities already summed over detector signs and integrated
over click times (flat envelopes make heralded states click-time
independent, so one representative click is evaluated and scaled).
"""

from __future__ import annotations

from .core import (
    BipartiteIonState,
    DualRailState,
    EmissionSettings,
    HardwareParams,
    SingleRailState,
)
from .fock import (
    FockOperator,
    ModeRegister,
    attenuate,
    beamsplitter,
    build_ion_state,
    build_spdc_state,
    correlated_attenuate,
    elements_from_operator,
    expand_cap,
    herald_click,
    operator_from_elements,
    project,
    project_total,
    tensor,
    window_filter,
)


def _equalize_for_bs(state: FockOperator, label_a: str, label_b: str) -> FockOperator:
    """Expand the caps of two modes so their populated sectors fit the splitter."""
    need = state.register.cap(label_a) + state.register.cap(label_b)
    if state.register.cap(label_a) < need:
        state = expand_cap(state, label_a, need)
    if state.register.cap(label_b) < need:
        state = expand_cap(state, label_b, need)
    return state


def _interfere_and_click(
    state: FockOperator,
    label_a: str,
    label_b: str,
    p_dark: float,
) -> tuple[float, FockOperator]:
    """Balanced splitter on two detector-bound modes, then a d+ click."""
    state = _equalize_for_bs(state, label_a, label_b)
    state = beamsplitter(state, label_a, label_b)
    return herald_click(state, label_a, p_dark=p_dark, other_detectors=(label_b,))


def oracle_bb(
    params: HardwareParams, settings: EmissionSettings, eta_bb: float
) -> tuple[float, SingleRailState]:
    """Backbone link: two correlated pair sources heralded by one click.

    Returns the single-detector click probability (the trace) and the
    non-normalized B-family element state of the two memories, with memory
    loss up to the later swap detection already included.
    """
    p_pair = settings.p_spdc_bb
    left = build_spdc_state(p_pair, True, ModeRegister((("b_l", 2), ("c_l", 2))))
    right = build_spdc_state(p_pair, True, ModeRegister((("b_r", 2), ("c_r", 2))))
    state = tensor(left, right)
    # single-Schmidt-mode sources: herald loss leaves the stored twin behind
    state = attenuate(state, "b_l", eta_bb)
    state = attenuate(state, "b_r", eta_bb)
    state = window_filter(state, "b_l", params.w_bb)
    state = window_filter(state, "b_r", params.w_bb)
    prob, state = _interfere_and_click(state, "b_l", "b_r", params.p_dark)
    state = attenuate(state, "c_l", params.eta_m)
    state = attenuate(state, "c_r", params.eta_m)
    # the element basis spans at most two shared photons; genuinely
    # third-order occupations are dropped like the perturbative expansion does
    state = project_total(state, ("c_l", "c_r"), 2)
    elements = elements_from_operator(state, "B")
    return prob, elements


def en_vacuum_bin_probability(params: HardwareParams, settings: EmissionSettings) -> float:
    """No-herald probability of a single idle edge-SPDC time-bin."""
    reg = ModeRegister((("b", 2), ("c", 2)))
    state = build_spdc_state(settings.p_spdc_en, False, reg)
    state = correlated_attenuate(state, "b", "c", params.eta_prime)
    return project(state, "b", 0).trace()


def _en_single_click_state(
    params: HardwareParams, settings: EmissionSettings
) -> tuple[float, FockOperator]:
    """Click-bin model of the single-click edge node (one detector)."""
    ion = build_ion_state(
        "single_rail", settings.p_ion, ModeRegister((("ion", 1), ("a", 1)))
    )
    spdc = build_spdc_state(
        settings.p_spdc_en, False, ModeRegister((("b", 2), ("c", 2)))
    )
    state = tensor(ion, spdc)
    # pair correlation first (while heralds and twins are still matched),
    # then the independent per-photon channels
    state = correlated_attenuate(state, "b", "c", params.eta_prime)
    state = attenuate(state, "a", params.eta)
    state = window_filter(state, "a", params.w_ion)
    state = window_filter(state, "b", params.w_edge)
    prob, state = _interfere_and_click(state, "a", "b", params.p_dark)
    state = attenuate(state, "c", params.eta_m)
    return prob, state


def oracle_en_single(
    params: HardwareParams, settings: EmissionSettings
) -> tuple[float, SingleRailState, float]:
    """Single-click edge node: ion vs multimode pair source.

    Returns the per-attempt success probability (both detectors, all click
    times, idle bins required silent), the non-normalized A-family elements
    of the heralded ion/memory state, and the mixing angle tan^2(theta)
    derived from the heralded operator itself.
    """
    trace, state = _en_single_click_state(params, settings)
    # mixing angle from the heralded superposition: the coherent block has
    # <1,0|rho|0,1> = A1 sin cos and <0,1|rho|0,1> = A1 sin^2
    numer = state.diagonal((0, 1))
    coh = state.entry((1, 0), (0, 1)).real
    theta_tan2 = (numer / coh) ** 2 if abs(coh) > 0.0 else 0.0
    elements = elements_from_operator(state, "A", theta_tan2=theta_tan2)
    p_bin = en_vacuum_bin_probability(params, settings)
    p_success = 2.0 * trace * p_bin ** (params.n_bins - 1) / params.w_ion
    return p_success, elements, theta_tan2


def oracle_en_double(
    params: HardwareParams, settings: EmissionSettings
) -> tuple[float, DualRailState]:
    """Double-click edge node: dual-rail ion, one pair source per rail.

    Rails are heralded sequentially (the clicks commute); each rail requires
    its idle bins silent.  Returns the per-attempt success probability and
    the non-normalized dual-rail element state.
    """
    ion = build_ion_state(
        "dual_rail", 0.5, ModeRegister((("ion", 1), ("a0", 1), ("a1", 1)))
    )
    state = ion
    for rail in (0, 1):
        spdc = build_spdc_state(
            settings.p_spdc_en,
            False,
            ModeRegister(((f"b{rail}", 2), (f"c{rail}", 2))),
        )
        state = tensor(state, spdc)
        state = correlated_attenuate(state, f"b{rail}", f"c{rail}", params.eta_prime)
        state = attenuate(state, f"a{rail}", params.eta)
        state = window_filter(state, f"a{rail}", params.w_ion)
        state = window_filter(state, f"b{rail}", params.w_edge)
        _, state = _interfere_and_click(state, f"a{rail}", f"b{rail}", params.p_dark)
    trace = state.trace()
    state = attenuate(state, "c0", params.eta_m)
    state = attenuate(state, "c1", params.eta_m)
    elements = elements_from_operator(state, "dual_en")
    p_bin = en_vacuum_bin_probability(params, settings)
    bins_idle = p_bin ** (2 * (params.n_bins - 1))
    p_success = 4.0 * trace * bins_idle / params.w_ion**2
    return p_success, elements


def oracle_swap1(
    en_state: SingleRailState,
    bb_state: SingleRailState,
    params: HardwareParams,
) -> tuple[float, SingleRailState]:
    """First optical swap: edge memory read out against the near BB memory.

    Both inputs are element-form states (normally normalized); they are
    expanded to operators, read out through the swap window, interfered and
    heralded.  Returns the d+ click trace and the C-family element state of
    the ion and the far BB memory, carrying the edge mixing angle.
    """
    en_op = operator_from_elements(
        en_state, register=ModeRegister((("ion", 1), ("m_en", 2)))
    )
    bb_op = operator_from_elements(
        bb_state, register=ModeRegister((("m_near", 2), ("m_far", 2)))
    )
    state = tensor(en_op, bb_op)
    state = window_filter(state, "m_en", params.w_swap)
    state = window_filter(state, "m_near", params.w_swap)
    trace, state = _interfere_and_click(state, "m_en", "m_near", params.p_dark)
    elements = elements_from_operator(
        state, "C", theta_tan2=en_state.theta_tan2
    )
    return trace, elements


def oracle_swap2(
    left: SingleRailState,
    right: SingleRailState,
    params: HardwareParams,
) -> tuple[float, BipartiteIonState]:
    """Final optical swap: the two remaining memories heralded into ion-ion."""
    left_op = operator_from_elements(
        left, register=ModeRegister((("ion_l", 1), ("m_l", 2)))
    )
    right_op = operator_from_elements(
        right, register=ModeRegister((("ion_r", 1), ("m_r", 2)))
    )
    state = tensor(left_op, right_op)
    state = window_filter(state, "m_l", params.w_swap)
    state = window_filter(state, "m_r", params.w_swap)
    trace, state = _interfere_and_click(state, "m_l", "m_r", params.p_dark)
    elements = elements_from_operator(state, "bipartite")
    return trace, elements


def oracle_direct_sc(
    params: HardwareParams, p_ion: float, eta_d: float
) -> tuple[float, BipartiteIonState]:
    """Direct ion-ion single-click link through a central station."""
    left = build_ion_state(
        "single_rail", p_ion, ModeRegister((("ion_l", 1), ("a_l", 1)))
    )
    right = build_ion_state(
        "single_rail", p_ion, ModeRegister((("ion_r", 1), ("a_r", 1)))
    )
    state = tensor(left, right)
    state = attenuate(state, "a_l", eta_d)
    state = attenuate(state, "a_r", eta_d)
    state = window_filter(state, "a_l", params.w_ion)
    state = window_filter(state, "a_r", params.w_ion)
    trace, state = _interfere_and_click(state, "a_l", "a_r", params.p_dark)
    elements = elements_from_operator(state, "bipartite")
    p_success = 2.0 * trace / params.w_ion
    return p_success, elements


def oracle_direct_dc(
    params: HardwareParams, eta_d: float
) -> tuple[float, BipartiteIonState]:
    """Direct ion-ion double-click link (one splitter and click per rail)."""
    left = build_ion_state(
        "dual_rail", 0.5, ModeRegister((("ion_l", 1), ("l0", 1), ("l1", 1)))
    )
    right = build_ion_state(
        "dual_rail", 0.5, ModeRegister((("ion_r", 1), ("r0", 1), ("r1", 1)))
    )
    state = tensor(left, right)
    for mode in ("l0", "l1", "r0", "r1"):
        state = attenuate(state, mode, eta_d)
        state = window_filter(state, mode, params.w_ion)
    for rail in (0, 1):
        _, state = _interfere_and_click(state, f"l{rail}", f"r{rail}", params.p_dark)
    trace = state.trace()
    elements = elements_from_operator(state, "bipartite")
    p_success = 4.0 * trace / params.w_ion**2
    return p_success, elements

"""Direct ion-ion links and the deterministic two-ion repeater swap.

Reference points for the repeater comparison: two remote ions entangled
through a midpoint detection station, either by a single click on the
superposition of their weak emission amplitudes or by a coincidence
click on one photon from each side, and the gate-based swap that fuses
two such pairs at a middle ion node into one end-to-end pair.
"""

from __future__ import annotations

import logging
import math

from .core import (
    BipartiteIonState,
    HardwareParams,
    NullStateError,
    _unit_trace,
)

logger = logging.getLogger(__name__)

# how closely the two same-parity populations and the two off-diagonal
# populations of an ion_swap input must agree
SYMMETRY_RTOL = 1e-9


def _check_unit_interval(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


def _pair_unit_trace(vacuum: float, bell: float) -> tuple[float, float]:
    # diagonals come as [vacuum, bell, bell, vacuum] already divided by
    # their sum, so at most float rounding moves the trace off 1; spread
    # the residual over one of the pairs to keep both equalities exact
    def total(v: float, b: float) -> float:
        return ((v + b) + b) + v

    residual = total(vacuum, bell) - 1.0
    if residual == 0.0:
        return vacuum, bell
    for v, b in (
        (vacuum - residual / 2.0, bell),
        (vacuum, bell - residual / 2.0),
    ):
        if total(v, b) == 1.0 and v >= 0.0 and b >= 0.0:
            return v, b
    snapped = _unit_trace([vacuum, bell, bell, vacuum])
    logger.warning("unit-trace snap broke a diagonal pair by one ulp")
    return snapped[0], snapped[1]


def direct_single_click(
    params: HardwareParams, p_ion: float, eta_d: float
) -> tuple[float, BipartiteIonState]:
    """Single-click link between two remote ions via a midpoint station.

    Both ions emit a photon with probability ``p_ion``; a single click
    behind the midpoint splitter heralds the superposition of the two
    one-photon branches.  ``eta_d`` is the end-to-end efficiency of
    either arm, fibre and detection included, and is supplied by the
    caller so the same map covers the full-distance link and the
    half-distance segments of an ion-repeater chain.

    Click times are integrated over the whole attempt window: the herald
    can fire in any resolution slot, so the dark-count weight is
    ``p_dark`` per slot times the number of slots, ``1 / w_ion``.
    Double emission with one photon lost populates the both-ions-excited
    diagonal.  Those two same-parity populations are averaged before the
    state is returned, which leaves the fidelity untouched and makes the
    output directly consumable by :func:`ion_swap`.

    Returns the success probability (both detectors counted) and the
    normalized heralded state.
    """
    _check_unit_interval("p_ion", p_ion)
    _check_unit_interval("eta_d", eta_d)
    bell = eta_d * p_ion * (1.0 - p_ion)
    double = 2.0 * eta_d * (1.0 - eta_d) * p_ion**2
    dark = 2.0 * params.p_dark / params.w_ion
    p_success = (2.0 * bell + double) + dark
    if p_success <= 0.0:
        raise NullStateError("nothing to herald: no emission and no dark counts")
    same_parity = (dark + double) / 2.0 / p_success
    coherence = bell / p_success
    vacuum, coherent = _pair_unit_trace(same_parity, coherence)
    state = BipartiteIonState(
        alpha=coherent,
        d00=vacuum,
        d01=coherent,
        d10=coherent,
        d11=vacuum,
        normalized=True,
    )
    return p_success, state


def direct_double_click(
    params: HardwareParams, eta_d: float
) -> tuple[float, BipartiteIonState]:
    """Coincidence link between two remote ions via a midpoint station.

    Each ion emits exactly one photon into a superposition of two rails;
    one click per rail at the midpoint heralds the pair.  Both photons
    must arrive, so the success probability carries ``eta_d`` squared
    and dark counts enter only paired with a photon loss: one real click
    plus one dark count (weight ``p_dark * (1 - eta_d) * eta_d``, spread
    over the attempt slots) or two dark counts with both photons lost.
    Dark coincidences are parity-blind and land on every diagonal alike,
    while the coherence keeps only the true two-photon weight, so the
    fidelity is 1 whenever the dark rate vanishes.

    Returns the success probability (all four detector pairings counted)
    and the normalized heralded state.
    """
    _check_unit_interval("eta_d", eta_d)
    bell = eta_d**2 / 4.0
    slots = 1.0 / params.w_ion
    dark = (
        params.p_dark * (1.0 - eta_d) * eta_d * slots
        + (params.p_dark * (1.0 - eta_d) * slots) ** 2
    )
    p_success = 2.0 * bell + 4.0 * dark
    if p_success <= 0.0:
        raise NullStateError("nothing to herald: no detection and no dark counts")
    vacuum, coherent = _pair_unit_trace(dark / p_success, (bell + dark) / p_success)
    state = BipartiteIonState(
        alpha=bell / p_success,
        d00=vacuum,
        d01=coherent,
        d10=coherent,
        d11=vacuum,
        normalized=True,
    )
    return p_success, state


def _swap_input(role: str, state: BipartiteIonState) -> tuple[float, float, float]:
    """Validate one ion_swap operand and collapse it to its three weights."""
    if not state.normalized:
        raise ValueError(f"{role} ion_swap input must be normalized")
    alpha = state.alpha
    if abs(complex(alpha).imag) > SYMMETRY_RTOL * abs(alpha):
        raise ValueError(f"{role} ion_swap input needs a real, positive coherence")
    coherence = complex(alpha).real
    if coherence <= 0.0:
        raise ValueError(f"{role} ion_swap input needs a real, positive coherence")
    if not math.isclose(state.d01, state.d10, rel_tol=SYMMETRY_RTOL, abs_tol=0.0):
        raise ValueError(f"{role} ion_swap input has unbalanced off-diagonal weights")
    if not math.isclose(state.d00, state.d11, rel_tol=SYMMETRY_RTOL, abs_tol=0.0):
        raise ValueError(f"{role} ion_swap input has unbalanced same-parity weights")
    return coherence, (state.d01 + state.d10) / 2.0, (state.d00 + state.d11) / 2.0


def ion_swap(left: BipartiteIonState, right: BipartiteIonState) -> BipartiteIonState:
    """Deterministic entanglement swap at a middle node holding two ions.

    A two-qubit gate and readout at the middle node fuse the left and
    right pairs; readout outcomes are corrected by feed-forward, so the
    swap succeeds with probability 1 and the output is renormalized to
    an exactly unit trace.  The map is bilinear in the two inputs:
    coherences multiply (halved by the readout), matching-parity
    populations feed the off-diagonals and crossed parities feed the
    same-parity diagonals.

    Both inputs must be symmetric, with a real positive coherence, equal
    off-diagonal populations and equal same-parity populations, as
    produced by :func:`direct_single_click`; the output satisfies the
    same conditions, so swaps chain.
    """
    alpha_l, bell_l, vac_l = _swap_input("left", left)
    alpha_r, bell_r, vac_r = _swap_input("right", right)
    coherence = alpha_l * alpha_r / 2.0
    bell = (bell_l * bell_r + vac_l * vac_r) / 2.0
    vacuum = (bell_l * vac_r + vac_l * bell_r) / 2.0
    trace = ((vacuum + bell) + bell) + vacuum
    vacuum, bell = _pair_unit_trace(vacuum / trace, bell / trace)
    return BipartiteIonState(
        alpha=coherence / trace,
        d00=vacuum,
        d01=bell,
        d10=bell,
        d11=vacuum,
        normalized=True,
    )

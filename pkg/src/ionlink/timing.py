"""Average generation and storage durations for the link protocols.

Entanglement attempts are modeled as independent exponential clocks; the
closed forms below come from race algebra on those clocks (wait for the
first of two processes, then the remainder of the other) with retry
factors for every heralded swap that resets its inputs.  A small
event-driven Monte-Carlo validator backs the kernels and the half
preparation times.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

_PROTOCOLS = ("tsc", "dc")
_TOPOLOGIES = ("repeater", "direct")


@dataclass(frozen=True)
class RateSet:
    """Link generation rates and swap/purification success probabilities.

    ``r_bb`` and ``r_en`` are the backbone and edge-node entanglement
    generation rates in 1/s.  ``p_s1`` .. ``p_s4`` are the heralded swap
    probabilities in the parallel geometry (numbered from the edge
    inward); the ``*_series`` variants apply when the swaps run in series
    in the repeater-less double-click branches.  ``p_p`` is the
    purification herald probability used by the two-single-click total.
    """

    r_bb: float
    r_en: float
    p_s1: float = 1.0
    p_s2: float = 1.0
    p_s3: float = 1.0
    p_s4: float = 1.0
    p_s2_series: float = 1.0
    p_s3_series: float = 1.0
    p_s4_series: float = 1.0
    p_p: float = 1.0

    def __post_init__(self) -> None:
        for name in ("r_bb", "r_en"):
            rate = getattr(self, name)
            if not (rate > 0.0 and math.isfinite(rate)):
                raise ValueError(f"rate {name} must be positive and finite, got {rate!r}")
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
            prob = getattr(self, name)
            if not 0.0 < prob <= 1.0:
                raise ValueError(f"probability {name} must lie in (0, 1], got {prob!r}")


def race_completion_time(rate_a: float, rate_b: float) -> float:
    """Mean time until both of two exponential processes have finished.

    ``1/(ra+rb) * (1 + ra/rb + rb/ra)``: wait for the first to finish,
    then the memoryless remainder of the other.  Equals the expectation
    of the maximum of two independent exponentials.
    """
    return (1.0 + rate_a / rate_b + rate_b / rate_a) / (rate_a + rate_b)


def duration_tsc_repeater(rates: RateSet) -> tuple[float, float]:
    """Two-single-click durations with a central repeater.

    Returns ``(t_single_link, t_total)``.  Each half runs its edge and
    backbone generation in parallel and swaps at their junction; the 3/2
    factor accounts for preparing two identical halves, and the center
    swap plus purification of two sequential links complete the total:
    ``t_total = 2 * t_single_link / p_p``.
    """
    kernel = race_completion_time(rates.r_bb, rates.r_en)
    t_single = 1.5 * kernel / (rates.p_s1 * rates.p_s2)
    return t_single, 2.0 * t_single / rates.p_p


def duration_tsc_norepeater(rates: RateSet) -> tuple[float, float]:
    """Two-single-click durations with a single backbone link.

    Three links (two edges, one backbone) are generated in parallel and
    swapped when ready; if the backbone arrives last the two swaps are
    attempted simultaneously, so a failure of either regenerates
    everything.  Returns ``(t_single_link, t_total)`` with the same
    purified total as the repeater case.
    """
    rb, re = rates.r_bb, rates.r_en
    bracket = (
        1.0
        + (rb / re) * (1.0 + 2.0 * rates.p_s1) / 2.0
        + (2.0 * re / (re + rb)) * (1.0 + re / rb + rates.p_s1 * rb / re)
    )
    t_single = bracket / (rates.p_s1 * rates.p_s2 * (2.0 * re + rb))
    return t_single, 2.0 * t_single / rates.p_p


def duration_dc_repeater(rates: RateSet) -> float:
    """Double-click duration with a central repeater.

    Within each half the edge races one backbone, the junction swap is
    attempted (retry factor ``1/p_s1``), then the second backbone takes
    another ``1/r_bb``; a failure of the second swap resets the half.
    The two center swaps consume both halves on failure.
    """
    kernel = race_completion_time(rates.r_bb, rates.r_en)
    half = kernel / rates.p_s1 + 1.0 / rates.r_bb
    return 1.5 * half / (rates.p_s2 * rates.p_s3 * rates.p_s4)


def dc_norepeater_branches(
    rates: RateSet,
) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Order probabilities and mean durations of the six repeater-less branches.

    Two edges and two backbones are generated with any swap performed
    when ready.  The six completion orders split into three that finish
    with parallel-geometry swaps (two backbones first) and three that
    finish in series; each order has a closed mean duration built from
    the same race terms, with series swap probabilities where the
    geometry demands them.
    """
    rb, re = rates.r_bb, rates.r_en
    s = 2.0 * re + rb
    u = re + rb
    probs = (
        (rb / s) ** 2,
        2.0 * re * rb / s**2 * rb / u,
        2.0 * re / s * rb**2 / u**2,
        2.0 * re / s * re / u,
        2.0 * re / s * rb * re / u**2,
        2.0 * re * rb / s**2 * re / u,
    )
    final_par = rates.p_s3 * rates.p_s4
    final_ser = rates.p_s3_series * rates.p_s4_series
    times = (
        ((2.0 / s + 0.5 / re) / (rates.p_s1 * rates.p_s2) + 1.0 / re) / final_par,
        ((2.0 / s / rates.p_s1 + 1.0 / u) / rates.p_s2 + 1.0 / re) / final_par,
        (((1.0 / s + 1.0 / u) / rates.p_s1 + 1.0 / u) / rates.p_s2 + 1.0 / re)
        / final_par,
        ((1.0 / s + 1.0 / u + 1.0 / rb) / (rates.p_s1 * rates.p_s2_series) + 1.0 / rb)
        / final_ser,
        (((1.0 / s + 1.0 / u) / rates.p_s1 + 1.0 / u) / rates.p_s2_series + 1.0 / rb)
        / final_ser,
        ((2.0 / s / rates.p_s1 + 1.0 / u) / rates.p_s2_series + 1.0 / rb) / final_ser,
    )
    return probs, times


def duration_dc_norepeater(rates: RateSet) -> float:
    """Double-click duration with a single backbone pair: sum of p_k * T_k."""
    probs, times = dc_norepeater_branches(rates)
    return math.fsum(p * t for p, t in zip(probs, times))


def storage_duration(protocol: str, topology: str, rates: RateSet) -> float:
    """Worst-case mean storage time of a multimode memory.

    Taken as the maximum over configurations of the longest average
    waiting time of one memory: the waiting memory sits through the
    residual generation of a missing sibling link in its own unit (worst
    case ``1/min(r_bb, r_en)``) plus the preparation of the partner
    assembly from scratch, including retries of swaps internal to the
    partner (which do not consume the waiting memory).  Swaps whose
    failure resets the waiting memory itself end its storage instead and
    add no retry factor.

    Per case:

    - ``tsc``/``repeater``: ``1/min(r_bb, r_en) + kernel/p_s1``, the
      second term being the partner half's mean preparation time (equal
      to ``2 p_s2 t_single_link / 3``).
    - ``tsc``/``direct``: an edge memory waits for the other edge and
      the backbone racing in parallel, with junction-swap retries:
      ``kernel/p_s1``.  Simultaneous final swaps add no residual.
    - ``dc``/``repeater``: as the first case with the double-click half
      ``(kernel/p_s1 + 1/r_bb)/p_s2``; both rail memories of an edge
      herald together, so the residual term is unchanged.
    - ``dc``/``direct``: an edge rail memory waits for the partner edge
      and first backbone (``kernel/p_s1``) plus the second backbone
      before a cross swap reaches it: ``kernel/p_s1 + 1/r_bb``.

    Only the first case is a reference expression; the others follow the
    same construction and are validated against the event-level
    Monte-Carlo policies (see :func:`mc_half_preparation`).
    """
    if protocol not in _PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}")
    if topology not in _TOPOLOGIES:
        raise ValueError(f"unknown topology {topology!r}")
    kernel = race_completion_time(rates.r_bb, rates.r_en)
    residual = 1.0 / min(rates.r_bb, rates.r_en)
    if protocol == "tsc":
        half = kernel / rates.p_s1
        return residual + half if topology == "repeater" else half
    half = kernel / rates.p_s1 + 1.0 / rates.r_bb
    if topology == "repeater":
        return residual + half / rates.p_s2
    return half


def mc_race_completion(
    rate_a: float,
    rate_b: float,
    n_samples: int = 1_000_000,
    rng: np.random.Generator | None = None,
) -> float:
    """Monte-Carlo mean of the slower of two exponential processes."""
    if rng is None:
        rng = np.random.default_rng()
    a = rng.exponential(1.0 / rate_a, n_samples)
    b = rng.exponential(1.0 / rate_b, n_samples)
    return float(np.maximum(a, b).mean())


def mc_half_preparation(
    rates: RateSet,
    protocol: str = "tsc",
    n_samples: int = 4000,
    rng: np.random.Generator | None = None,
) -> float:
    """Event-level Monte-Carlo of one repeater-half preparation.

    Simulates the stated policy: edge and backbone clocks run in
    parallel; when both links exist the junction swap is attempted and a
    failure regenerates both.  For ``protocol="dc"`` a successful first
    swap is followed by a second backbone generation and swap whose
    failure resets the whole half.  Returns the mean completion time,
    which the closed forms in :func:`storage_duration` and
    :func:`duration_dc_repeater` predict as ``kernel/p_s1`` and
    ``(kernel/p_s1 + 1/r_bb)/p_s2``.
    """
    if protocol not in _PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}")
    if rng is None:
        rng = np.random.default_rng()
    scale_en = 1.0 / rates.r_en
    scale_bb = 1.0 / rates.r_bb
    total = 0.0
    for _ in range(n_samples):
        t = 0.0
        while True:
            while True:
                t += max(rng.exponential(scale_en), rng.exponential(scale_bb))
                if rng.random() < rates.p_s1:
                    break
            if protocol == "tsc":
                break
            t += rng.exponential(scale_bb)
            if rng.random() < rates.p_s2:
                break
        total += t
    return total / n_samples

"""Element-form state containers shared by every stage of the link simulator.

Heralded states are tracked as small sets of non-negative weights (the
"element form") instead of full density matrices wherever possible.  The
weight labels follow the rail families produced along the chain: ``A`` for
an ion/memory edge link, ``B`` for a memory/memory backbone link, ``C`` for
the state after the first optical swap, and the dual-rail dictionaries used
by the double-click protocol.  The final two-ion state keeps the four
computational diagonals and the single coherence ``alpha``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

logger = logging.getLogger(__name__)

#: Relative tolerance for trace / normalization checks.
TRACE_ATOL = 1e-12

#: Coherences may exceed the geometric-mean bound by this much (rounding slack).
COHERENCE_ATOL = 1e-12

#: Emission probabilities above this leave the perturbative regime.
PERTURBATIVE_LIMIT = 0.2

#: Negative weights closer to zero than this (relative to the largest weight)
#: are treated as rounding noise and clamped.
NEGATIVE_WEIGHT_RTOL = 1e-9

FAMILY_A = ("A0", "A1", "A1'", "A2")
FAMILY_B = ("B0", "B1", "B1'", "B2")
FAMILY_C = ("C0", "C1", "C1'", "C1''", "C2", "C2'", "C3")

#: Edge-node labels of the double-click protocol (single diagonal weights
#: ``a``, ``A0``, ``A0'`` and doubly degenerate ``A1``, ``A1'``, ``A2``).
DUAL_EN_LABELS = ("a", "A0", "A0'", "A1", "A1'", "A2")

#: Diagonal labels of the rail-extended double-click state: ``Cklm`` with the
#: ion qubit k and the photon numbers l, m stored in the two memory rails.
DUAL_EXT_DIAGONALS = tuple(
    f"C{k}{l}{m}" for k in (0, 1) for l in (0, 1, 2) for m in (0, 1, 2)
)

#: Signed coherences of the rail-extended state and the diagonal pairs they
#: connect (used for the geometric-mean bound).
DUAL_EXT_COHERENCES = {
    "c": ("C001", "C110"),
    "c2": ("C002", "C111"),
    "c2'": ("C011", "C120"),
    "c3": ("C012", "C121"),
}


class NullStateError(ValueError):
    """Raised when an all-zero state would have to be normalized."""


class PerturbationBreakdownError(RuntimeError):
    """Raised when a perturbative element expression turns unphysical."""


def _clamp_weights(elements: dict[str, float], skip: tuple[str, ...] = ()) -> dict[str, float]:
    """Return a copy with tiny negative weights clamped to zero.

    Genuinely negative weights (beyond rounding noise relative to the largest
    entry) raise ``ValueError``; the labels in ``skip`` may be signed and are
    copied through untouched.
    """
    wmax = max((abs(v) for k, v in elements.items() if k not in skip), default=0.0)
    tol = NEGATIVE_WEIGHT_RTOL * max(wmax, 1e-300)
    out: dict[str, float] = {}
    for key, value in elements.items():
        if key in skip:
            out[key] = float(value)
            continue
        value = float(value)
        if value < -tol:
            raise ValueError(f"negative weight {key}={value!r}")
        out[key] = max(value, 0.0)
    return out


@dataclass(frozen=True)
class HardwareParams:
    """Fixed hardware description of one link configuration.

    All efficiencies are end-to-end probabilities covering emission up to the
    relevant detection, dark counts are given as a rate, and the timing
    constants fix the temporal-mode weights used throughout the element
    expressions.  The link length is *not* stored here; it is passed to the
    individual operations so one parameter set can be swept over distance.

    Parameters
    ----------
    eta : float
        Ion photon emission-to-detection efficiency at the edge node.
    eta_prime : float
        Edge SPDC heralding-branch efficiency including wavelength conversion.
    eta_bb_intrinsic : float
        Intrinsic (distance-independent) efficiency of one backbone arm.
    eta_m : float
        Memory in/out efficiency up to the swap detector.
    l_att_km : float
        Fiber attenuation length in km (21.7 km for 0.2 dB/km).
    dark_rate_hz : float
        Detector dark-count rate; the per-window probability is
        ``dark_rate_hz * detector_resolution_s``.
    detector_resolution_s : float
        Duration of a single detection window.
    t_a_s : float
        Ion emission pulse duration.
    n_bins : int
        Number of SPDC time-bins matched to one ion pulse; the bin duration
        is ``t_a_s / n_bins``.
    t_bb_s : float
        Backbone time-bin duration.
    swap_window_factor : float
        Read-out window of a swap is ``t_b_s / swap_window_factor``.
    n_bb : int
        Backbone multiplexing capacity (parallel modes per attempt).
    o_en, o_bb : float
        Duty cycles of the edge nodes and the backbone.
    fiber_speed_m_s : float
        Signal velocity in fiber, used for classical-communication times.
    visibility : complex
        Optional interference-visibility factor multiplying heralded
        coherences, ``|visibility| <= 1``.
    dc_acceptance : float
        Optional acceptance fraction of double-click coincidences surviving
        a correlation-window cut (1 = no cut).
    """

    eta: float
    eta_prime: float
    eta_bb_intrinsic: float
    eta_m: float
    l_att_km: float
    dark_rate_hz: float
    detector_resolution_s: float
    t_a_s: float
    n_bins: int
    t_bb_s: float
    swap_window_factor: float
    n_bb: int
    o_en: float
    o_bb: float
    fiber_speed_m_s: float
    visibility: complex = 1.0 + 0.0j
    dc_acceptance: float = 1.0

    def __post_init__(self) -> None:
        for name in ("eta", "eta_prime", "eta_bb_intrinsic", "eta_m"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value!r} outside [0, 1]")
        for name in ("o_en", "o_bb", "dc_acceptance"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name}={value!r} outside (0, 1]")
        for name in (
            "l_att_km",
            "detector_resolution_s",
            "t_a_s",
            "t_bb_s",
            "swap_window_factor",
            "fiber_speed_m_s",
        ):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.dark_rate_hz < 0.0:
            raise ValueError("dark_rate_hz must be non-negative")
        for name in ("n_bins", "n_bb"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name}={value!r} must be an integer >= 1")
        object.__setattr__(self, "visibility", complex(self.visibility))
        if abs(self.visibility) > 1.0 + TRACE_ATOL:
            raise ValueError("visibility must satisfy |v| <= 1")
        if abs(self.n_bins * self.t_b_s - self.t_a_s) > 1e-12 * self.t_a_s:
            raise ValueError("n_bins * t_b_s must reproduce t_a_s")

    @property
    def t_b_s(self) -> float:
        """Edge SPDC time-bin duration."""
        return self.t_a_s / self.n_bins

    @property
    def p_dark(self) -> float:
        """Dark-count probability within one detection window."""
        return self.dark_rate_hz * self.detector_resolution_s

    @property
    def w_ion(self) -> float:
        """Temporal-mode weight of the ion photon within one window."""
        return self.detector_resolution_s / self.t_a_s

    @property
    def w_edge(self) -> float:
        """Temporal-mode weight of an edge-SPDC photon within one window."""
        return self.n_bins * self.detector_resolution_s / self.t_a_s

    @property
    def w_bb(self) -> float:
        """Temporal-mode weight of a backbone photon within one window."""
        return self.detector_resolution_s / self.t_bb_s

    @property
    def w_swap(self) -> float:
        """Temporal-mode weight of a memory read-out photon at a swap."""
        return self.swap_window_factor * self.w_edge


@dataclass(frozen=True)
class EmissionSettings:
    """Source brightness working point: the three emission probabilities."""

    p_ion: float
    p_spdc_en: float
    p_spdc_bb: float

    def __post_init__(self) -> None:
        for name in ("p_ion", "p_spdc_en", "p_spdc_bb"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ValueError(f"{name}={value!r} outside [0, 1)")
        if not self.perturbative:
            warnings.warn(
                "emission probability above "
                f"{PERTURBATIVE_LIMIT}: element expressions lose accuracy",
                stacklevel=2,
            )

    @property
    def perturbative(self) -> bool:
        """Whether all emission probabilities stay in the perturbative regime."""
        return max(self.p_ion, self.p_spdc_en, self.p_spdc_bb) <= PERTURBATIVE_LIMIT

    # Amplitudes used by the state builders.
    @property
    def alpha1(self) -> float:
        return math.sqrt(self.p_ion)

    @property
    def alpha0(self) -> float:
        return math.sqrt(1.0 - self.p_ion)

    @property
    def beta1(self) -> float:
        return math.sqrt(self.p_spdc_en)

    @property
    def gamma1(self) -> float:
        return math.sqrt(self.p_spdc_bb)


def _single_rail_family(labels: tuple[str, ...]) -> str:
    for family, reference in (("A", FAMILY_A), ("B", FAMILY_B), ("C", FAMILY_C)):
        if set(labels) == set(reference):
            return family
    raise ValueError(f"unknown element family {labels!r}")


@dataclass(frozen=True)
class SingleRailState:
    """Heralded single-rail state in element form.

    ``elements`` maps one of the three label families (A, B, or C) to
    non-negative weights; ``theta_tan2`` is tan^2 of the mixing angle of the
    heralded ion/memory superposition (zero for the B family, which has no
    ion).  The weighted trace accounts for the degeneracies of the grouped
    elements: the backbone two-photon block carries weight ``6 * B2`` and the
    two-photon swap block ``C2' * (1 + sin^2 theta)``.
    """

    elements: dict[str, float]
    theta_tan2: float = 0.0
    normalized: bool = False

    def __post_init__(self) -> None:
        family = _single_rail_family(tuple(self.elements))
        reference = {"A": FAMILY_A, "B": FAMILY_B, "C": FAMILY_C}[family]
        clamped = _clamp_weights(self.elements)
        object.__setattr__(self, "elements", {k: clamped[k] for k in reference})
        if self.theta_tan2 < 0.0:
            raise ValueError("theta_tan2 must be non-negative")
        if self.normalized and abs(self.trace() - 1.0) > 10 * TRACE_ATOL:
            raise ValueError("state flagged normalized but trace differs from 1")

    @property
    def family(self) -> str:
        """Element family letter: ``"A"``, ``"B"``, or ``"C"``."""
        return _single_rail_family(tuple(self.elements))

    @property
    def sin2_theta(self) -> float:
        return self.theta_tan2 / (1.0 + self.theta_tan2)

    @property
    def cos2_theta(self) -> float:
        return 1.0 / (1.0 + self.theta_tan2)

    def trace(self) -> float:
        """Multiplicity-weighted sum of the element weights."""
        e = self.elements
        family = self.family
        if family == "A":
            return e["A0"] + e["A1"] + e["A1'"] + e["A2"]
        if family == "B":
            return e["B0"] + e["B1"] + e["B1'"] + 6.0 * e["B2"]
        return (
            e["C0"]
            + e["C1"]
            + e["C1'"]
            + e["C1''"]
            + e["C2"]
            + e["C2'"] * (1.0 + self.sin2_theta)
            + e["C3"]
        )


@dataclass(frozen=True)
class DualRailState:
    """Double-click edge state, before or after backbone rail extension.

    Exactly one of the two dictionaries is active: ``en_elements`` carries
    the weights of the freshly heralded ion/two-rail state, while
    ``extended_elements`` describes the state after both rails were extended
    by backbone links (18 diagonals ``Cklm`` plus the four signed coherences
    ``c``, ``c2``, ``c2'``, ``c3``).
    """

    en_elements: dict[str, float] | None = None
    extended_elements: dict[str, float] | None = None
    normalized: bool = False

    def __post_init__(self) -> None:
        if (self.en_elements is None) == (self.extended_elements is None):
            raise ValueError("exactly one of en_elements/extended_elements required")
        if self.en_elements is not None:
            if set(self.en_elements) != set(DUAL_EN_LABELS):
                raise ValueError(f"edge labels must be {DUAL_EN_LABELS}")
            clamped = _clamp_weights(self.en_elements)
            object.__setattr__(
                self, "en_elements", {k: clamped[k] for k in DUAL_EN_LABELS}
            )
        else:
            expected = set(DUAL_EXT_DIAGONALS) | set(DUAL_EXT_COHERENCES)
            if set(self.extended_elements) != expected:
                missing = expected - set(self.extended_elements)
                surplus = set(self.extended_elements) - expected
                raise ValueError(
                    f"bad extended labels (missing {sorted(missing)}, surplus {sorted(surplus)})"
                )
            clamped = _clamp_weights(
                self.extended_elements, skip=tuple(DUAL_EXT_COHERENCES)
            )
            ordered = {k: clamped[k] for k in DUAL_EXT_DIAGONALS}
            ordered.update({k: clamped[k] for k in DUAL_EXT_COHERENCES})
            object.__setattr__(self, "extended_elements", ordered)
            for name, (left, right) in DUAL_EXT_COHERENCES.items():
                bound = math.sqrt(ordered[left] * ordered[right])
                if abs(ordered[name]) > bound + COHERENCE_ATOL * max(1.0, bound):
                    raise ValueError(
                        f"coherence {name} exceeds the geometric-mean bound"
                    )
        if self.normalized and abs(self.trace() - 1.0) > 10 * TRACE_ATOL:
            raise ValueError("state flagged normalized but trace differs from 1")

    def trace(self) -> float:
        if self.en_elements is not None:
            e = self.en_elements
            return e["a"] + e["A0"] + e["A0'"] + 2.0 * (e["A1"] + e["A1'"] + e["A2"])
        return sum(self.extended_elements[k] for k in DUAL_EXT_DIAGONALS)


@dataclass(frozen=True)
class BipartiteIonState:
    """Final two-ion state: computational diagonals and coherence ``alpha``.

    ``alpha`` is the (signed, possibly complex once a visibility factor is
    attached) coherence between ``|0,1>`` and ``|1,0>``.
    """

    alpha: complex
    d00: float
    d01: float
    d10: float
    d11: float
    normalized: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", complex(self.alpha))
        for name in ("d00", "d01", "d10", "d11"):
            value = getattr(self, name)
            if value < 0.0:
                if value < -NEGATIVE_WEIGHT_RTOL * max(self.trace(), 1e-300):
                    raise ValueError(f"negative diagonal {name}={value!r}")
                object.__setattr__(self, name, 0.0)
        bound = math.sqrt(self.d01 * self.d10)
        if abs(self.alpha) > bound + 1e-12 * max(1.0, bound):
            raise ValueError("coherence alpha exceeds sqrt(d01 * d10)")
        if self.normalized and abs(self.trace() - 1.0) > 10 * TRACE_ATOL:
            raise ValueError("state flagged normalized but trace differs from 1")

    def trace(self) -> float:
        return self.d00 + self.d01 + self.d10 + self.d11


ElementState = SingleRailState | DualRailState | BipartiteIonState


def normalize(state: ElementState) -> tuple[ElementState, float]:
    """Divide a state by its multiplicity-weighted trace.

    Returns the normalized state together with the trace, which callers use
    as the (relative) heralding probability.  Raises :class:`NullStateError`
    for an all-zero input.  Idempotent: normalizing twice returns the same
    state with trace 1.
    """
    trace = state.trace()
    if trace <= 0.0:
        raise NullStateError("null state")
    if isinstance(state, SingleRailState):
        scaled = {k: v / trace for k, v in state.elements.items()}
        return replace(state, elements=scaled, normalized=True), trace
    if isinstance(state, DualRailState):
        if state.en_elements is not None:
            scaled = {k: v / trace for k, v in state.en_elements.items()}
            return replace(state, en_elements=scaled, normalized=True), trace
        scaled = {k: v / trace for k, v in state.extended_elements.items()}
        return replace(state, extended_elements=scaled, normalized=True), trace
    if isinstance(state, BipartiteIonState):
        return (
            BipartiteIonState(
                alpha=state.alpha / trace,
                d00=state.d00 / trace,
                d01=state.d01 / trace,
                d10=state.d10 / trace,
                d11=state.d11 / trace,
                normalized=True,
            ),
            trace,
        )
    raise TypeError(f"cannot normalize {type(state).__name__}")


def _unit_trace(diags: list[float]) -> list[float]:
    # each diagonal was divided by their exact sum, so only float rounding
    # can move the trace off 1; absorb the residual into whichever entry
    # restores an exact unit sum, in BipartiteIonState.trace order
    def total(d: list[float]) -> float:
        return ((d[0] + d[1]) + d[2]) + d[3]

    for _ in range(4):
        residual = total(diags) - 1.0
        if residual == 0.0:
            return diags
        for i in sorted(range(4), key=lambda k: -diags[k]):
            trial = diags.copy()
            trial[i] -= residual
            if total(trial) == 1.0 and trial[i] >= 0.0:
                return trial
        diags[diags.index(max(diags))] -= residual
    return diags


def bell_fidelity(state: BipartiteIonState) -> float:
    """Overlap of a normalized two-ion state with the target Bell state.

    The fidelity is ``(d01 + d10) / 2 + Re(alpha)``.
    """
    if not state.normalized:
        raise ValueError("bell_fidelity requires a normalized state")
    value = (state.d01 + state.d10) / 2.0 + state.alpha.real
    return float(min(max(value, 0.0), 1.0))

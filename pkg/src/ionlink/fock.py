"""Truncated Fock-space engine behind the element-form expressions.

Dense density operators over a small register of photon-number-capped modes;
ion qubits ride along as cap-1 modes.  The engine provides the initial
states, beamsplitter/loss optics and the finite-resolution click model, and
is the single authority for converting between element-form states and full
operators.  Everything is exact within the per-mode photon-number caps, so
it doubles as the brute-force reference for the perturbative closed forms.

Temporal structure is handled through scalar window weights: photon
envelopes are flat over their support, so restricting a detection branch to
one click window multiplies an n-photon component of a detector-bound mode
by ``w^(n/2)`` in amplitude (``window_filter``).  Out-of-window photons
would click at their own arrival time and veto the herald, which is why the
filter drops them instead of keeping a second branch.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import (
    DUAL_EN_LABELS,
    BipartiteIonState,
    DualRailState,
    SingleRailState,
)

logger = logging.getLogger(__name__)

#: Largest tolerated relative deviation from Hermiticity.
HERMITICITY_RTOL = 1e-8

#: Element extraction fails when this fraction of the trace lies outside the schema.
SCHEMA_RESIDUAL_RTOL = 1e-6

#: Occupations with less relative diagonal weight count as unpopulated.
POPULATION_RTOL = 1e-25

#: Below this sin^2(theta) the mixing-angle basis is treated as degenerate.
SIN2_FLOOR = 1e-30


class SchemaIncompleteError(RuntimeError):
    """Raised when an operator carries weight outside the requested element basis."""


@dataclass(frozen=True)
class ModeRegister:
    """Ordered set of labeled modes with per-mode photon caps.

    ``bin_count`` records the temporal discretization of the underlying
    sources (flat amplitude per bin); it is bookkeeping for the scenario
    builders and does not enlarge the Hilbert space.
    """

    modes: tuple[tuple[str, int], ...]
    bin_count: int = 1

    def __post_init__(self) -> None:
        labels = [label for label, _ in self.modes]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate mode labels in {labels}")
        if any(cap < 1 for _, cap in self.modes):
            raise ValueError("photon caps must be >= 1")
        if self.bin_count < 1:
            raise ValueError("bin_count must be >= 1")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.modes)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(cap + 1 for _, cap in self.modes)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    def position(self, label: str) -> int:
        for i, (name, _) in enumerate(self.modes):
            if name == label:
                return i
        raise KeyError(f"unknown mode {label!r}")

    def cap(self, label: str) -> int:
        return self.modes[self.position(label)][1]

    def index(self, occupation: tuple[int, ...]) -> int:
        """Flat basis index of an occupation tuple (register order)."""
        if len(occupation) != len(self.modes):
            raise ValueError("occupation length mismatch")
        return int(np.ravel_multi_index(occupation, self.dims))

    def with_cap(self, label: str, cap: int) -> "ModeRegister":
        modes = tuple(
            (name, cap if name == label else c) for name, c in self.modes
        )
        return ModeRegister(modes, self.bin_count)

    def without(self, labels: tuple[str, ...]) -> "ModeRegister":
        keep = tuple(m for m in self.modes if m[0] not in labels)
        return ModeRegister(keep, self.bin_count)


class FockOperator:
    """Dense Hermitian operator over a :class:`ModeRegister`.

    Treated as immutable; operations return new instances.  The
    ``coefficients`` iterator exposes the sparse (bra, ket) table view.
    """

    __slots__ = ("register", "data")

    def __init__(self, register: ModeRegister, data: np.ndarray):
        data = np.asarray(data, dtype=np.complex128)
        if data.shape != (register.dim, register.dim):
            raise ValueError(
                f"data shape {data.shape} does not match register dim {register.dim}"
            )
        scale = max(float(np.max(np.abs(data))), 1e-300)
        asym = float(np.max(np.abs(data - data.conj().T)))
        if asym > HERMITICITY_RTOL * scale:
            raise ValueError(f"operator not Hermitian (asymmetry {asym:.3e})")
        data = (data + data.conj().T) / 2.0
        data.flags.writeable = False
        self.register = register
        self.data = data

    def trace(self) -> float:
        return float(np.trace(self.data).real)

    def diagonal(self, occupation: tuple[int, ...]) -> float:
        i = self.register.index(occupation)
        return float(self.data[i, i].real)

    def entry(self, bra: tuple[int, ...], ket: tuple[int, ...]) -> complex:
        """Matrix element <bra| rho |ket>."""
        return complex(self.data[self.register.index(bra), self.register.index(ket)])

    def coefficients(self, tol: float = 0.0):
        """Iterate non-zero ((bra occupation, ket occupation), value) items."""
        dims = self.register.dims
        rows, cols = np.nonzero(np.abs(self.data) > tol)
        for r, c in zip(rows, cols):
            bra = tuple(int(x) for x in np.unravel_index(r, dims))
            ket = tuple(int(x) for x in np.unravel_index(c, dims))
            yield (bra, ket), complex(self.data[r, c])

    def occupations(self) -> np.ndarray:
        """(dim, n_modes) table of occupation numbers per basis index."""
        return _occupation_table(self.register.dims)


@lru_cache(maxsize=None)
def _occupation_table(dims: tuple[int, ...]) -> np.ndarray:
    grids = np.indices(dims).reshape(len(dims), -1).T
    grids.flags.writeable = False
    return grids


def vacuum_state(register: ModeRegister) -> FockOperator:
    data = np.zeros((register.dim, register.dim), dtype=np.complex128)
    data[0, 0] = 1.0
    return FockOperator(register, data)


def pure_state(register: ModeRegister, amplitudes: dict[tuple[int, ...], complex]) -> FockOperator:
    """Density operator |psi><psi| from occupation amplitudes."""
    ket = np.zeros(register.dim, dtype=np.complex128)
    for occupation, amp in amplitudes.items():
        ket[register.index(occupation)] = amp
    return FockOperator(register, np.outer(ket, ket.conj()))


def tensor(left: FockOperator, right: FockOperator) -> FockOperator:
    register = ModeRegister(
        left.register.modes + right.register.modes,
        max(left.register.bin_count, right.register.bin_count),
    )
    return FockOperator(register, np.kron(left.data, right.data))


def _conjugate(
    state: FockOperator,
    labels: tuple[str, ...],
    operators: tuple[np.ndarray, ...],
    new_dims: tuple[int, ...] | None = None,
) -> FockOperator:
    """Apply ``rho -> sum_k M_k rho M_k^dag`` on the combined index of ``labels``.

    The matrices act on the row-major occupation index taken in the order of
    ``labels``; ``new_dims`` gives the per-mode output dimensions when a
    matrix changes them (cap expansion).
    """
    register = state.register
    dims = register.dims
    n = len(dims)
    sel = [register.position(lb) for lb in labels]
    rest = [i for i in range(n) if i not in sel]
    perm = sel + rest + [n + i for i in sel] + [n + i for i in rest]
    tensor_form = state.data.reshape(dims + dims).transpose(perm)
    d_sel = math.prod(dims[i] for i in sel)
    d_rest = math.prod([dims[i] for i in rest]) if rest else 1
    block = tensor_form.reshape(d_sel, d_rest, d_sel, d_rest)

    out = None
    for op in operators:
        term = np.einsum("xa,arbs,yb->xrys", op, block, op.conj(), optimize=True)
        out = term if out is None else out + term

    out_dims_sel = new_dims if new_dims is not None else tuple(dims[i] for i in sel)
    full_out_dims = list(out_dims_sel) + [dims[i] for i in rest]
    out = out.reshape(tuple(full_out_dims) + tuple(full_out_dims))
    inverse = np.argsort(perm)
    out = out.transpose(tuple(inverse))

    if new_dims is None:
        new_register = register
    else:
        modes = list(register.modes)
        for lb, d_new in zip(labels, new_dims):
            modes[register.position(lb)] = (lb, d_new - 1)
        new_register = ModeRegister(tuple(modes), register.bin_count)
    final_dims = new_register.dims
    return FockOperator(new_register, out.reshape(new_register.dim, new_register.dim))


@lru_cache(maxsize=None)
def _loss_kraus(dim: int, eta: float) -> tuple[np.ndarray, ...]:
    ops = []
    for k in range(dim):
        mat = np.zeros((dim, dim))
        for n_ph in range(k, dim):
            mat[n_ph - k, n_ph] = math.sqrt(
                math.comb(n_ph, k) * eta ** (n_ph - k) * (1.0 - eta) ** k
            )
        ops.append(mat)
    return tuple(ops)


def attenuate(state: FockOperator, label: str, eta: float) -> FockOperator:
    """Photon loss channel with transmission ``eta`` on one mode."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("transmission must lie in [0, 1]")
    if eta == 1.0:
        return state
    dim = state.register.cap(label) + 1
    return _conjugate(state, (label,), _loss_kraus(dim, eta))


@lru_cache(maxsize=None)
def _correlated_loss_kraus(dim_b: int, dim_c: int, eta: float) -> tuple[np.ndarray, ...]:
    ops = []
    for k in range(dim_b):
        mat = np.zeros((dim_b * dim_c, dim_b * dim_c))
        for nb in range(k, dim_b):
            for nc in range(k, dim_c):
                amp = math.sqrt(
                    math.comb(nb, k) * eta ** (nb - k) * (1.0 - eta) ** k
                )
                mat[(nb - k) * dim_c + (nc - k), nb * dim_c + nc] = amp
        ops.append(mat)
    return tuple(ops)


def correlated_attenuate(
    state: FockOperator, herald_label: str, twin_label: str, eta: float
) -> FockOperator:
    """Herald loss that drags the lost photons' twins out of the tracked mode.

    For multimode pair sources the twin of an undetected herald occupies a
    temporal mode orthogonal to the click-selected one, so it never shows up
    again: each herald photon lost to ``1 - eta`` removes one photon from
    ``twin_label`` as well (into an implicitly traced bath).  Trace-preserving
    on the pair-correlated components the sources emit.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError("transmission must lie in [0, 1]")
    if eta == 1.0:
        return state
    dim_b = state.register.cap(herald_label) + 1
    dim_c = state.register.cap(twin_label) + 1
    ops = _correlated_loss_kraus(dim_b, dim_c, eta)
    return _conjugate(state, (herald_label, twin_label), ops)


def window_filter(state: FockOperator, label: str, weight: float) -> FockOperator:
    """Restrict a detector-bound mode to the click window.

    An n-photon component keeps weight ``weight**n``; the discarded part
    corresponds to photons that would click outside the window and veto the
    herald, so no complementary branch is kept.
    """
    if not 0.0 <= weight <= 1.0:
        raise ValueError("window weight must lie in [0, 1]")
    dim = state.register.cap(label) + 1
    mat = np.diag([weight ** (n_ph / 2.0) for n_ph in range(dim)])
    return _conjugate(state, (label,), (mat,))


def expand_cap(state: FockOperator, label: str, cap: int) -> FockOperator:
    """Embed the state into a register with a larger cap on one mode."""
    old_dim = state.register.cap(label) + 1
    new_dim = cap + 1
    if new_dim < old_dim:
        raise ValueError("cannot shrink a mode cap")
    if new_dim == old_dim:
        return state
    embed = np.zeros((new_dim, old_dim))
    embed[:old_dim, :old_dim] = np.eye(old_dim)
    return _conjugate(state, (label,), (embed,), new_dims=(new_dim,))


def project(state: FockOperator, label: str, occupation: int) -> FockOperator:
    """Project one mode onto a definite photon number (no renormalization)."""
    dim = state.register.cap(label) + 1
    if not 0 <= occupation < dim:
        raise ValueError(f"occupation {occupation} beyond cap of {label!r}")
    mat = np.zeros((dim, dim))
    mat[occupation, occupation] = 1.0
    return _conjugate(state, (label,), (mat,))


def project_total(state: FockOperator, labels: tuple[str, ...], n_max: int) -> FockOperator:
    """Drop components with more than ``n_max`` photons across ``labels``."""
    register = state.register
    occ = _occupation_table(register.dims)
    cols = [register.position(lb) for lb in labels]
    keep = occ[:, cols].sum(axis=1) <= n_max
    data = state.data * keep[:, None] * keep[None, :]
    return FockOperator(register, data)


def partial_trace(state: FockOperator, labels: tuple[str, ...]) -> FockOperator:
    """Trace out the listed modes (empty list returns the state unchanged)."""
    if not labels:
        return state
    register = state.register
    dims = register.dims
    n = len(dims)
    tensor_form = state.data.reshape(dims + dims)
    # trace one mode at a time, highest position first so indices stay valid
    positions = sorted((register.position(lb) for lb in labels), reverse=True)
    remaining = n
    for pos in positions:
        tensor_form = np.trace(tensor_form, axis1=pos, axis2=remaining + pos)
        remaining -= 1
    new_register = register.without(tuple(labels))
    return FockOperator(new_register, tensor_form.reshape(new_register.dim, new_register.dim))


@lru_cache(maxsize=None)
def _bs_matrix(dim_a: int, dim_b: int, angle: float) -> np.ndarray:
    """Photon-number-preserving beamsplitter on the combined (a, b) index.

    Convention: a -> cos(angle) d+ + sin(angle) d-, b -> sin(angle) d+ -
    cos(angle) d-; after application the first mode holds d+ and the second
    d-.  Sectors that do not fit both caps are left as zero columns (the
    caller rejects states populating them).
    """
    c, s = math.cos(angle), math.sin(angle)
    mat = np.zeros((dim_a * dim_b, dim_a * dim_b))
    n_ok = min(dim_a, dim_b) - 1
    for k in range(dim_a):
        for l in range(dim_b):
            n_tot = k + l
            if n_tot > n_ok:
                continue
            norm_in = math.sqrt(math.factorial(k) * math.factorial(l))
            for j in range(n_tot + 1):
                amp = 0.0
                for p in range(max(0, j - l), min(k, j) + 1):
                    q = j - p
                    amp += (
                        math.comb(k, p) * c**p * s ** (k - p)
                        * math.comb(l, q) * s**q * (-c) ** (l - q)
                    )
                amp *= math.sqrt(math.factorial(j) * math.factorial(n_tot - j)) / norm_in
                mat[j * dim_b + (n_tot - j), k * dim_b + l] = amp
    return mat


def _bs_overflow_check(state: FockOperator, label_a: str, label_b: str) -> None:
    register = state.register
    occ = _occupation_table(register.dims)
    pa, pb = register.position(label_a), register.position(label_b)
    totals = occ[:, pa] + occ[:, pb]
    diag = np.abs(np.diagonal(state.data))
    populated = diag > POPULATION_RTOL * max(state.trace(), 1e-300)
    n_ok = min(register.cap(label_a), register.cap(label_b))
    if np.any(populated & (totals > n_ok)):
        worst = int(totals[populated].max())
        raise ValueError(
            f"photon-number overflow: sector {worst} exceeds caps of "
            f"({label_a!r}, {label_b!r}); expand caps to at least {worst}"
        )


def beamsplitter(
    state: FockOperator, label_a: str, label_b: str, angle: float = math.pi / 4
) -> FockOperator:
    """Lossless beamsplitter; afterwards ``label_a`` holds d+ and ``label_b`` d-."""
    _bs_overflow_check(state, label_a, label_b)
    dim_a = state.register.cap(label_a) + 1
    dim_b = state.register.cap(label_b) + 1
    return _conjugate(state, (label_a, label_b), (_bs_matrix(dim_a, dim_b, angle),))


def apply_bs_with_loss(
    state: FockOperator,
    mode_a: str,
    mode_b: str,
    eta_a: float = 1.0,
    eta_b: float = 1.0,
    eta_plus: float = 1.0,
    eta_minus: float = 1.0,
    angle: float = math.pi / 4,
) -> FockOperator:
    """Beamsplitter with input/output losses already traced out.

    Loss channels are applied as Kraus maps, which is identical to mixing in
    explicit loss modes and tracing them; for ``eta_plus == eta_minus`` the
    two output channels commute with the splitter and could equally be
    merged into the inputs.
    """
    out = attenuate(state, mode_a, eta_a)
    out = attenuate(out, mode_b, eta_b)
    out = beamsplitter(out, mode_a, mode_b, angle)
    out = attenuate(out, mode_a, eta_plus)
    out = attenuate(out, mode_b, eta_minus)
    return out


def herald_click(
    state: FockOperator,
    detector_mode: str,
    window_weight: float = 1.0,
    p_dark: float = 0.0,
    other_detectors: tuple[str, ...] = (),
) -> tuple[float, FockOperator]:
    """Single-click herald at one detector, dark counts included.

    The click branch keeps exactly one photon in ``detector_mode`` (the
    detector resolves photon numbers within a window, so two surviving
    photons would read as a double click) and vacuum in ``other_detectors``,
    scaled by ``window_weight``; the dark branch adds ``p_dark`` times the
    all-detectors-vacuum projection.  Detector modes are traced out.
    Returns the branch trace (click probability) and the non-normalized
    heralded state.
    """
    if p_dark < 0.0:
        raise ValueError("p_dark must be non-negative")
    detectors = (detector_mode, *other_detectors)
    clicked = project(state, detector_mode, 1)
    for other in other_detectors:
        clicked = project(clicked, other, 0)
    clicked = partial_trace(clicked, detectors)
    data = window_weight * clicked.data
    if p_dark > 0.0:
        dark = state
        for det in detectors:
            dark = project(dark, det, 0)
        dark = partial_trace(dark, detectors)
        data = data + p_dark * dark.data
    heralded = FockOperator(clicked.register, data)
    return heralded.trace(), heralded


def build_spdc_state(p_pair: float, correlated: bool, register: ModeRegister) -> FockOperator:
    """Two-mode pair source: vacuum, one- and two-pair amplitudes.

    The register must hold exactly the (herald, memory) mode pair.  The
    two-pair amplitude is ``p_pair`` for a correlated (single-Schmidt-mode)
    source and ``p_pair / sqrt(2)`` for the uncorrelated multimode case,
    and the vacuum amplitude absorbs the remainder so the truncated state
    has norm 1.
    """
    if not 0.0 <= p_pair < 1.0:
        raise ValueError("p_pair must lie in [0, 1)")
    if len(register.modes) != 2:
        raise ValueError("pair-source register needs exactly two modes")
    label_b, label_c = register.labels
    if p_pair == 0.0:
        return vacuum_state(register)
    if register.cap(label_b) < 2 or register.cap(label_c) < 2:
        raise ValueError("two-pair component needs photon caps >= 2")
    amp_one = math.sqrt(p_pair)
    amp_two = p_pair if correlated else p_pair / math.sqrt(2.0)
    weight_rest = 1.0 - amp_one**2 - amp_two**2
    if weight_rest < 0.0:
        raise ValueError("pair emission probability too large to normalize")
    return pure_state(
        register,
        {
            (0, 0): math.sqrt(weight_rest),
            (1, 1): amp_one,
            (2, 2): amp_two,
        },
    )


def build_ion_state(kind: str, p_emit: float, register: ModeRegister) -> FockOperator:
    """Ion emission state: qubit plus one or two photon rails.

    ``single_rail`` gives ``alpha0 |0>|vac> + alpha1 |1>|1>`` on an (ion,
    photon) register.  ``dual_rail`` emits one photon split evenly over the
    two rails, ``(|0>|1_0> + |1>|1_1>)/sqrt(2)`` on an (ion, rail0, rail1)
    register; ``p_emit`` is ignored there since the emission is always a
    full photon.
    """
    if kind == "single_rail":
        if len(register.modes) != 2:
            raise ValueError("single_rail register needs (ion, photon) modes")
        if not 0.0 <= p_emit <= 1.0:
            raise ValueError("p_emit must lie in [0, 1]")
        return pure_state(
            register,
            {
                (0, 0): math.sqrt(1.0 - p_emit),
                (1, 1): math.sqrt(p_emit),
            },
        )
    if kind == "dual_rail":
        if len(register.modes) != 3:
            raise ValueError("dual_rail register needs (ion, rail0, rail1) modes")
        amp = 1.0 / math.sqrt(2.0)
        return pure_state(register, {(0, 1, 0): amp, (1, 0, 1): amp})
    raise ValueError(f"unknown ion state kind {kind!r}")


# ---------------------------------------------------------------------------
# Element-form expansion and extraction.  The engine is the authority for
# what each element label means as an operator block.

def _theta_parts(theta_tan2: float) -> tuple[float, float]:
    sin2 = theta_tan2 / (1.0 + theta_tan2)
    return sin2, 1.0 - sin2


def operator_from_elements(
    state: SingleRailState | DualRailState | BipartiteIonState,
    sign: int = +1,
    register: ModeRegister | None = None,
) -> FockOperator:
    """Expand an element-form state into the full operator it stands for.

    ``sign`` is the heralded detector sign carried by the coherent blocks.
    Default registers: (ion cap 1, mem cap 2) for the A/C families,
    (mem_l cap 2, mem_r cap 2) for B, (ion, rail0, rail1) all cap 1 for the
    dual-rail edge state, and (ion_l, ion_r) cap 1 for the two-ion state.
    """
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    if isinstance(state, SingleRailState):
        return _expand_single_rail(state, sign, register)
    if isinstance(state, DualRailState):
        if state.en_elements is None:
            raise ValueError("only edge-form dual-rail states can be expanded")
        return _expand_dual_rail(state, sign, register)
    if isinstance(state, BipartiteIonState):
        if register is None:
            register = ModeRegister((("ion_l", 1), ("ion_r", 1)))
        dim = register.dim
        data = np.zeros((dim, dim), dtype=np.complex128)
        for (k, l), value in (
            ((0, 0), state.d00),
            ((0, 1), state.d01),
            ((1, 0), state.d10),
            ((1, 1), state.d11),
        ):
            i = register.index((k, l))
            data[i, i] = value
        i01, i10 = register.index((0, 1)), register.index((1, 0))
        data[i01, i10] = sign * state.alpha
        data[i10, i01] = np.conj(sign * state.alpha)
        return FockOperator(register, data)
    raise TypeError(f"cannot expand {type(state).__name__}")


def _expand_single_rail(
    state: SingleRailState, sign: int, register: ModeRegister | None
) -> FockOperator:
    family = state.family
    e = state.elements
    sin2, cos2 = _theta_parts(state.theta_tan2)
    sin_t, cos_t = math.sqrt(sin2), math.sqrt(cos2)
    if family == "B":
        if register is None:
            register = ModeRegister((("mem_l", 2), ("mem_r", 2)))
        dim = register.dim
        data = np.zeros((dim, dim), dtype=np.complex128)

        def add_ket(amplitudes: dict[tuple[int, int], float], weight: float) -> None:
            nonlocal data
            ket = np.zeros(dim, dtype=np.complex128)
            for occ, amp in amplitudes.items():
                ket[register.index(occ)] = amp
            data = data + weight * np.outer(ket, ket.conj())

        inv = 1.0 / math.sqrt(2.0)
        add_ket({(0, 0): 1.0}, e["B0"])
        add_ket({(0, 1): inv, (1, 0): sign * inv}, e["B1"])
        add_ket({(0, 1): inv, (1, 0): -sign * inv}, e["B1'"])
        root2 = math.sqrt(2.0)
        add_ket({(1, 1): 1.0, (2, 0): sign * root2}, e["B2"])
        add_ket({(1, 1): 1.0, (0, 2): sign * root2}, e["B2"])
        return FockOperator(register, data)

    if register is None:
        register = ModeRegister((("ion", 1), ("mem", 2)))
    dim = register.dim
    data = np.zeros((dim, dim), dtype=np.complex128)

    def add(amplitudes: dict[tuple[int, int], float], weight: float) -> None:
        nonlocal data
        ket = np.zeros(dim, dtype=np.complex128)
        for occ, amp in amplitudes.items():
            ket[register.index(occ)] = amp
        data = data + weight * np.outer(ket, ket.conj())

    if family == "A":
        add({(0, 0): 1.0}, e["A0"])
        add({(1, 0): cos_t, (0, 1): sign * sin_t}, e["A1"])
        add({(1, 0): 1.0}, e["A1'"])
        add({(1, 1): 1.0}, e["A2"])
        return FockOperator(register, data)

    # C family: state after the first optical swap
    add({(0, 0): 1.0}, e["C0"])
    add({(1, 0): cos_t, (0, 1): sign * sin_t}, e["C1"])
    add({(1, 0): 1.0}, e["C1'"])
    add({(0, 1): 1.0}, e["C1''"])
    add({(1, 1): 1.0}, e["C2"])
    add({(1, 1): cos_t, (0, 2): sign * math.sqrt(2.0) * sin_t}, e["C2'"])
    add({(1, 2): 1.0}, e["C3"])
    return FockOperator(register, data)


def _expand_dual_rail(
    state: DualRailState, sign: int, register: ModeRegister | None
) -> FockOperator:
    if register is None:
        register = ModeRegister((("ion", 1), ("rail0", 1), ("rail1", 1)))
    e = state.en_elements
    dim = register.dim
    data = np.zeros((dim, dim), dtype=np.complex128)

    def add(amplitudes: dict[tuple[int, int, int], float], weight: float) -> None:
        nonlocal data
        ket = np.zeros(dim, dtype=np.complex128)
        for occ, amp in amplitudes.items():
            ket[register.index(occ)] = amp
        data = data + weight * np.outer(ket, ket.conj())

    inv = 1.0 / math.sqrt(2.0)
    # the ion qubit pairs with the opposite memory rail
    add({(0, 0, 1): inv, (1, 1, 0): sign * inv}, e["a"])
    add({(1, 0, 0): 1.0}, e["A0"])
    add({(0, 0, 0): 1.0}, e["A0'"])
    add({(1, 1, 0): 1.0}, e["A1"])
    add({(0, 0, 1): 1.0}, e["A1"])
    add({(0, 1, 0): 1.0}, e["A1'"])
    add({(1, 0, 1): 1.0}, e["A1'"])
    add({(0, 1, 1): 1.0}, e["A2"])
    add({(1, 1, 1): 1.0}, e["A2"])
    return FockOperator(register, data)


_FAMILY_SCHEMAS = {
    frozenset(("A0", "A1", "A1'", "A2")): "A",
    frozenset(("B0", "B1", "B1'", "B2")): "B",
    frozenset(("C0", "C1", "C1'", "C1''", "C2", "C2'", "C3")): "C",
    frozenset(DUAL_EN_LABELS): "dual_en",
    frozenset(("alpha", "d00", "d01", "d10", "d11")): "bipartite",
}


def _schema_name(schema) -> str:
    if isinstance(schema, str):
        name = schema if schema in _FAMILY_SCHEMAS.values() else None
        if name is None:
            raise ValueError(f"unknown schema {schema!r}")
        return name
    name = _FAMILY_SCHEMAS.get(frozenset(schema))
    if name is None:
        raise ValueError(f"unknown schema {tuple(schema)!r}")
    return name


def elements_from_operator(
    state: FockOperator,
    schema,
    sign: int = +1,
    theta_tan2: float | None = None,
) -> SingleRailState | DualRailState | BipartiteIonState:
    """Project an operator onto an element schema.

    ``schema`` is a family name ("A", "B", "C", "dual_en", "bipartite") or
    the corresponding label set.  The A and C families need the mixing angle
    ``theta_tan2`` of the underlying superposition to split degenerate
    diagonals.  Raises :class:`SchemaIncompleteError` when more than
    ``SCHEMA_RESIDUAL_RTOL`` of the trace lies outside the schema's span.
    """
    name = _schema_name(schema)
    trace = state.trace()
    if trace <= 0.0:
        raise ValueError("cannot extract elements from a null operator")

    if name == "B":
        d00 = state.diagonal((0, 0))
        d01 = state.diagonal((0, 1))
        d10 = state.diagonal((1, 0))
        sym = (d01 + d10) / 2.0
        coh = sign * state.entry((0, 1), (1, 0)).real
        two = (
            state.diagonal((1, 1)) + state.diagonal((2, 0)) + state.diagonal((0, 2))
        )
        captured = d00 + d01 + d10 + two
        _check_residual(trace, captured)
        return SingleRailState(
            {"B0": d00, "B1": sym + coh, "B1'": sym - coh, "B2": two / 6.0}
        )

    if name == "A":
        if theta_tan2 is None:
            raise ValueError("A-family extraction needs theta_tan2")
        sin2, cos2 = _theta_parts(theta_tan2)
        d00 = state.diagonal((0, 0))
        d10 = state.diagonal((1, 0))
        d01 = state.diagonal((0, 1))
        d11 = state.diagonal((1, 1))
        if sin2 > SIN2_FLOOR:
            a1 = d01 / sin2
        else:
            a1 = d10
        a1p = d10 - a1 * cos2
        captured = d00 + d10 + d01 + d11
        _check_residual(trace, captured)
        return SingleRailState(
            {"A0": d00, "A1": a1, "A1'": a1p, "A2": d11}, theta_tan2=theta_tan2
        )

    if name == "C":
        if theta_tan2 is None:
            raise ValueError("C-family extraction needs theta_tan2")
        sin2, cos2 = _theta_parts(theta_tan2)
        sc = math.sqrt(sin2 * cos2)
        d00 = state.diagonal((0, 0))
        d10 = state.diagonal((1, 0))
        d01 = state.diagonal((0, 1))
        d11 = state.diagonal((1, 1))
        d02 = state.diagonal((0, 2))
        d12 = state.diagonal((1, 2))
        if sc > SIN2_FLOOR:
            c1 = sign * state.entry((1, 0), (0, 1)).real / sc
            c2p = sign * state.entry((1, 1), (0, 2)).real / (math.sqrt(2.0) * sc)
        else:
            # degenerate mixing angle: the coherent blocks collapse onto the
            # plain diagonals, so fold them there
            c1, c2p = 0.0, 0.0
        captured = d00 + d10 + d01 + d11 + d02 + d12
        _check_residual(trace, captured)
        return SingleRailState(
            {
                "C0": d00,
                "C1": c1,
                "C1'": d10 - c1 * cos2,
                "C1''": d01 - c1 * sin2,
                "C2": d11 - c2p * cos2,
                "C2'": c2p,
                "C3": d12,
            },
            theta_tan2=theta_tan2,
        )

    if name == "dual_en":
        d = state.diagonal
        coh = sign * state.entry((0, 0, 1), (1, 1, 0)).real
        a = 2.0 * coh
        a1 = (d((1, 1, 0)) + d((0, 0, 1))) / 2.0 - a / 2.0
        a1p = (d((0, 1, 0)) + d((1, 0, 1))) / 2.0
        a2 = (d((0, 1, 1)) + d((1, 1, 1))) / 2.0
        captured = (
            d((0, 0, 0)) + d((1, 0, 0)) + d((1, 1, 0)) + d((0, 0, 1))
            + d((0, 1, 0)) + d((1, 0, 1)) + d((0, 1, 1)) + d((1, 1, 1))
        )
        _check_residual(trace, captured)
        return DualRailState(
            en_elements={
                "a": a,
                "A0": d((1, 0, 0)),
                "A0'": d((0, 0, 0)),
                "A1": a1,
                "A1'": a1p,
                "A2": a2,
            }
        )

    # bipartite
    d00 = state.diagonal((0, 0))
    d01 = state.diagonal((0, 1))
    d10 = state.diagonal((1, 0))
    d11 = state.diagonal((1, 1))
    alpha = sign * state.entry((0, 1), (1, 0))
    _check_residual(trace, d00 + d01 + d10 + d11)
    return BipartiteIonState(alpha=alpha, d00=d00, d01=d01, d10=d10, d11=d11)


def _check_residual(trace: float, captured: float) -> None:
    residual = trace - captured
    if residual > SCHEMA_RESIDUAL_RTOL * trace:
        raise SchemaIncompleteError(
            f"schema incomplete: residual weight {residual:.3e} "
            f"({residual / trace:.3e} of trace)"
        )

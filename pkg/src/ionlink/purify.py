"""CNOT purification of two stored ion pairs.

Each node applies a CNOT from its first ion onto its second, reads out the
second pair and keeps the first only when both readouts flip.  Populations
with the same parity in both links pass the herald only through their
crossed products, so the vacuum admixture that dominates single-click
links is suppressed quadratically, and the surviving coherence picks up
the product of the two link coherences: common phase factors cancel.
"""

from __future__ import annotations

import logging

from .core import BipartiteIonState, NullStateError, _unit_trace

logger = logging.getLogger(__name__)


def purify(
    rho: BipartiteIonState, rho_tilde: BipartiteIonState
) -> tuple[float, BipartiteIonState]:
    """Fuse two heralded ion pairs into one, post-selected on flipped readouts.

    Returns ``(p_herald, state)``: the probability that both readouts flip
    and the normalized surviving pair.  The kept population ``d_kl`` draws
    on the partner's opposite-parity population ``d_(1-k)(1-l)``, and the
    coherence becomes ``alpha * conj(alpha_tilde) / p_herald``.  The two
    links may differ; for identical links the herald probability reduces
    to ``2 * (d01 * d10 + d00 * d11)``.

    Raises :class:`NullStateError` when no weight has opposite parities in
    the two links, i.e. the herald can never fire.
    """
    for role, state in (("first", rho), ("second", rho_tilde)):
        if not state.normalized:
            raise ValueError(f"{role} purification input must be normalized")
    terms = (
        rho.d00 * rho_tilde.d11,
        rho.d01 * rho_tilde.d10,
        rho.d10 * rho_tilde.d01,
        rho.d11 * rho_tilde.d00,
    )
    p_herald = terms[0] + terms[1] + terms[2] + terms[3]
    if p_herald <= 0.0:
        raise NullStateError(
            "unheraldable: no population pair with opposite parities"
        )
    diags = _unit_trace([t / p_herald for t in terms])
    out = BipartiteIonState(
        alpha=rho.alpha * rho_tilde.alpha.conjugate() / p_herald,
        d00=diags[0],
        d01=diags[1],
        d10=diags[2],
        d11=diags[3],
        normalized=True,
    )
    return p_herald, out

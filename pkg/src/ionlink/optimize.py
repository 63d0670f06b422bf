"""Fidelity-constrained minimization of the average link duration.

Each protocol exposes a different set of emission probabilities to
tune: the two-single-click protocol drives the ion and both pair
sources, the double-click protocol only the two pair sources, the
direct single-click reference scans the ion emission on a fixed grid,
and the direct double-click reference has nothing to tune at all.  The
landscape is smooth but the constraint boundary is where the optimum
sits, so the search runs a derivative-free simplex in log space from
several lattice seeds and keeps every point it ever evaluated; the
reported settings are always a point that was actually computed and
meets the fidelity target.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .core import (
    EmissionSettings,
    HardwareParams,
    NullStateError,
    PerturbationBreakdownError,
)
from .pipeline import evaluate

logger = logging.getLogger(__name__)

PROB_MIN = 1e-6
PROB_MAX = 0.2
DIRECT_SC_GRID_MAX = 1e-1
DIRECT_SC_GRID_POINTS = 10000
FEASIBILITY_SLACK = 1e-9
TIE_BREAK_REL = 1e-3

# one millifidelity of deficit costs one decade of duration, so the
# simplex is pulled hard onto the feasible side of the boundary
_PENALTY_DECADES = 1e3
_FAILED_SCORE = 1e9
_LATTICE = (1e-5, 1e-3, 1e-1)

FREE_VARIABLES = {
    "tsc": ("p_ion", "p_spdc_en", "p_spdc_bb"),
    "dc": ("p_spdc_en", "p_spdc_bb"),
    "direct_sc": ("p_ion",),
    "direct_dc": (),
}


class TargetUnreachableError(RuntimeError):
    """No explored working point reaches the requested fidelity."""


@dataclass(frozen=True)
class _Point:
    duration_s: float
    fidelity: float
    storage_s: float | None
    settings: EmissionSettings


def _check_target(f_target: float) -> None:
    if not 0.5 < f_target < 1.0:
        raise ValueError(f"f_target={f_target!r} outside (0.5, 1)")


def _free_names(protocol: str) -> tuple[str, ...]:
    try:
        return FREE_VARIABLES[protocol]
    except KeyError:
        raise ValueError(f"unknown protocol {protocol!r}") from None


def _build_settings(names: tuple[str, ...], values) -> EmissionSettings:
    filled = dict.fromkeys(("p_ion", "p_spdc_en", "p_spdc_bb"), 0.0)
    filled.update(zip(names, (float(v) for v in values)))
    return EmissionSettings(**filled)


@dataclass
class _CellObjective:
    """Penalized log-duration of one sweep cell, remembering every probe."""

    protocol: str
    topology: str
    params: HardwareParams
    l_km: float
    f_target: float
    names: tuple[str, ...]
    points: list[_Point] = field(default_factory=list)
    _cache: dict[tuple[float, ...], float] = field(default_factory=dict)

    def __call__(self, log_values) -> float:
        key = tuple(round(float(v), 12) for v in log_values)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        values = np.clip(10.0 ** np.asarray(log_values, dtype=float), PROB_MIN, PROB_MAX)
        settings = _build_settings(self.names, values)
        try:
            result = evaluate(self.protocol, self.topology, self.params, settings, self.l_km)
        except (NullStateError, PerturbationBreakdownError, ValueError):
            self._cache[key] = _FAILED_SCORE
            return _FAILED_SCORE
        deficit = max(0.0, self.f_target - result.fidelity)
        score = math.log10(result.duration_s) + _PENALTY_DECADES * deficit
        self.points.append(
            _Point(result.duration_s, result.fidelity, result.storage_s, settings)
        )
        self._cache[key] = score
        return score


def _select(
    points: list[_Point], f_target: float, cell: str
) -> tuple[EmissionSettings, float, float, float | None]:
    """Best feasible probe, preferring fidelity among near-ties."""
    threshold = f_target - FEASIBILITY_SLACK
    feasible = [p for p in points if p.fidelity >= threshold]
    if not feasible:
        ceiling = max((p.fidelity for p in points), default=0.0)
        raise TargetUnreachableError(
            f"target unreachable for {cell}: highest fidelity reached "
            f"{ceiling:.6f} < target {f_target}"
        )
    fastest = min(feasible, key=lambda p: p.duration_s)
    window = fastest.duration_s * (1.0 + TIE_BREAK_REL)
    best = max(
        (p for p in feasible if p.duration_s <= window),
        key=lambda p: (p.fidelity, -p.duration_s),
    )
    return best.settings, best.duration_s, best.fidelity, best.storage_s


def _simplex_starts(objective: _CellObjective, n_starts: int) -> list[np.ndarray]:
    """Rank the lattice seeds by penalized score, keep the best few."""
    seeds = [
        np.log10(np.array(combo))
        for combo in itertools.product(_LATTICE, repeat=len(objective.names))
    ]
    scored = sorted(seeds, key=objective)
    return scored[: max(1, n_starts)]


def _optimize_simplex(
    protocol: str,
    topology: str,
    params: HardwareParams,
    l_km: float,
    f_target: float,
    n_starts: int,
    n_workers: int,
) -> tuple[EmissionSettings, float, float, float | None]:
    names = _free_names(protocol)
    objective = _CellObjective(protocol, topology, params, l_km, f_target, names)
    starts = _simplex_starts(objective, n_starts)
    bounds = [(math.log10(PROB_MIN), math.log10(PROB_MAX))] * len(names)
    options = dict(
        xatol=2e-3,
        fatol=1e-5,
        maxfev=60 * len(names) + 40,
        disp=False,
    )

    def run(x0: np.ndarray) -> None:
        minimize(objective, x0, method="Nelder-Mead", bounds=bounds, options=options)

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(run, starts))
    else:
        for x0 in starts:
            run(x0)
    return _select(objective.points, f_target, f"{protocol}/{topology} at {l_km} km")


def _optimize_direct_sc(
    topology: str, params: HardwareParams, l_km: float, f_target: float
) -> tuple[EmissionSettings, float, float, float | None]:
    """Largest ion emission on the fixed grid that still meets the target.

    Success probability grows with the emission while fidelity falls, so
    the fastest feasible point is the first feasible one walking the
    grid downward from the top.
    """
    threshold = f_target - FEASIBILITY_SLACK
    grid = np.geomspace(PROB_MIN, DIRECT_SC_GRID_MAX, DIRECT_SC_GRID_POINTS)
    ceiling = 0.0
    for p_ion in grid[::-1]:
        settings = _build_settings(("p_ion",), (p_ion,))
        result = evaluate("direct_sc", topology, params, settings, l_km)
        ceiling = max(ceiling, result.fidelity)
        if result.fidelity >= threshold:
            return settings, result.duration_s, result.fidelity, result.storage_s
    raise TargetUnreachableError(
        f"target unreachable for direct_sc/{topology} at {l_km} km: highest "
        f"fidelity reached {ceiling:.6f} < target {f_target}"
    )


def _optimize_direct_dc(
    topology: str, params: HardwareParams, l_km: float, f_target: float
) -> tuple[EmissionSettings, float, float, float | None]:
    settings = _build_settings((), ())
    result = evaluate("direct_dc", topology, params, settings, l_km)
    if result.fidelity < f_target - FEASIBILITY_SLACK:
        raise TargetUnreachableError(
            f"target unreachable for direct_dc/{topology} at {l_km} km: highest "
            f"fidelity reached {result.fidelity:.6f} < target {f_target}"
        )
    return settings, result.duration_s, result.fidelity, result.storage_s


def optimize(
    protocol: str,
    topology: str,
    params: HardwareParams,
    l_km: float,
    f_target: float,
    *,
    n_starts: int = 3,
    n_workers: int = 1,
) -> tuple[EmissionSettings, float, float, float | None]:
    """Minimize the average duration subject to a fidelity floor.

    Returns the emission settings together with the duration, achieved
    fidelity and storage duration of the winning point.  Raises
    TargetUnreachableError when nothing explored reaches the target,
    reporting the best fidelity seen.
    """
    _check_target(f_target)
    _free_names(protocol)
    if protocol == "direct_sc":
        return _optimize_direct_sc(topology, params, l_km, f_target)
    if protocol == "direct_dc":
        return _optimize_direct_dc(topology, params, l_km, f_target)
    return _optimize_simplex(
        protocol, topology, params, l_km, f_target, n_starts, n_workers
    )


def grid_search(
    protocol: str,
    topology: str,
    params: HardwareParams,
    l_km: float,
    f_target: float,
    points_per_axis: int = 20,
) -> tuple[EmissionSettings, float, float, float | None]:
    """Dense log-grid reference search over the same variable box.

    Exhaustive and slow; exists as the benchmark the simplex search is
    measured against.
    """
    _check_target(f_target)
    names = _free_names(protocol)
    if not names:
        raise ValueError("direct_dc has nothing to search")
    axis = np.geomspace(PROB_MIN, PROB_MAX, points_per_axis)
    points: list[_Point] = []
    for combo in itertools.product(axis, repeat=len(names)):
        settings = _build_settings(names, combo)
        try:
            result = evaluate(protocol, topology, params, settings, l_km)
        except (NullStateError, PerturbationBreakdownError, ValueError):
            continue
        points.append(
            _Point(result.duration_s, result.fidelity, result.storage_s, settings)
        )
    return _select(points, f_target, f"{protocol}/{topology} at {l_km} km")

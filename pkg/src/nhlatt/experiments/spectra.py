"""
Spectrum-versus-gamma sweeps, exceptional-point taxonomy across chain
lengths and impurity sites, and eigenstate profile dumps.
"""

from typing import Literal, Sequence

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field
from scipy.optimize import linear_sum_assignment

from ..errors import InvalidParameterError, NoMinimumError, NumericalError, UnclassifiableError
from ..lattice import LatticeParams, central_site
from ..solvers.core import Spectrum
from ..solvers.dense import solve_dense
from ..spectral import (
    EpReport,
    axis_count,
    count_nodes,
    detect_pairs,
    greedy_pairs,
    locate_ep,
    order_eigenpairs,
    participation_ratio,
    refine_axis_arrival,
)

EP_CENTER = 2.0
PAIR_TRACKING_WINDOW = 0.05
TAXONOMY_RANGE = (1.0, 4.0)
TAXONOMY_STEP = 0.01
AT_TWO = 5e-3
ABOVE_TWO_TOL = 1e-6

Taxonomy = Literal["all-paired-EP", "extra-EP", "third-order-EP", "no-EP"]


class SpectrumSweep(BaseModel):
    """Eigenvalue branches: branches[i][b] is branch b at gammas[i]."""

    L: int
    q: int
    gammas: list[float]
    branches: list[list[complex]]
    ambiguous: list[bool]

    def branch(self, b: int) -> np.ndarray:
        return np.array([row[b] for row in self.branches])


def _groups(ev: np.ndarray) -> list[list[int]]:
    pairs, singles = greedy_pairs(ev)
    return [list(p) for p in pairs] + [[s] for s in singles]


def _match_by_value(prev: np.ndarray, cur: np.ndarray) -> np.ndarray:
    cost = np.abs(prev[:, None] - cur[None, :])
    _, cols = linear_sum_assignment(cost)
    return cols


def _match_by_pairs(prev: np.ndarray, cur: np.ndarray) -> np.ndarray:
    """Match pair centers first, then members inside each matched pair."""
    g_prev, g_cur = _groups(prev), _groups(cur)
    centers_prev = np.array([prev[g].mean() for g in g_prev])
    centers_cur = np.array([cur[g].mean() for g in g_cur])
    sizes_prev = np.array([len(g) for g in g_prev])
    sizes_cur = np.array([len(g) for g in g_cur])
    cost = np.abs(centers_prev[:, None] - centers_cur[None, :])
    cost = cost + 1e6 * (sizes_prev[:, None] != sizes_cur[None, :])
    rows, cols = linear_sum_assignment(cost)

    assignment = np.empty(prev.size, dtype=int)
    for r, c in zip(rows, cols):
        members_prev, members_cur = g_prev[r], g_cur[c]
        inner = _match_by_value(prev[members_prev], cur[members_cur])
        for a, b in zip(members_prev, inner):
            assignment[a] = members_cur[b]
    return assignment


def spectrum_sweep(
    gammas: Sequence[float],
    L: int,
    q: int,
    ep_center: float = EP_CENTER,
    pair_window: float = PAIR_TRACKING_WINDOW,
) -> SpectrumSweep:
    """
    Ordered spectra along a gamma grid, with eigenvalues linked into
    continuous branches. Close to the coalescence at gamma = 2 the linking
    follows pair identity instead of nearest values.
    """
    gammas = [float(g) for g in gammas]
    rows: list[np.ndarray] = []
    ambiguous: list[bool] = []
    prev = None
    for gamma in gammas:
        spectrum = order_eigenpairs(solve_dense(LatticeParams.absorbing(L, q, gamma)))
        cur = spectrum.eigenvalues
        if prev is None:
            rows.append(cur.copy())
            ambiguous.append(False)
            prev = cur
            continue
        near_ep = abs(gamma - ep_center) < pair_window
        assignment = _match_by_pairs(prev, cur) if near_ep else _match_by_value(prev, cur)
        tracked = cur[assignment]
        moved = np.abs(tracked - prev).max()
        pair_gap = min(abs(cur[i] - cur[j]) for i, j in greedy_pairs(cur)[0]) if L > 1 else np.inf
        ambiguous.append(bool(near_ep or pair_gap < 2 * moved))
        rows.append(tracked)
        prev = tracked
    if any(ambiguous):
        logger.debug(f"{sum(ambiguous)} sweep points with ambiguous branch identity")
    return SpectrumSweep(
        L=L,
        q=q,
        gammas=gammas,
        branches=[[complex(x) for x in row] for row in rows],
        ambiguous=ambiguous,
    )


def axis_transitions(
    L: int,
    q: int,
    lo: float = TAXONOMY_RANGE[0],
    hi: float = TAXONOMY_RANGE[1],
    step: float = TAXONOMY_STEP,
    xtol: float = 1e-11,
) -> list[float]:
    """
    gamma values where eigenvalues arrive on the imaginary axis, bracketed
    on the grid and refined by bisection on the axis count.
    """
    grid = np.round(np.arange(lo, hi + 0.5 * step, step), 12)
    counts = [axis_count(L, q, g) for g in grid]
    transitions = []
    for a, b, ca, cb in zip(grid, grid[1:], counts, counts[1:]):
        if cb <= ca:
            continue
        transitions.append(refine_axis_arrival(L, q, float(a), float(b), xtol=xtol))
    return transitions


class EpClassification(BaseModel):
    L: int
    q: int
    classification: Taxonomy
    gamma_c: list[float] = Field(default_factory=list)
    gamma_1: float | None = None
    reports: list[EpReport] = Field(default_factory=list)
    diagnostics: dict[str, float | int | str] = Field(default_factory=dict)


def _refine(L: int, q: int, gamma: float) -> tuple[float, EpReport]:
    try:
        return locate_ep(L, q, (gamma - 0.01, gamma + 0.01))
    except NoMinimumError:
        report = detect_pairs(solve_dense(LatticeParams.absorbing(L, q, gamma), want_vectors=True))
        return gamma, report


def classify_ep_structure(L: int, q: int | None = None) -> EpClassification:
    """
    Exceptional-point structure of the chain, one of:

    - all-paired-EP: every eigenvalue pairs up at gamma = 2
    - extra-EP: as above plus one more coalescence on the imaginary axis at gamma_1 > 2
    - third-order-EP: an axis coalescence above 2 joined by a third eigenvalue with zero real part
    - no-EP: nothing coalesces; one unpaired eigenvalue stays on the axis
    """
    q = central_site(L) if q is None else q
    diagnostics: dict[str, float | int | str] = {}

    paired_at_two = False
    reports: list[EpReport] = []
    gamma_c: list[float] = []
    if L % 2 == 0:
        try:
            g2, report2 = locate_ep(L, q, (EP_CENTER - 0.1, EP_CENTER + 0.1), objective="all-pairs")
            diagnostics["gamma_all_pairs"] = g2
            diagnostics["max_pair_gap"] = report2.max_gap
            if report2.classification == "all-paired-EP" and abs(g2 - EP_CENTER) < 1e-3:
                paired_at_two = True
                reports.append(report2)
                gamma_c.append(g2)
        except NoMinimumError as e:
            diagnostics["all_pairs_search"] = str(e)

    above = [g for g in axis_transitions(L, q) if g > EP_CENTER + AT_TWO]
    diagnostics["axis_transitions_above_2"] = len(above)
    extra: list[tuple[float, EpReport]] = [_refine(L, q, g) for g in above]

    if paired_at_two and not extra:
        result = EpClassification(L=L, q=q, classification="all-paired-EP", gamma_c=gamma_c, reports=reports)
    elif paired_at_two and len(extra) == 1:
        g1, report1 = extra[0]
        result = EpClassification(
            L=L, q=q, classification="extra-EP", gamma_c=gamma_c + [g1], gamma_1=g1, reports=reports + [report1]
        )
    elif not paired_at_two and len(extra) == 1 and extra[0][1].classification == "third-order-EP":
        g, report = extra[0]
        result = EpClassification(L=L, q=q, classification="third-order-EP", gamma_c=[g], reports=[report])
    elif not paired_at_two and not extra and L % 2 == 1 and axis_count(L, q, TAXONOMY_RANGE[1]) >= 1:
        result = EpClassification(L=L, q=q, classification="no-EP", diagnostics=diagnostics)
    else:
        diagnostics["extra_labels"] = ",".join(r.classification for _, r in extra)
        raise UnclassifiableError(f"EP structure of L={L}, q={q} matches no known class", diagnostics)

    result.diagnostics.update(diagnostics)
    logger.success(f"L={L}, q={q}: {result.classification} {result.gamma_c}")
    return result


def gamma_one_series(L_values: Sequence[int]) -> list[tuple[int, float]]:
    """Location of the extra axis coalescence for chains with L divisible by 4."""
    series = []
    for L in L_values:
        if L % 4:
            raise ValueError(f"extra EP exists only for L divisible by 4, got {L}")
        above = [g for g in axis_transitions(L, central_site(L)) if g > EP_CENTER + AT_TWO]
        if not above:
            raise UnclassifiableError(f"no extra EP found for L={L}")
        series.append((L, above[0]))
    return series


class QScanRow(BaseModel):
    q: int
    gamma_c: float | None
    parity: Literal["odd", "even"]
    above_two: bool | None
    error: str | None = None


def scan_q(
    L: int, q_values: Sequence[int], window: tuple[float, float] = (0.5, 4.0)
) -> list[QScanRow]:
    """
    Coalescence of the two eigenvalues closest to the imaginary axis, per impurity site.

    A site whose search fails keeps its row with gamma_c unset and the error
    message recorded. above_two needs gamma_c past 2 by more than ABOVE_TWO_TOL.
    """
    if L % 4 != 2:
        logger.warning(f"site scan is calibrated for L = 2 mod 4, got L={L}")
    rows = []
    for q in q_values:
        parity = "odd" if q % 2 else "even"
        try:
            gamma_c, report = locate_ep(L, q, window, objective="central-pair")
        except NumericalError as e:
            logger.warning(f"q={q}: no coalescence in {window}: {e}")
            rows.append(QScanRow(q=q, gamma_c=None, parity=parity, above_two=None, error=str(e)))
            continue
        rows.append(
            QScanRow(q=q, gamma_c=gamma_c, parity=parity, above_two=gamma_c > EP_CENTER + ABOVE_TWO_TOL)
        )
        logger.info(f"q={q}: gamma_c={gamma_c:.6f} ({report.classification})")
    return rows


class ProfileRow(BaseModel):
    index: int
    eigenvalue: complex
    participation_ratio: float
    nodes: int
    occupancies: list[float]


def dump_eigenstate_profiles(
    L: int,
    q: int,
    gamma: float,
    indices: Sequence[int] | None = None,
    seed: int = 0,
) -> list[ProfileRow]:
    """Per-site occupancies of eigenstates, numbered by the (Re, Im) order."""
    spectrum: Spectrum = order_eigenpairs(
        solve_dense(LatticeParams.absorbing(L, q, gamma), want_vectors=True, seed=seed)
    )
    chosen = range(L) if indices is None else indices
    rows = []
    for i in chosen:
        if not 0 <= i < L:
            raise InvalidParameterError(f"eigenstate index {i} out of range [0, {L})")
        occ = spectrum.occupancies(i)
        rows.append(
            ProfileRow(
                index=i,
                eigenvalue=complex(spectrum.eigenvalues[i]),
                participation_ratio=participation_ratio(occ),
                nodes=count_nodes(occ),
                occupancies=occ.tolist(),
            )
        )
    return rows

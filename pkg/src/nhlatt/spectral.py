"""
Spectral analysis of the impurity chain: both eigen-backends, eigenvectors
from the transfer recursion, pairing and exceptional-point detection, the
localized state and eigenstate ordering.
"""

from typing import Literal

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field
from scipy.optimize import minimize_scalar

from .errors import LargeResidualError, NoBoundStateError, NoMinimumError
from .lattice import LatticeParams, TridiagOperator, apply, build_hamiltonian
from .solvers.core import BackendName, Spectrum, get_backend
from .solvers.dense import solve_dense
from .solvers.roots import solve_charpoly
from .utils import overlap_defect

EP_GAP = 1e-5
EP_OVERLAP = 1e-3
AXIS_TOL = 1e-6
TRANSFER_RESIDUAL = 1e-6
_GROWTH_LIMIT = 1e100

EpClass = Literal["all-paired-EP", "single-extra-EP", "third-order-EP", "no-EP"]
EpObjective = Literal["min-gap", "all-pairs", "central-pair"]

__all__ = [
    "BoundStateInfo",
    "axis_count",
    "EpReport",
    "PairInfo",
    "bound_state",
    "count_nodes",
    "detect_pairs",
    "eigenvector_transfer",
    "locate_ep",
    "order_eigenpairs",
    "participation_ratio",
    "refine_axis_arrival",
    "solve",
    "solve_charpoly",
    "solve_dense",
]


class PairInfo(BaseModel):
    i: int
    j: int
    center: complex
    gap: float = Field(ge=0.0)
    vector_overlap: float | None = Field(default=None, ge=0.0, le=1.0)
    is_ep: bool = False


class EpReport(BaseModel):
    pair_list: list[PairInfo]
    unpaired: list[int] = Field(default_factory=list)
    classification: EpClass
    gamma_at_detection: float

    @property
    def ep_pairs(self) -> list[PairInfo]:
        return [p for p in self.pair_list if p.is_ep]

    @property
    def min_gap(self) -> float:
        return min((p.gap for p in self.pair_list), default=float("inf"))

    @property
    def max_gap(self) -> float:
        return max((p.gap for p in self.pair_list), default=0.0)


class BoundStateInfo(BaseModel):
    eigenvalue: complex
    index: int
    profile: list[float]
    alpha: float = Field(gt=0.0)
    r_squared: float


def _forward(op: TridiagOperator, lam: complex) -> np.ndarray:
    """x_1 = 1, x_0 = 0, rows 1..L-1 of (H - lam) x = 0 satisfied exactly."""
    d, e = op.diag, op.offdiag
    n = op.dim
    x = np.zeros(n, dtype=complex)
    x[0] = 1.0
    for j in range(n - 1):
        prev = e[j - 1] * x[j - 1] if j > 0 else 0.0
        x[j + 1] = -((d[j] - lam) * x[j] + prev) / e[j]
        if abs(x[j + 1]) > _GROWTH_LIMIT:
            x[: j + 2] /= abs(x[j + 1])
    return x


def _backward(op: TridiagOperator, lam: complex) -> np.ndarray:
    """Same recursion started from the far edge."""
    d, e = op.diag, op.offdiag
    n = op.dim
    x = np.zeros(n, dtype=complex)
    x[n - 1] = 1.0
    for j in range(n - 1, 0, -1):
        nxt = e[j] * x[j + 1] if j < n - 1 else 0.0
        x[j - 1] = -((d[j] - lam) * x[j] + nxt) / e[j - 1]
        if abs(x[j - 1]) > _GROWTH_LIMIT:
            x[j - 1 :] /= abs(x[j - 1])
    return x


def eigenvector_transfer(op: TridiagOperator, lam: complex) -> np.ndarray:
    """
    Right eigenvector for an (approximate) eigenvalue from the three-term
    eigen-equation. The forward recursion from site 1 and the backward one
    from site L are joined at the row where the spliced vector has the
    smallest residual, which keeps exponentially decaying tails accurate on
    both sides of the impurity.

    Raises LargeResidualError if lam is not an eigenvalue.
    """
    lam = complex(lam)
    f = _forward(op, lam)
    b = _backward(op, lam)

    best, best_residual = None, np.inf
    for m in range(op.dim):
        if b[m] == 0:
            continue
        x = np.concatenate([f[: m + 1], b[m + 1 :] * (f[m] / b[m])])
        norm = np.linalg.norm(x)
        if not np.isfinite(norm) or norm == 0:
            continue
        residual = np.linalg.norm(apply(op, x) - lam * x) / norm
        if residual < best_residual:
            best, best_residual = x / norm, residual

    if best is None or best_residual > TRANSFER_RESIDUAL:
        raise LargeResidualError(float(best_residual), TRANSFER_RESIDUAL)
    pivot = best[np.argmax(np.abs(best))]
    return best * (abs(pivot) / pivot)


def greedy_pairs(eigenvalues: np.ndarray) -> tuple[list[tuple[int, int]], list[int]]:
    n = eigenvalues.size
    i_idx, j_idx = np.triu_indices(n, k=1)
    gaps = np.abs(eigenvalues[i_idx] - eigenvalues[j_idx])
    used = np.zeros(n, dtype=bool)
    pairs = []
    for k in np.argsort(gaps, kind="stable"):
        i, j = int(i_idx[k]), int(j_idx[k])
        if used[i] or used[j]:
            continue
        used[i] = used[j] = True
        pairs.append((i, j))
    return pairs, [int(i) for i in np.flatnonzero(~used)]


def _classify(spectrum: Spectrum, pairs: list[PairInfo]) -> EpClass:
    ep = [p for p in pairs if p.is_ep]
    if not ep:
        return "no-EP"
    if len(ep) == spectrum.eigenvalues.size // 2 and spectrum.eigenvalues.size % 2 == 0:
        return "all-paired-EP"
    if len(ep) == 1 and abs(ep[0].center.real) < AXIS_TOL:
        others = np.delete(spectrum.eigenvalues, [ep[0].i, ep[0].j])
        if np.any(np.abs(others.real) < AXIS_TOL):
            return "third-order-EP"
    return "single-extra-EP"


def detect_pairs(spectrum: Spectrum) -> EpReport:
    """Greedy minimum-gap pairing with vector overlaps and an EP label."""
    ev = spectrum.eigenvalues
    matched, unpaired = greedy_pairs(ev)
    vectors = spectrum.eigenvectors
    if vectors is None:
        logger.debug("detect_pairs without eigenvectors: EP decided on eigenvalue gap only")

    pairs = []
    for i, j in matched:
        gap = float(abs(ev[i] - ev[j]))
        overlap = None if vectors is None else overlap_defect(vectors[:, i], vectors[:, j])
        is_ep = gap < EP_GAP and (overlap is None or overlap < EP_OVERLAP)
        pairs.append(
            PairInfo(
                i=i,
                j=j,
                center=complex((ev[i] + ev[j]) / 2),
                gap=gap,
                vector_overlap=overlap,
                is_ep=is_ep,
            )
        )
    pairs.sort(key=lambda p: (round(p.center.real, 9), p.center.imag))
    return EpReport(
        pair_list=pairs,
        unpaired=unpaired,
        classification=_classify(spectrum, pairs),
        gamma_at_detection=spectrum.params.gamma,
    )


def gap_objective(L: int, q: int, objective: EpObjective = "min-gap"):
    """g(gamma) whose zeros mark coalescences, built on the dense eigenvalues."""

    def g(gamma: float) -> float:
        ev = solve_dense(LatticeParams.absorbing(L, q, abs(gamma))).eigenvalues
        if objective == "central-pair":
            closest = np.argsort(np.abs(ev.real), kind="stable")[:2]
            return float(abs(ev[closest[0]] - ev[closest[1]]))
        pairs, _ = greedy_pairs(ev)
        gaps = [abs(ev[i] - ev[j]) for i, j in pairs]
        return float(max(gaps) if objective == "all-pairs" else min(gaps))

    return g


def axis_count(L: int, q: int, gamma: float) -> int:
    """Number of eigenvalues on the imaginary axis."""
    ev = solve_dense(LatticeParams.absorbing(L, q, gamma)).eigenvalues
    return int(np.sum(np.abs(ev.real) < AXIS_TOL))


def refine_axis_arrival(L: int, q: int, left: float, right: float, xtol: float = 1e-13) -> float:
    """Smallest gamma in (left, right] with more eigenvalues on the imaginary axis than at left."""
    below = axis_count(L, q, left)
    while right - left > xtol:
        middle = 0.5 * (left + right)
        if axis_count(L, q, middle) > below:
            right = middle
        else:
            left = middle
    return right


def locate_ep(
    L: int,
    q: int,
    gamma_window: tuple[float, float],
    objective: EpObjective = "min-gap",
    grid_points: int = 41,
    seed: int = 0,
) -> tuple[float, EpReport]:
    """
    Minimize the eigenvalue gap over gamma inside the window.

    Candidates are the interior local minima of the gap on a coarse grid,
    refined by golden-section search, and for the min-gap objective every
    grid interval in which eigenvalues arrive on the imaginary axis, refined
    by bisection on the axis count. Such an arrival is a coalescence whose
    dip in the gap is too narrow for the grid. The candidate with the
    smallest gap wins. Raises NoMinimumError when there is none.
    """
    lo, hi = gamma_window
    g = gap_objective(L, q, objective)
    grid = np.linspace(lo, hi, grid_points)
    values = np.array([g(x) for x in grid])

    candidates: list[tuple[float, float]] = []
    for i in range(1, grid_points - 1):
        if not (values[i] < values[i - 1] and values[i] < values[i + 1]):
            continue
        result = minimize_scalar(
            g,
            bracket=(grid[i - 1], grid[i], grid[i + 1]),
            method="golden",
            options={"xtol": 1e-12},
        )
        x = float(min(max(result.x, grid[i - 1]), grid[i + 1]))
        candidates.append((x, g(x)))

    if objective == "min-gap":
        counts = [axis_count(L, q, x) for x in grid]
        for i in range(grid_points - 1):
            if counts[i + 1] > counts[i]:
                x = refine_axis_arrival(L, q, float(grid[i]), float(grid[i + 1]))
                candidates.append((x, g(x)))

    if not candidates:
        raise NoMinimumError(
            f"gap is monotone on [{lo}, {hi}] for L={L}, q={q} ({objective})"
        )
    gamma_c, gap = min(candidates, key=lambda c: c[1])
    logger.debug(f"locate_ep L={L} q={q}: gamma_c={gamma_c:.12f}, gap={gap:.3e}")

    spectrum = solve_dense(LatticeParams.absorbing(L, q, gamma_c), want_vectors=True, seed=seed)
    report = detect_pairs(spectrum)
    if report.classification != "no-EP":
        logger.success(f"EP ({report.classification}) at gamma={gamma_c:.9f} for L={L}, q={q}")
    return gamma_c, report


def participation_ratio(occupancies: np.ndarray) -> float:
    p = np.asarray(occupancies, dtype=float)
    p = p / p.sum()
    return float(1.0 / np.sum(p**2))


def count_nodes(occupancies: np.ndarray, floor: float = 1e-12) -> int:
    """Interior minima of the occupancy profile; a flat run counts once."""
    p = np.asarray(occupancies, dtype=float)
    d = np.diff(p / p.max())
    slope = np.sign(np.where(np.abs(d) < floor, 0.0, d))
    slope = slope[slope != 0]
    return int(np.sum((slope[:-1] < 0) & (slope[1:] > 0)))


def _select_bound(spectrum: Spectrum) -> int:
    params = spectrum.params
    ev = spectrum.eigenvalues
    if params.is_absorbing:
        if params.gamma <= 2.0:
            raise NoBoundStateError(
                f"no bound state for gamma={params.gamma:g} <= 2"
            )
        candidates = np.flatnonzero((np.abs(ev.real) < AXIS_TOL) & (ev.imag < -AXIS_TOL))
        if candidates.size == 0:
            raise NoBoundStateError(
                f"no eigenvalue on the imaginary axis at gamma={params.gamma:g}"
            )
        return int(candidates[np.argmin(ev.imag[candidates])])

    if params.impurity.imag > 0 or params.impurity == 0:
        raise NoBoundStateError(f"no localized state for impurity {params.impurity}")
    outside = np.flatnonzero(np.abs(ev) > 2.0 + AXIS_TOL)
    if outside.size == 0:
        raise NoBoundStateError(f"no eigenvalue outside the band for V={params.impurity.real:g}")
    return int(outside[np.argmax(np.abs(ev[outside]))])


def bound_state(spectrum: Spectrum, min_r_squared: float = 0.99) -> BoundStateInfo:
    """The state split off from the band, with its fitted localization length."""
    from .experiments.localization import fit_localization_length

    index = _select_bound(spectrum)
    lam = complex(spectrum.eigenvalues[index])
    op = build_hamiltonian(spectrum.params)
    v = eigenvector_transfer(op, lam)
    profile = np.abs(v) ** 2
    profile /= profile.sum()
    fit = fit_localization_length(profile, spectrum.params.q, min_r_squared=min_r_squared)
    logger.info(f"bound state lambda={lam:.6g}, alpha={fit.alpha:.4f} (r2={fit.r_squared:.6f})")
    return BoundStateInfo(
        eigenvalue=lam,
        index=index,
        profile=profile.tolist(),
        alpha=fit.alpha,
        r_squared=fit.r_squared,
    )


def order_eigenpairs(spectrum: Spectrum) -> Spectrum:
    """Sort by real part, then imaginary part; 1-2i precedes 1+2i."""
    ev = spectrum.eigenvalues
    order = np.lexsort((ev.imag, np.round(ev.real, 9)))
    return spectrum.permuted(order)


def solve(
    params: LatticeParams, backend: BackendName = "dense-qr", want_vectors: bool = False, seed: int = 0
) -> Spectrum:
    """Solve params with the named backend after its size check."""
    return get_backend(backend, seed=seed).solve(params, want_vectors)

"""
R/T/A scans over the impurity strength and the absorption-maximum law.
"""

from typing import Sequence

import numpy as np
from joblib import Parallel, delayed
from loguru import logger
from pydantic import BaseModel, Field, model_validator

from ..cache import ResultCache
from ..continuum import ContinuumParams, continuum_rta, gamma_star
from ..dynamics import DEFAULT_OVERLAP_MAX, DEFAULT_SAFETY, RtaPoint, WavepacketSpec, scatter_once
from ..errors import InvalidParameterError, LatticeError, MaxAtBoundaryError
from ..utils import worker_count

MONOTONE_SLACK = 0.02
MIN_SCAN_POINTS = 7


class ScanGrid(BaseModel):
    variable: str
    values: list[float] = Field(min_length=1)
    fixed: dict[str, float | int] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_increasing(self) -> "ScanGrid":
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError(f"{self.variable} grid must be strictly increasing")
        return self

    @classmethod
    def linspace(cls, variable: str, lo: float, hi: float, points: int, **fixed) -> "ScanGrid":
        if points < 1:
            raise ValueError("grid needs at least one point")
        return cls(variable=variable, values=np.linspace(lo, hi, points).tolist(), fixed=fixed)


class ScanEntry(BaseModel):
    gamma: float
    point: RtaPoint | None = None
    error: str | None = None


class RtaScan(BaseModel):
    L: int
    q: int
    spec: WavepacketSpec
    tol: float
    entries: list[ScanEntry]
    r_nondecreasing: bool = True
    t_nonincreasing: bool = True
    a_unimodal: bool = True

    @property
    def points(self) -> list[RtaPoint]:
        return [e.point for e in self.entries if e.point is not None]

    @property
    def failures(self) -> list[ScanEntry]:
        return [e for e in self.entries if e.point is None]


def _scatter_entry(L, q, spec, gamma, tol, t_obs, safety, overlap_max) -> ScanEntry:
    try:
        point = scatter_once(L, q, spec, gamma, tol=tol, t_obs=t_obs, safety=safety, overlap_max=overlap_max)
        return ScanEntry(gamma=gamma, point=point)
    except LatticeError as e:
        logger.warning(f"scan point gamma={gamma:g} failed: {e}")
        return ScanEntry(gamma=gamma, error=f"{type(e).__name__}: {e}")


def _is_unimodal(values: np.ndarray, slack: float) -> bool:
    peak = int(np.argmax(values))
    rising = np.all(np.diff(values[: peak + 1]) >= -slack)
    falling = np.all(np.diff(values[peak:]) <= slack)
    return bool(rising and falling)


def monotonicity_diagnostics(points: Sequence[RtaPoint], slack: float = MONOTONE_SLACK) -> dict[str, bool]:
    R = np.array([p.R for p in points])
    T = np.array([p.T for p in points])
    A = np.array([p.A for p in points])
    if len(points) < 2:
        return {"r_nondecreasing": True, "t_nonincreasing": True, "a_unimodal": True}
    return {
        "r_nondecreasing": bool(np.all(np.diff(R) >= -slack)),
        "t_nonincreasing": bool(np.all(np.diff(T) <= slack)),
        "a_unimodal": _is_unimodal(A, slack),
    }


def scan_rta(
    gammas: Sequence[float],
    L: int,
    q: int,
    spec: WavepacketSpec,
    tol: float = 1e-8,
    t_obs: float | None = None,
    safety: float = DEFAULT_SAFETY,
    overlap_max: float = DEFAULT_OVERLAP_MAX,
    n_jobs: int | None = None,
    cache: ResultCache | None = None,
) -> RtaScan:
    """
    One scattering run per gamma, executed in parallel and returned in grid
    order. Failing points are annotated, not raised.
    """
    grid = ScanGrid(variable="gamma", values=[float(g) for g in gammas])
    n_jobs = n_jobs or worker_count()
    run_args = dict(tol=tol, t_obs=t_obs, safety=safety, overlap_max=overlap_max)

    entries: dict[int, ScanEntry] = {}
    todo = []
    for i, gamma in enumerate(grid.values):
        hit = cache.get_rta(L, q, spec, gamma, **run_args) if cache else None
        if hit is not None:
            entries[i] = ScanEntry(gamma=gamma, point=hit)
        else:
            todo.append((i, gamma))

    logger.info(f"scanning {len(todo)} gamma points ({len(entries)} cached) on {n_jobs} workers")
    computed = Parallel(n_jobs=min(n_jobs, max(len(todo), 1)))(
        delayed(_scatter_entry)(L, q, spec, gamma, tol, t_obs, safety, overlap_max)
        for _, gamma in todo
    )
    for (i, gamma), entry in zip(todo, computed):
        entries[i] = entry
        if cache and entry.point is not None:
            cache.set_rta(L, q, spec, gamma, entry.point, **run_args)

    ordered = [entries[i] for i in range(len(grid.values))]
    points = [e.point for e in ordered if e.point is not None]
    scan = RtaScan(L=L, q=q, spec=spec, tol=tol, entries=ordered, **monotonicity_diagnostics(points))
    logger.success(f"gamma scan finished: {len(points)}/{len(ordered)} points")
    return scan


def gamma_star_from_curve(gammas: Sequence[float], absorption: Sequence[float]) -> float:
    """Vertex of the parabola through the discrete maximum of A and its neighbours."""
    g = np.asarray(gammas, dtype=float)
    a = np.asarray(absorption, dtype=float)
    if g.size < MIN_SCAN_POINTS:
        raise InvalidParameterError(f"need at least {MIN_SCAN_POINTS} scan points, got {g.size}")
    order = np.argsort(g)
    g, a = g[order], a[order]
    i = int(np.argmax(a))
    if i == 0 or i == g.size - 1:
        raise MaxAtBoundaryError(f"absorption maximum at grid endpoint gamma={g[i]:g}")
    c2, c1, _ = np.polyfit(g[i - 1 : i + 2], a[i - 1 : i + 2], 2)
    if c2 >= 0:
        return float(g[i])
    return float(np.clip(-c1 / (2 * c2), g[i - 1], g[i + 1]))


def extract_gamma_star(scan: RtaScan | Sequence[RtaPoint]) -> float:
    points = scan.points if isinstance(scan, RtaScan) else list(scan)
    return gamma_star_from_curve([p.gamma for p in points], [p.A for p in points])


def continuum_scan(k: float, gammas: Sequence[float]) -> list[tuple[float, float, float, float]]:
    """(gamma, R, T, A) rows of the continuum closed form."""
    rows = []
    for g in gammas:
        rta = continuum_rta(ContinuumParams(k=k, gamma=float(g)))
        rows.append((float(g), rta.R, rta.T, rta.A))
    return rows


class GammaStarRow(BaseModel):
    k: float
    gamma_star: float | None
    lattice_law: float
    continuum: float
    error: str | None = None


def scan_k(
    k_values: Sequence[float],
    gammas: Sequence[float],
    L: int,
    q: int,
    sigma: float,
    j0: int | None = None,
    tol: float = 1e-8,
    n_jobs: int | None = None,
    cache: ResultCache | None = None,
) -> list[GammaStarRow]:
    """Absorption-maximizing strength for each momentum next to 2 sin k and 2k."""
    rows = []
    for k in k_values:
        spec = WavepacketSpec(sigma=sigma, k=k, j0=j0)
        scan = scan_rta(gammas, L, q, spec, tol=tol, n_jobs=n_jobs, cache=cache)
        try:
            value, error = extract_gamma_star(scan), None
        except LatticeError as e:
            value, error = None, str(e)
            logger.warning(f"k={k:.6g}: {e}")
        rows.append(
            GammaStarRow(
                k=k,
                gamma_star=value,
                lattice_law=2 * np.sin(k),
                continuum=gamma_star(k),
                error=error,
            )
        )
    return rows

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field
from scipy.optimize import bisect
from scipy.stats import linregress

from ..errors import (
    InvalidParameterError,
    NoBoundStateError,
    PoorFitError,
    WindowTooSmallError,
)
from ..lattice import LatticeParams, central_site
from ..solvers.dense import solve_dense

CORE_EXCLUSION = 2
EDGE_EXCLUSION = 5
MIN_SITES_PER_SIDE = 4
NOISE_FLOOR = 1e-24
V_XTOL = 1e-8
V_MIN = 1e-6


class LocFit(BaseModel):
    """Amplitude decay length alpha of a profile ~ exp(-|j - q| / alpha)."""

    alpha: float = Field(gt=0.0)
    r_squared: float = Field(ge=0.0, le=1.0)
    window: tuple[int, int]
    sites: list[int]


class GammaVMap(BaseModel):
    L: int
    q: int
    pairs: list[tuple[float, float]]

    @property
    def gammas(self) -> np.ndarray:
        return np.array([g for g, _ in self.pairs])

    @property
    def potentials(self) -> np.ndarray:
        return np.array([v for _, v in self.pairs])


def _fit_sites(profile: np.ndarray, q: int) -> list[int]:
    L = profile.size
    floor = NOISE_FLOOR * profile.max()
    chosen = []
    for side in (range(q - CORE_EXCLUSION - 1, 0, -1), range(q + CORE_EXCLUSION + 1, L + 1)):
        sites = []
        for j in side:
            if j <= EDGE_EXCLUSION or j > L - EDGE_EXCLUSION:
                continue
            if profile[j - 1] <= floor:
                break
            sites.append(j)
        if len(sites) >= MIN_SITES_PER_SIDE:
            chosen.extend(sites)
        elif sites:
            logger.warning(f"dropping fit side with only {len(sites)} usable sites")
    return sorted(chosen)


def fit_localization_length(
    profile, q: int, min_r_squared: float = 0.99
) -> LocFit:
    """
    Least-squares line through log occupancy against |j - q|.

    Sites within 2 of the impurity and within 5 of either edge are left out,
    as are sites that have decayed to rounding noise. The occupancy slope is
    -2/alpha.
    """
    profile = np.asarray(profile, dtype=float)
    sites = _fit_sites(profile, q)
    if not sites:
        raise WindowTooSmallError(
            f"fewer than {MIN_SITES_PER_SIDE} usable sites on each side of q={q}"
        )
    j = np.array(sites)
    fit = linregress(np.abs(j - q), np.log(profile[j - 1]))
    r_squared = float(fit.rvalue**2)
    if fit.slope >= 0:
        raise PoorFitError(0.0, min_r_squared)
    if r_squared < min_r_squared:
        raise PoorFitError(r_squared, min_r_squared)
    return LocFit(
        alpha=float(-2.0 / fit.slope),
        r_squared=min(r_squared, 1.0),
        window=(int(j.min()), int(j.max())),
        sites=sites,
    )


def localization_length(params: LatticeParams, min_r_squared: float = 0.0) -> float:
    """alpha of the split-off state; inf when the state is not localized on this chain."""
    from ..spectral import bound_state

    try:
        return bound_state(solve_dense(params), min_r_squared=min_r_squared).alpha
    except (NoBoundStateError, PoorFitError, WindowTooSmallError):
        return float("inf")


def map_gamma_to_v(
    gamma_values, L: int, q: int | None = None
) -> GammaVMap:
    """
    Real potential V giving the same localization length as each absorbing
    strength gamma > 2, found by bisection on [1e-6, gamma].
    """
    q = central_site(L) if q is None else q
    gammas = [float(g) for g in gamma_values]
    if any(g <= 2.0 for g in gammas):
        raise InvalidParameterError("gamma to V map needs gamma > 2")

    pairs = []
    for gamma in gammas:
        target = localization_length(LatticeParams.absorbing(L, q, gamma))
        if not np.isfinite(target):
            raise NoBoundStateError(f"no localized state at gamma={gamma:g}, L={L}")

        def mismatch(V: float) -> float:
            alpha = localization_length(LatticeParams.real_potential(L, q, V))
            return min(alpha, 1e6) - target

        lo, hi = V_MIN, gamma
        f_lo, f_hi = mismatch(lo), mismatch(hi)
        if f_lo * f_hi > 0:
            V = lo if abs(f_lo) < abs(f_hi) else hi
            logger.warning(f"V not bracketed for gamma={gamma:g}; clamped to {V:g}")
        else:
            V = float(bisect(mismatch, lo, hi, xtol=V_XTOL))
        logger.info(f"gamma={gamma:g} <-> V={V:.6f} (alpha={target:.4f})")
        pairs.append((gamma, V))
    return GammaVMap(L=L, q=q, pairs=pairs)

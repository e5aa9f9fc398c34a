"""
Simultaneous root finding of the characteristic polynomial (Aberth-Ehrlich).

All L roots move at once; each correction is the Newton step deflated by the
current positions of the other roots, so no explicit polynomial deflation is
needed.
"""

import numpy as np
from loguru import logger

from ..charpoly import CharPolyParams, charpoly_abs, charpoly_newton_ratio
from ..errors import InvalidParameterError, RootCountMismatchError
from ..lattice import LatticeParams
from .core import Spectrum, SpectrumBackend

MAX_ROOT_SITES = 200
SEED_RADIUS = 2.2
MAX_ITERATIONS = 600
RETRIES = 3
CONVERGED_STEP = 1e-14
STAGNANT_STEP = 1e-6
STAGNANT_PATIENCE = 25
POLISH_STEPS = 3


def initial_guesses(params: CharPolyParams, attempt: int = 0) -> np.ndarray:
    """
    L-1 seeds on a circle around the band plus one on the negative imaginary
    axis for the state that leaves the band at large gamma.
    """
    n_circle = params.L - 1
    # irrational offset keeps seeds off the mirror-symmetric configuration
    offset = 0.3819660112501051 * (1 + attempt)
    angles = 2 * np.pi * (np.arange(n_circle) + 0.5) / max(n_circle, 1) + offset
    radius = SEED_RADIUS * (1 + 0.05 * attempt)
    circle = radius * np.exp(1j * angles)
    extra = np.array([-1j * max(params.gamma, 2.0)])
    return np.concatenate([circle, extra])


def aberth_ehrlich(params: CharPolyParams, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Iterate from the seeds z; return (roots, converged mask)."""
    z = z.astype(complex).copy()
    n = z.size
    converged = np.zeros(n, dtype=bool)
    best_step = np.full(n, np.inf)
    stagnant = np.zeros(n, dtype=int)

    for iteration in range(MAX_ITERATIONS):
        active = ~converged
        if not active.any():
            break
        ratio = charpoly_newton_ratio(params, z[active])
        diff = z[active][:, None] - z[None, :]
        rows = np.arange(diff.shape[0])
        diff[rows, np.flatnonzero(active)] = np.inf
        with np.errstate(divide="ignore", invalid="ignore"):
            repulsion = (1.0 / diff).sum(axis=1)
            step = ratio / (1.0 - ratio * repulsion)

        bad = ~np.isfinite(step)
        if bad.any():
            # P' vanished or two roots collided: kick them apart
            step[bad] = 1e-7 * (1 + 1j) * (1 + rows[bad])

        z[active] -= step
        size = np.abs(step) / (1.0 + np.abs(z[active]))

        idx = np.flatnonzero(active)
        improving = size < 0.5 * best_step[idx]
        best_step[idx] = np.minimum(best_step[idx], size)
        stagnant[idx] = np.where(improving, 0, stagnant[idx] + 1)

        done = (size < CONVERGED_STEP) | (
            (stagnant[idx] >= STAGNANT_PATIENCE) & (best_step[idx] < STAGNANT_STEP)
        )
        converged[idx[done]] = True

    logger.debug(
        f"Aberth iteration stopped after {iteration + 1} sweeps, "
        f"{converged.sum()}/{n} roots converged"
    )
    return z, converged


def polish(params: CharPolyParams, roots: np.ndarray, steps: int = POLISH_STEPS) -> np.ndarray:
    """Newton steps, each kept only if it lowers |P|."""
    roots = roots.copy()
    for _ in range(steps):
        current = charpoly_abs(params, roots)
        with np.errstate(invalid="ignore"):
            candidate = roots - charpoly_newton_ratio(params, roots)
        finite = np.isfinite(candidate)
        trial = charpoly_abs(params, np.where(finite, candidate, roots))
        better = finite & (trial < current)
        roots = np.where(better, candidate, roots)
    return roots


class CharPolyRootsBackend(SpectrumBackend):
    """Roots of P_{L,q}; eigenvalues only."""

    name = "charpoly-roots"

    def check(self, params: LatticeParams) -> None:
        if params.L > MAX_ROOT_SITES:
            raise InvalidParameterError(
                f"root finder limited to L <= {MAX_ROOT_SITES}, got L={params.L}"
            )

    def solve(self, params: LatticeParams, want_vectors: bool = False) -> Spectrum:
        self.check(params)
        if want_vectors:
            logger.warning("charpoly-roots backend does not produce eigenvectors")
        cp = CharPolyParams.from_lattice(params)
        roots = find_roots(cp)
        return Spectrum(eigenvalues=roots, params=params, backend=self.name)


def find_roots(params: CharPolyParams) -> np.ndarray:
    if params.L == 1:
        return np.array([-1j * params.gamma])

    converged_count = 0
    for attempt in range(RETRIES):
        roots, converged = aberth_ehrlich(params, initial_guesses(params, attempt))
        converged_count = int(converged.sum())
        if converged.all():
            return polish(params, roots)
        logger.warning(
            f"Aberth attempt {attempt + 1}: {converged_count}/{params.L} roots converged, reseeding"
        )
    raise RootCountMismatchError(params.L, converged_count)


def solve_charpoly(params: CharPolyParams) -> Spectrum:
    """All eigenvalues of the absorbing chain as roots of its characteristic polynomial."""
    if params.L < 2:
        raise InvalidParameterError(f"a chain needs at least 2 sites, got L={params.L}")
    lattice = LatticeParams.absorbing(params.L, params.q, params.gamma)
    return Spectrum(eigenvalues=find_roots(params), params=lattice, backend="charpoly-roots")

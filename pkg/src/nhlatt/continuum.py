"""
Closed forms for a plane wave hitting the delta potential -i*gamma*delta(x),
plus the exact single-site lattice amplitudes used as a lattice oracle.
"""

import numpy as np
from pydantic import BaseModel, Field

from .dynamics import RtaFractions


class ContinuumParams(BaseModel):
    k: float = Field(gt=0.0, description="Wavenumber")
    gamma: float = Field(default=0.0, ge=0.0)
    hbar: float = Field(default=1.0, gt=0.0)
    m: float = Field(default=0.5, gt=0.0)


def continuum_amplitudes(p: ContinuumParams) -> tuple[complex, complex]:
    """
    r = -1 / (1 + k hbar^2 / (m gamma)), t = 1 / (1 + m gamma / (k hbar^2)).

    gamma = 0 is the continuous limit (0, 1).
    """
    if p.gamma == 0.0:
        return 0j, 1 + 0j
    if np.isinf(p.gamma):
        return -1 + 0j, 0j
    kh2 = p.k * p.hbar**2
    mg = p.m * p.gamma
    r = -mg / (mg + kh2)
    t = kh2 / (mg + kh2)
    return complex(r), complex(t)


def continuum_rta(p: ContinuumParams) -> RtaFractions:
    r, t = continuum_amplitudes(p)
    R, T = abs(r) ** 2, abs(t) ** 2
    return RtaFractions(R=R, T=T, A=1.0 - R - T)


def gamma_star(k: float, hbar: float = 1.0, m: float = 0.5) -> float:
    """Strength of maximal absorption, k hbar^2 / m (2k for the default units)."""
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    return k * hbar**2 / m


def lattice_plane_wave_amplitudes(k: float, gamma: float) -> tuple[complex, complex]:
    """Exact single-impurity lattice amplitudes at momentum k in (0, pi)."""
    v = 2.0 * np.sin(k)
    return complex(-gamma / (gamma + v)), complex(v / (gamma + v))


def lattice_plane_wave_rta(k: float, gamma: float) -> RtaFractions:
    r, t = lattice_plane_wave_amplitudes(k, gamma)
    R, T = abs(r) ** 2, abs(t) ** 2
    return RtaFractions(R=R, T=T, A=1.0 - R - T)

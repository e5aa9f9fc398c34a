"""
Characteristic polynomial of the impurity chain through the three-term
recurrence K_n = lam*K_{n-1} - K_{n-2}, K_0 = 1, K_{-1} = 0.

    P_{L,q}(lam) = K_{q-1} K_{L-q+1} + (i*gamma*K_{q-1} - K_{q-2}) K_{L-q}

Every evaluation carries (K_n, K_{n-1}) and their lambda-derivatives with a
shared binary exponent so that chains of several hundred sites can be
evaluated far from the band without overflow.
"""

from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .lattice import LatticeParams

_RESCALE_BITS = 256
_RESCALE_LIMIT = 2.0**_RESCALE_BITS


class CharPolyParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    L: int = Field(ge=1)
    q: int
    gamma: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def check_site(self) -> "CharPolyParams":
        if not 1 <= self.q <= self.L:
            raise ValueError(f"q out of range: q={self.q} not in [1, {self.L}]")
        return self

    @classmethod
    def from_lattice(cls, params: LatticeParams) -> "CharPolyParams":
        if params.impurity.real != 0.0:
            raise ValueError("characteristic polynomial backend needs an imaginary impurity")
        return cls(L=params.L, q=params.q, gamma=params.gamma)

    def to_lattice(self) -> LatticeParams:
        return LatticeParams.absorbing(max(self.L, 2), self.q, self.gamma)


@dataclass
class _KState:
    """K_n, K_{n-1} and derivatives, all scaled by 2**exponent."""

    k: np.ndarray
    k_prev: np.ndarray
    dk: np.ndarray
    dk_prev: np.ndarray
    exponent: np.ndarray


def _k_states(orders: list[int], lam: np.ndarray) -> dict[int, _KState]:
    """Run the recurrence once and snapshot the state at each requested order."""
    lam = np.asarray(lam, dtype=complex)
    wanted = set(orders)
    states: dict[int, _KState] = {}

    k_prev = np.zeros_like(lam)  # K_{-1}
    k = np.ones_like(lam)  # K_0
    dk_prev = np.zeros_like(lam)
    dk = np.zeros_like(lam)
    exponent = np.zeros(lam.shape, dtype=np.int64)

    def snapshot(n: int):
        states[n] = _KState(k.copy(), k_prev.copy(), dk.copy(), dk_prev.copy(), exponent.copy())

    if 0 in wanted:
        snapshot(0)

    for n in range(1, max(orders, default=0) + 1):
        k, k_prev, dk, dk_prev = (
            lam * k - k_prev,
            k,
            k + lam * dk - dk_prev,
            dk,
        )
        mag = np.maximum.reduce([np.abs(k), np.abs(k_prev), np.abs(dk), np.abs(dk_prev)])
        big = mag > _RESCALE_LIMIT
        if np.any(big):
            factor = np.where(big, 2.0**-_RESCALE_BITS, 1.0)
            k, k_prev, dk, dk_prev = k * factor, k_prev * factor, dk * factor, dk_prev * factor
            exponent = exponent + np.where(big, _RESCALE_BITS, 0)
        if n in wanted:
            snapshot(n)
    return states


def _scale(mantissa: np.ndarray, exponent: np.ndarray) -> np.ndarray:
    out = np.empty(np.shape(mantissa), dtype=complex)
    with np.errstate(over="ignore"):
        out.real = np.ldexp(mantissa.real, exponent)
        out.imag = np.ldexp(mantissa.imag, exponent)
    return out


def _unwrap(value: np.ndarray, lam) -> complex | np.ndarray:
    return complex(value) if np.ndim(lam) == 0 else value


def k_eval(n: int, lam):
    """K_n(lam) by forward recurrence; 0 for n < 0."""
    lam_arr = np.asarray(lam, dtype=complex)
    if n < 0:
        return _unwrap(np.zeros_like(lam_arr), lam)
    s = _k_states([n], lam_arr)[n]
    return _unwrap(_scale(s.k, s.exponent), lam)


def _terms(params: CharPolyParams, lam: np.ndarray):
    """
    Mantissas and exponents of the two products making up P and P'.

    Returns (p1, dp1, p2, dp2, e) with P = (p1 + p2)*2**e and P' = (dp1 + dp2)*2**e.
    """
    L, q, gamma = params.L, params.q, params.gamma
    left, right = q - 1, L - q
    states = _k_states([left, right + 1], lam)
    a = states[left]  # K_{q-1}, K_{q-2}
    b = states[right + 1]  # K_{L-q+1}, K_{L-q}

    ig = 1j * gamma
    head = ig * a.k - a.k_prev
    dhead = ig * a.dk - a.dk_prev

    p1 = a.k * b.k
    dp1 = a.dk * b.k + a.k * b.dk
    p2 = head * b.k_prev
    dp2 = dhead * b.k_prev + head * b.dk_prev
    e = a.exponent + b.exponent
    return p1, dp1, p2, dp2, e


def charpoly_eval(params: CharPolyParams, lam):
    """det(lam*I - H) for the absorbing chain, monic of degree L."""
    lam_arr = np.asarray(lam, dtype=complex)
    p1, _, p2, _, e = _terms(params, lam_arr)
    return _unwrap(_scale(p1 + p2, e), lam)


def charpoly_derivative(params: CharPolyParams, lam):
    lam_arr = np.asarray(lam, dtype=complex)
    _, dp1, _, dp2, e = _terms(params, lam_arr)
    return _unwrap(_scale(dp1 + dp2, e), lam)


def charpoly_newton_ratio(params: CharPolyParams, lam: np.ndarray) -> np.ndarray:
    """P/P' evaluated without forming either factor at full scale."""
    p1, dp1, p2, dp2, _ = _terms(params, np.asarray(lam, dtype=complex))
    with np.errstate(divide="ignore", invalid="ignore"):
        return (p1 + p2) / (dp1 + dp2)


def charpoly_abs(params: CharPolyParams, lam: np.ndarray) -> np.ndarray:
    """|P| as log2-magnitude, safe for any L."""
    p1, _, p2, _, e = _terms(params, np.asarray(lam, dtype=complex))
    with np.errstate(divide="ignore"):
        return np.log2(np.abs(p1 + p2)) + e


def symmetry_check(params: CharPolyParams, lam: complex) -> float:
    """|P(-conj(lam)) - (-1)^L conj(P(lam))|, zero for the reflection-symmetric spectrum."""
    mirrored = charpoly_eval(params, -np.conj(lam))
    direct = charpoly_eval(params, lam)
    sign = -1.0 if params.L % 2 else 1.0
    return float(abs(mirrored - sign * np.conj(direct)))


def square_root_factor(m: int, lam):
    """K_m + i*K_{m-1}; its square is P_{2m,m} at gamma = 2."""
    lam_arr = np.asarray(lam, dtype=complex)
    s = _k_states([m], lam_arr)[m]
    return _unwrap(_scale(s.k + 1j * s.k_prev, s.exponent), lam)

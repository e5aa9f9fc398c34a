"""
Open-chain tight-binding Hamiltonian with a single complex on-site impurity.

Sites are 1-based in every public interface and 0-based in storage.
"""

from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import DimensionMismatchError

HOPPING = 1.0


def central_site(L: int) -> int:
    """Default impurity site: L/2 for even L, (L+1)/2 for odd L."""
    return L // 2 if L % 2 == 0 else (L + 1) // 2


def reflect_site(L: int, q: int) -> int:
    return L + 1 - q


class LatticeParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    L: int = Field(description="Number of sites")
    q: int = Field(description="Impurity site, 1-based")
    impurity: complex = Field(
        default=0j, description="On-site impurity value, -i*gamma or real V"
    )
    J: float = Field(default=HOPPING, description="Hopping amplitude")

    @model_validator(mode="after")
    def check_geometry(self) -> "LatticeParams":
        if self.L < 2:
            raise ValueError(f"L must be at least 2, got {self.L}")
        if not 1 <= self.q <= self.L:
            raise ValueError(f"q out of range: q={self.q} not in [1, {self.L}]")
        if self.J != HOPPING:
            raise ValueError("J is fixed to 1 (energies in units of the hopping)")
        return self

    @classmethod
    def absorbing(cls, L: int, q: int, gamma: float) -> "LatticeParams":
        if gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {gamma}")
        return cls(L=L, q=q, impurity=complex(0.0, -gamma))

    @classmethod
    def real_potential(cls, L: int, q: int, V: float) -> "LatticeParams":
        return cls(L=L, q=q, impurity=complex(V, 0.0))

    @property
    def gamma(self) -> float:
        return -self.impurity.imag

    @property
    def is_absorbing(self) -> bool:
        return self.impurity.imag < 0

    def with_impurity(self, impurity: complex) -> "LatticeParams":
        return self.model_copy(update={"impurity": complex(impurity)})


@dataclass(frozen=True)
class TridiagOperator:
    """Complex tridiagonal matrix with symmetric off-diagonals."""

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        diag = np.array(self.diag, dtype=complex)
        offdiag = np.array(self.offdiag, dtype=complex)
        if offdiag.shape != (max(diag.size - 1, 0),):
            raise DimensionMismatchError(diag.size - 1, offdiag.size)
        diag.setflags(write=False)
        offdiag.setflags(write=False)
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "offdiag", offdiag)

    @property
    def dim(self) -> int:
        return self.diag.size

    def banded(self, shift: complex = 0.0, scale: complex = 1.0) -> np.ndarray:
        """
        LAPACK banded storage (3, dim) of ``shift*I + scale*H`` for
        ``scipy.linalg.solve_banded((1, 1), ...)``.
        """
        ab = np.zeros((3, self.dim), dtype=complex)
        ab[0, 1:] = scale * self.offdiag
        ab[1, :] = shift + scale * self.diag
        ab[2, :-1] = scale * self.offdiag
        return ab


def build_hamiltonian(params: LatticeParams) -> TridiagOperator:
    diag = np.zeros(params.L, dtype=complex)
    diag[params.q - 1] = params.impurity
    offdiag = np.full(params.L - 1, -params.J, dtype=complex)
    return TridiagOperator(diag=diag, offdiag=offdiag)


def apply(op: TridiagOperator, v: np.ndarray) -> np.ndarray:
    """H·v in O(dim). Accepts a vector or a (dim, k) block of vectors."""
    v = np.asarray(v, dtype=complex)
    if v.shape[0] != op.dim:
        raise DimensionMismatchError(op.dim, v.shape[0])
    d = op.diag if v.ndim == 1 else op.diag[:, None]
    e = op.offdiag if v.ndim == 1 else op.offdiag[:, None]
    out = d * v
    out[:-1] += e * v[1:]
    out[1:] += e * v[:-1]
    return out


def trace(op: TridiagOperator) -> complex:
    return complex(op.diag.sum())


def dense_matrix(op: TridiagOperator) -> np.ndarray:
    return (
        np.diag(op.diag)
        + np.diag(op.offdiag, k=1)
        + np.diag(op.offdiag, k=-1)
    )

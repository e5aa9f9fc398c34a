from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from ..lattice import LatticeParams

BackendName = Literal["dense-qr", "charpoly-roots"]


@dataclass(frozen=True)
class Spectrum:
    """
    Eigenvalues of one Hamiltonian instance.

    ``eigenvectors`` holds unit right eigenvectors as columns, aligned with
    ``eigenvalues``. ``near_defective`` lists indices whose inverse iteration
    did not settle, which is expected close to exceptional points.
    """

    eigenvalues: np.ndarray
    params: LatticeParams
    backend: BackendName
    eigenvectors: np.ndarray | None = None
    near_defective: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        values = np.array(self.eigenvalues, dtype=complex)
        values.setflags(write=False)
        object.__setattr__(self, "eigenvalues", values)
        if self.eigenvectors is not None:
            vectors = np.array(self.eigenvectors, dtype=complex)
            vectors.setflags(write=False)
            object.__setattr__(self, "eigenvectors", vectors)

    def __len__(self) -> int:
        return self.eigenvalues.size

    @property
    def has_vectors(self) -> bool:
        return self.eigenvectors is not None

    def permuted(self, order: np.ndarray) -> "Spectrum":
        index = {int(old): new for new, old in enumerate(order)}
        return replace(
            self,
            eigenvalues=self.eigenvalues[order],
            eigenvectors=None if self.eigenvectors is None else self.eigenvectors[:, order],
            near_defective=tuple(sorted(index[i] for i in self.near_defective)),
        )

    def occupancies(self, index: int) -> np.ndarray:
        if self.eigenvectors is None:
            raise ValueError("spectrum was computed without eigenvectors")
        v = self.eigenvectors[:, index]
        occ = np.abs(v) ** 2
        return occ / occ.sum()


class SpectrumBackend(ABC):
    """A method for computing every eigenvalue of a chain Hamiltonian."""

    name: BackendName

    @abstractmethod
    def check(self, params: LatticeParams) -> None:
        """Raise InvalidParameterError if the backend cannot handle params."""

    @abstractmethod
    def solve(self, params: LatticeParams, want_vectors: bool = False) -> Spectrum:
        pass


def get_backend(name: BackendName = "dense-qr", seed: int = 0) -> SpectrumBackend:
    """Return a backend instance by tag."""
    from .dense import DenseQRBackend
    from .roots import CharPolyRootsBackend

    if name == "dense-qr":
        return DenseQRBackend(seed=seed)
    if name == "charpoly-roots":
        return CharPolyRootsBackend()
    raise ValueError(f"unknown spectrum backend: {name}")

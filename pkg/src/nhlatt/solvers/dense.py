import numpy as np
import scipy.linalg
from loguru import logger

from ..errors import InvalidParameterError, NoConvergenceError
from ..lattice import LatticeParams, TridiagOperator, apply, build_hamiltonian, dense_matrix
from .core import Spectrum, SpectrumBackend

MAX_DENSE_SITES = 2000
INVERSE_ITERATIONS = 2
RESIDUAL_WARN = 1e-7


def _shifted_solve(op: TridiagOperator, shift: complex, rhs: np.ndarray) -> np.ndarray:
    """Solve (H - shift*I) x = rhs with a pivoted banded LU; nudge shift off exact singularity."""
    scale = max(1.0, abs(shift))
    for attempt in range(4):
        mu = shift + (1e-13 * scale * (1 + 1j) * 10**attempt if attempt else 0.0)
        try:
            x = scipy.linalg.solve_banded((1, 1), op.banded(shift=-mu), rhs, check_finite=False)
        except (scipy.linalg.LinAlgError, ValueError):
            continue
        if np.all(np.isfinite(x)) and np.any(x != 0):
            return x
    raise NoConvergenceError(f"inverse iteration failed at lambda={shift:.6g}")


def inverse_iteration(
    op: TridiagOperator,
    lam: complex,
    rng: np.random.Generator,
    iterations: int = INVERSE_ITERATIONS,
) -> tuple[np.ndarray, float, float]:
    """
    Right eigenvector for an approximate eigenvalue.

    Returns (vector, relative residual, 1 - |overlap| of the last two iterates).
    """
    x = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
    x /= np.linalg.norm(x)
    previous = x
    for _ in range(iterations):
        previous = x
        x = _shifted_solve(op, lam, x)
        x /= np.linalg.norm(x)

    residual = float(np.linalg.norm(apply(op, x) - lam * x))
    drift = float(1.0 - abs(np.vdot(previous, x)))
    # fix the global phase: largest component real and positive
    pivot = x[np.argmax(np.abs(x))]
    x = x * (abs(pivot) / pivot)
    return x, residual, drift


class DenseQRBackend(SpectrumBackend):
    """LAPACK Hessenberg QR eigenvalues plus banded inverse iteration for vectors."""

    name = "dense-qr"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def check(self, params: LatticeParams) -> None:
        if params.L > MAX_DENSE_SITES:
            raise InvalidParameterError(
                f"dense solve limited to L <= {MAX_DENSE_SITES}, got L={params.L}"
            )

    def solve(self, params: LatticeParams, want_vectors: bool = False) -> Spectrum:
        self.check(params)
        op = build_hamiltonian(params)
        try:
            eigenvalues = scipy.linalg.eigvals(dense_matrix(op), overwrite_a=True, check_finite=False)
        except scipy.linalg.LinAlgError as e:
            # LAPACK reports the first eigenvalue index it failed on
            raise NoConvergenceError(f"QR iteration did not converge: {e}") from e
        if not np.all(np.isfinite(eigenvalues)):
            bad = int(np.flatnonzero(~np.isfinite(eigenvalues))[0])
            raise NoConvergenceError("QR iteration returned non-finite eigenvalue", index=bad)

        if not want_vectors:
            return Spectrum(eigenvalues=eigenvalues, params=params, backend=self.name)

        rng = np.random.default_rng(self.seed)
        vectors = np.empty((params.L, params.L), dtype=complex)
        near_defective = []
        for i, lam in enumerate(eigenvalues):
            v, residual, drift = inverse_iteration(op, lam, rng)
            vectors[:, i] = v
            if residual > RESIDUAL_WARN or drift > 1e-6:
                near_defective.append(i)

        if near_defective:
            logger.warning(
                f"{len(near_defective)} near-defective eigenvectors for "
                f"L={params.L}, q={params.q}, impurity={params.impurity:.6g}"
            )
        return Spectrum(
            eigenvalues=eigenvalues,
            params=params,
            backend=self.name,
            eigenvectors=vectors,
            near_defective=tuple(near_defective),
        )


def solve_dense(params: LatticeParams, want_vectors: bool = False, seed: int = 0) -> Spectrum:
    return DenseQRBackend(seed=seed).solve(params, want_vectors)

import os

import numpy as np
from loguru import logger
from scipy.optimize import linear_sum_assignment


def hausdorff_distance(a, b) -> float:
    """Hausdorff distance between two finite point sets in the complex plane."""
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if a.size == 0 or b.size == 0:
        return 0.0 if a.size == b.size else float("inf")
    d = np.abs(a[:, None] - b[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def matching_distance(a, b) -> float:
    """
    Largest displacement in the optimal one-to-one matching of two equally
    sized multisets. Unlike the Hausdorff distance it sees multiplicities.
    """
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if a.size != b.size:
        raise ValueError(f"multisets differ in size: {a.size} != {b.size}")
    if a.size == 0:
        return 0.0
    d = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(d)
    return float(d[rows, cols].max())


def mirror_distance(eigenvalues) -> float:
    """Distance between a spectrum and its image under lam -> -conj(lam)."""
    ev = np.asarray(eigenvalues, dtype=complex)
    return matching_distance(ev, -np.conj(ev))


def unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def overlap_defect(u: np.ndarray, v: np.ndarray) -> float:
    """1 - |<u|v>| for unit-normalized u, v; 0 means parallel."""
    value = 1.0 - abs(np.vdot(unit(u), unit(v)))
    return float(min(max(value, 0.0), 1.0))


def worker_count(default: int | None = None) -> int:
    """Scan parallelism: NHLATT_THREADS, then ``default``, then the processor count."""
    value = os.environ.get("NHLATT_THREADS")
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            logger.warning(f"ignoring non-integer NHLATT_THREADS={value!r}")
    return default or os.cpu_count() or 1

"""
Gaussian wavepacket scattering off the impurity.

Time evolution uses Crank-Nicolson steps with step-doubling error control:
every step is taken once with dt and twice with dt/2, the difference gives
the local error estimate and the two half steps are kept, so the norm lost
equals the accumulated absorption to rounding.
"""

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from loguru import logger
from pydantic import BaseModel, Field, model_validator

from .errors import (
    InvalidParameterError,
    NoValidWindowError,
    OverlapViolationError,
    StepUnderflowError,
)
from .lattice import LatticeParams, TridiagOperator, apply, build_hamiltonian

MIN_DT = 1e-12
ROUNDING_FLOOR = 1e-13
DEFAULT_SAFETY = 0.8
DEFAULT_OVERLAP_MAX = 1e-4
MAX_DENSE_PROPAGATION = 64

StepCallback = Callable[[float, np.ndarray], None]


class WavepacketSpec(BaseModel):
    sigma: float = Field(gt=1.0, description="Width in sites")
    k: float = Field(gt=0.0, lt=np.pi, description="Lattice momentum")
    j0: int | None = Field(default=None, description="Initial center site; L//4 if unset")

    def center(self, L: int) -> int:
        return self.j0 if self.j0 is not None else L // 4

    @property
    def group_velocity(self) -> float:
        return 2.0 * np.sin(self.k)


@dataclass(frozen=True)
class WaveState:
    amplitudes: np.ndarray
    time: float = 0.0

    @property
    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    @property
    def occupancies(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


class RtaFractions(BaseModel):
    R: float
    T: float
    A: float


class RtaPoint(BaseModel):
    gamma: float
    k: float
    R: float = Field(ge=0.0, le=1.0)
    T: float = Field(ge=0.0, le=1.0)
    A: float = Field(ge=-1e-9, le=1.0)
    t_obs: float
    norm_final: float
    absorbed_integral: float

    @model_validator(mode="after")
    def check_sum(self) -> "RtaPoint":
        if abs(self.R + self.T + self.A - 1.0) > 1e-12:
            raise ValueError("R + T + A must equal 1")
        return self


def init_wavepacket(
    L: int,
    spec: WavepacketSpec,
    q: int | None = None,
    overlap_max: float = DEFAULT_OVERLAP_MAX,
) -> WaveState:
    """
    psi_j = N^-1 exp(-(j - j0)^2 / 2 sigma^2) exp(i k j), unit norm at t = 0.

    The occupancy on the two edge sites and on the impurity site must stay
    below overlap_max.
    """
    j0 = spec.center(L)
    if not 1 <= j0 <= L:
        raise InvalidParameterError(f"j0={j0} outside the chain [1, {L}]")
    if spec.sigma >= L / 2:
        raise InvalidParameterError(f"sigma={spec.sigma} must be well below L/2={L / 2}")

    j = np.arange(1, L + 1)
    psi = np.exp(-((j - j0) ** 2) / (2 * spec.sigma**2)) * np.exp(1j * spec.k * j)
    psi /= np.linalg.norm(psi)

    watched = {1, L} | ({q} if q is not None else set())
    overlap = float(sum(abs(psi[s - 1]) ** 2 for s in watched))
    if overlap > overlap_max:
        raise OverlapViolationError(overlap, overlap_max)
    return WaveState(amplitudes=psi, time=0.0)


def _cn_step(op: TridiagOperator, psi: np.ndarray, dt: float) -> np.ndarray:
    """(I + iH dt/2) psi' = (I - iH dt/2) psi."""
    half = 0.5j * dt
    rhs = psi - half * apply(op, psi)
    return scipy.linalg.solve_banded((1, 1), op.banded(shift=1.0, scale=half), rhs, check_finite=False)


def _loss_rate(op: TridiagOperator, psi: np.ndarray) -> float:
    """-d|psi|^2/dt = -2 sum_j Im(H_jj) |psi_j|^2."""
    return float(-2.0 * np.sum(op.diag.imag * np.abs(psi) ** 2))


@dataclass
class CrankNicolson:
    """
    Adaptive Crank-Nicolson propagator.

    ``tol`` bounds the global 2-norm error: each accepted step must have
    local error below tol * dt / t_final, but never below ROUNDING_FLOOR
    times the norm, where the step-doubling difference is rounding noise.
    With ``fixed_dt`` set the propagator takes plain, uncontrolled
    Crank-Nicolson steps.
    """

    op: TridiagOperator
    tol: float = 1e-8
    fixed_dt: float | None = None
    dt_initial: float | None = None

    steps: int = field(default=0, init=False)
    rejected: int = field(default=0, init=False)
    absorbed: float = field(default=0.0, init=False)
    norm_violations: int = field(default=0, init=False)

    def __post_init__(self):
        if not 1e-12 <= self.tol <= 1e-4:
            raise InvalidParameterError(f"tol must lie in [1e-12, 1e-4], got {self.tol}")
        if self.dt_initial is None:
            gamma = float(np.max(-self.op.diag.imag, initial=0.0))
            self.dt_initial = 0.05 / max(1.0, gamma)

    def _accumulate(self, psi_a: np.ndarray, psi_b: np.ndarray, dt: float):
        # exact continuity for a Crank-Nicolson step
        self.absorbed += dt * _loss_rate(self.op, 0.5 * (psi_a + psi_b))

    def run(
        self,
        state: WaveState,
        t_final: float,
        checkpoints: Sequence[float] = (),
        on_checkpoint: StepCallback | None = None,
    ) -> WaveState:
        if t_final < state.time:
            raise InvalidParameterError(f"t_final={t_final} precedes state time {state.time}")
        t, psi = state.time, state.amplitudes.astype(complex)
        span = max(t_final - t, MIN_DT)
        pending = sorted(c for c in checkpoints if t <= c <= t_final)
        if pending and on_checkpoint is not None and pending[0] == t:
            on_checkpoint(t, psi)
            pending.pop(0)

        dt = self.fixed_dt or self.dt_initial
        norm = float(np.vdot(psi, psi).real)
        while t < t_final:
            target = pending[0] if pending else t_final
            hit = dt >= target - t
            h = target - t if hit else dt
            if self.fixed_dt is not None:
                new = _cn_step(self.op, psi, h)
                self._accumulate(psi, new, h)
            else:
                full = _cn_step(self.op, psi, h)
                mid = _cn_step(self.op, psi, h / 2)
                half = _cn_step(self.op, mid, h / 2)
                error = float(np.linalg.norm(half - full)) / 3.0
                allowed = max(self.tol * h / span, ROUNDING_FLOOR * np.sqrt(norm))
                if error > allowed:
                    self.rejected += 1
                    dt = h * max(0.2, 0.9 * (allowed / error) ** 0.5)
                    if dt < MIN_DT:
                        raise StepUnderflowError(dt, t)
                    continue
                self._accumulate(psi, mid, h / 2)
                self._accumulate(mid, half, h / 2)
                new = half
                grow = 2.0 if error == 0 else 0.9 * (allowed / error) ** 0.5
                if not hit:
                    dt = h * min(2.0, max(0.2, grow))

            new_norm = float(np.vdot(new, new).real)
            if new_norm > norm + 1e-13 + self.tol * h / span:
                self.norm_violations += 1
                logger.warning(f"norm increased at t={t + h:.6g}: {norm:.15f} -> {new_norm:.15f}")
            t, psi, norm = (target if hit else t + h), new, new_norm
            if hit and pending:
                pending.pop(0)
                if on_checkpoint is not None:
                    on_checkpoint(t, psi)
            self.steps += 1

        logger.debug(
            f"propagated to t={t:.6g} in {self.steps} steps ({self.rejected} rejected)"
        )
        return WaveState(amplitudes=psi, time=float(t_final))


def propagate(
    op: TridiagOperator,
    state: WaveState,
    t_final: float,
    tol: float = 1e-8,
    fixed_dt: float | None = None,
) -> WaveState:
    """State at t_final under exp(-iHt) with global error at most tol."""
    return CrankNicolson(op=op, tol=tol, fixed_dt=fixed_dt).run(state, t_final)


def propagate_dense(op: TridiagOperator, state: WaveState, t_final: float) -> WaveState:
    """Scaling-and-squaring matrix exponential, for chains of at most 64 sites."""
    from .lattice import dense_matrix

    if op.dim > MAX_DENSE_PROPAGATION:
        raise InvalidParameterError(f"dense propagation limited to L <= {MAX_DENSE_PROPAGATION}")
    u = scipy.linalg.expm(-1j * (t_final - state.time) * dense_matrix(op))
    return WaveState(amplitudes=u @ state.amplitudes, time=t_final)


def spectral_propagate(op: TridiagOperator, state: WaveState, t_final: float) -> WaveState:
    """psi(t) = sum_i c_i exp(-i lambda_i t) v_i from a dense eigendecomposition."""
    from .lattice import dense_matrix

    values, vectors = scipy.linalg.eig(dense_matrix(op))
    coefficients = scipy.linalg.solve(vectors, state.amplitudes)
    phases = np.exp(-1j * values * (t_final - state.time))
    return WaveState(amplitudes=vectors @ (phases * coefficients), time=t_final)


def measure_rta(state: WaveState, q: int) -> RtaFractions:
    """R left of and including q, T right of q, A the remainder of the unit initial norm."""
    occ = state.occupancies
    R = float(occ[:q].sum())
    T = float(occ[q:].sum())
    return RtaFractions(R=R, T=T, A=1.0 - R - T)


def observation_time(L: int, q: int, spec: WavepacketSpec, safety: float = DEFAULT_SAFETY) -> float:
    """
    Time after which both scattered packets have cleared the impurity but
    neither has reached a boundary.

    The incoming packet reaches q at (q - j0)/v_g; both outgoing packets then
    travel safety * min(q - 1, L - q) sites, and at least 3 sigma. Only the
    3 sigma floor has to fit before the nearer boundary.
    """
    j0 = spec.center(L)
    v = spec.group_velocity
    if j0 >= q:
        raise NoValidWindowError(f"packet center j0={j0} must start left of the impurity q={q}")
    room = min(q - 1, L - q)
    travelled = max(safety * room, 3 * spec.sigma)
    if 3 * spec.sigma > room:
        raise NoValidWindowError(
            f"no observation window: packets need {3 * spec.sigma:.1f} sites "
            f"past the impurity but the nearer boundary is {room} sites away"
        )
    return ((q - j0) + travelled) / v


def scatter_once(
    L: int,
    q: int,
    spec: WavepacketSpec,
    gamma: float,
    tol: float = 1e-8,
    t_obs: float | None = None,
    safety: float = DEFAULT_SAFETY,
    overlap_max: float = DEFAULT_OVERLAP_MAX,
) -> RtaPoint:
    """One wavepacket run against the impurity -i*gamma, measured at t_obs."""
    params = LatticeParams.absorbing(L, q, gamma)
    if t_obs is None:
        t_obs = observation_time(L, q, spec, safety)
    elif t_obs <= 0:
        raise InvalidParameterError(f"t_obs must be positive, got {t_obs}")

    op = build_hamiltonian(params)
    state = init_wavepacket(L, spec, q=q, overlap_max=overlap_max)
    propagator = CrankNicolson(op=op, tol=tol)
    final = propagator.run(state, t_obs)
    fractions = measure_rta(final, q)

    logger.info(
        f"gamma={gamma:g} k={spec.k:.6g}: R={fractions.R:.6f} T={fractions.T:.6f} "
        f"A={fractions.A:.6f} at t={t_obs:.4g} ({propagator.steps} steps)"
    )
    return RtaPoint(
        gamma=gamma,
        k=spec.k,
        R=fractions.R,
        T=fractions.T,
        A=fractions.A,
        t_obs=t_obs,
        norm_final=final.norm_squared,
        absorbed_integral=propagator.absorbed,
    )


def occupancy_series(
    L: int,
    q: int,
    spec: WavepacketSpec,
    gamma: float,
    t_final: float,
    stride: float,
    tol: float = 1e-8,
    overlap_max: float = DEFAULT_OVERLAP_MAX,
) -> list[tuple[float, int, float]]:
    """(t, j, |psi_j|^2) rows every ``stride`` time units, for density plots."""
    if stride <= 0:
        raise InvalidParameterError(f"stride must be positive, got {stride}")
    op = build_hamiltonian(LatticeParams.absorbing(L, q, gamma))
    state = init_wavepacket(L, spec, q=q, overlap_max=overlap_max)
    times = np.arange(0.0, t_final + 0.5 * stride, stride)
    times = times[times <= t_final]
    rows: list[tuple[float, int, float]] = []

    def record(t: float, psi: np.ndarray):
        occ = np.abs(psi) ** 2
        rows.extend((float(t), j + 1, float(p)) for j, p in enumerate(occ))

    CrankNicolson(op=op, tol=tol).run(state, t_final, checkpoints=times, on_checkpoint=record)
    return rows

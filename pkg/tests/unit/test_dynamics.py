import numpy as np
import pytest
from pydantic import ValidationError

from nhlatt.continuum import lattice_plane_wave_rta
from nhlatt.dynamics import (
    CrankNicolson,
    RtaPoint,
    WavepacketSpec,
    WaveState,
    init_wavepacket,
    measure_rta,
    observation_time,
    occupancy_series,
    propagate,
    propagate_dense,
    scatter_once,
    spectral_propagate,
)
from nhlatt.errors import InvalidParameterError, NoValidWindowError, OverlapViolationError
from nhlatt.lattice import LatticeParams, build_hamiltonian


class TestWavepacket:
    """Tests for the initial Gaussian packet."""

    def test_unit_norm(self, small_packet):
        state = init_wavepacket(120, small_packet, q=60)

        assert state.norm_squared == pytest.approx(1.0, abs=1e-14)
        assert state.time == 0.0
        assert int(np.argmax(state.occupancies)) + 1 == 30

    def test_default_center(self):
        spec = WavepacketSpec(sigma=5.0, k=1.0)

        assert spec.center(200) == 50

    def test_group_velocity(self):
        assert WavepacketSpec(sigma=5.0, k=np.pi / 2).group_velocity == pytest.approx(2.0)

    def test_momentum_range(self):
        with pytest.raises(ValidationError):
            WavepacketSpec(sigma=5.0, k=np.pi)

    def test_edge_overlap(self):
        """A packet touching the edge is rejected."""
        spec = WavepacketSpec(sigma=6.0, k=1.0, j0=5)
        with pytest.raises(OverlapViolationError):
            init_wavepacket(120, spec)

    def test_impurity_overlap(self):
        spec = WavepacketSpec(sigma=6.0, k=1.0, j0=55)
        with pytest.raises(OverlapViolationError):
            init_wavepacket(120, spec, q=60)

    def test_too_wide(self):
        with pytest.raises(InvalidParameterError):
            init_wavepacket(20, WavepacketSpec(sigma=12.0, k=1.0))


class TestPropagation:
    """Crank-Nicolson against exact propagators."""

    def test_matches_matrix_exponential(self):
        params = LatticeParams.absorbing(30, 15, 1.5)
        op = build_hamiltonian(params)
        state = init_wavepacket(30, WavepacketSpec(sigma=2.0, k=1.2, j0=8), q=15)

        cn = propagate(op, state, 6.0, tol=1e-9)
        exact = propagate_dense(op, state, 6.0)

        assert np.linalg.norm(cn.amplitudes - exact.amplitudes) < 1e-7
        assert cn.time == 6.0

    def test_spectral_propagator(self):
        params = LatticeParams.absorbing(20, 10, 0.7)
        op = build_hamiltonian(params)
        state = init_wavepacket(20, WavepacketSpec(sigma=2.0, k=1.0, j0=6), q=10)

        a = spectral_propagate(op, state, 3.0)
        b = propagate_dense(op, state, 3.0)

        assert np.linalg.norm(a.amplitudes - b.amplitudes) < 1e-10

    def test_norm_conserved_without_absorption(self):
        op = build_hamiltonian(LatticeParams.absorbing(60, 30, 0.0))
        state = init_wavepacket(60, WavepacketSpec(sigma=4.0, k=1.0, j0=15))
        propagator = CrankNicolson(op=op, tol=1e-8)
        final = propagator.run(state, 10.0)

        assert final.norm_squared == pytest.approx(1.0, abs=1e-8)
        assert propagator.absorbed == pytest.approx(0.0, abs=1e-14)
        assert propagator.norm_violations == 0

    def test_norm_never_grows(self):
        """|psi|^2 is non-increasing for a non-positive imaginary potential."""
        op = build_hamiltonian(LatticeParams.absorbing(60, 30, 2.0))
        state = init_wavepacket(60, WavepacketSpec(sigma=4.0, k=1.5, j0=15), q=30)
        norms = []

        propagator = CrankNicolson(op=op, tol=1e-8)
        propagator.run(
            state,
            20.0,
            checkpoints=np.arange(0.0, 20.5, 1.0),
            on_checkpoint=lambda t, psi: norms.append(float(np.vdot(psi, psi).real)),
        )

        assert len(norms) == 21
        assert np.all(np.diff(norms) <= 1e-10)
        assert propagator.norm_violations == 0

    def test_absorbed_integral(self):
        """The integrated loss rate accounts for the norm that disappeared."""
        op = build_hamiltonian(LatticeParams.absorbing(60, 30, 2.0))
        state = init_wavepacket(60, WavepacketSpec(sigma=4.0, k=1.5, j0=15), q=30)
        propagator = CrankNicolson(op=op, tol=1e-8)
        final = propagator.run(state, 15.0)

        assert propagator.absorbed > 0.1
        assert propagator.absorbed + final.norm_squared == pytest.approx(1.0, abs=1e-6)

    def test_stiff_impurity(self):
        """Steps shrink until the difference is rounding noise, then the controller accepts them."""
        L, q = 20, 10
        op = build_hamiltonian(LatticeParams.absorbing(L, q, 1000.0))
        psi = np.zeros(L, dtype=complex)
        psi[q - 1] = 1.0
        state = WaveState(amplitudes=psi)
        propagator = CrankNicolson(op=op, tol=1e-10)

        final = propagator.run(state, 0.2)
        exact = propagate_dense(op, state, 0.2)

        assert np.linalg.norm(final.amplitudes - exact.amplitudes) < 1e-6
        assert final.norm_squared < 1e-4
        assert propagator.absorbed + final.norm_squared == pytest.approx(1.0, abs=1e-9)

    def test_fixed_step(self):
        op = build_hamiltonian(LatticeParams.absorbing(30, 15, 1.0))
        state = init_wavepacket(30, WavepacketSpec(sigma=2.0, k=1.0, j0=8), q=15)
        propagator = CrankNicolson(op=op, fixed_dt=0.01)
        final = propagator.run(state, 1.0)

        assert propagator.steps in (100, 101)
        assert propagator.rejected == 0
        assert final.time == 1.0

    def test_tolerance_range(self):
        op = build_hamiltonian(LatticeParams.absorbing(10, 5, 1.0))
        with pytest.raises(InvalidParameterError):
            CrankNicolson(op=op, tol=1e-3)

    def test_backwards_rejected(self):
        op = build_hamiltonian(LatticeParams.absorbing(10, 5, 1.0))
        state = WaveState(amplitudes=np.eye(10)[3].astype(complex), time=2.0)
        with pytest.raises(InvalidParameterError):
            CrankNicolson(op=op).run(state, 1.0)


class TestMeasurement:
    def test_measure_rta(self):
        psi = np.zeros(10, dtype=complex)
        psi[2] = np.sqrt(0.25)
        psi[7] = np.sqrt(0.5)
        fractions = measure_rta(WaveState(amplitudes=psi), q=5)

        assert fractions.R == pytest.approx(0.25)
        assert fractions.T == pytest.approx(0.5)
        assert fractions.A == pytest.approx(0.25)

    def test_point_sum_enforced(self):
        with pytest.raises(ValidationError):
            RtaPoint(gamma=1, k=1, R=0.5, T=0.5, A=0.1, t_obs=1, norm_final=1, absorbed_integral=0)


class TestObservationTime:
    def test_default_geometry(self):
        """L = 500, q = 250, sigma = 40, k = pi/2 observes at t = 162.1."""
        spec = WavepacketSpec(sigma=40.0, k=np.pi / 2)

        assert observation_time(500, 250, spec) == pytest.approx(162.1, abs=1e-9)

    def test_packet_right_of_impurity(self):
        spec = WavepacketSpec(sigma=4.0, k=1.0, j0=80)
        with pytest.raises(NoValidWindowError):
            observation_time(120, 60, spec)

    def test_wide_packet(self):
        """sigma = 50 still fits: only the 3 sigma floor must clear the boundary."""
        spec = WavepacketSpec(sigma=50.0, k=np.pi / 2)

        assert observation_time(500, 250, spec) == pytest.approx(162.1, abs=1e-9)

    def test_chain_too_short(self):
        spec = WavepacketSpec(sigma=10.0, k=1.0, j0=10)
        with pytest.raises(NoValidWindowError):
            observation_time(60, 30, spec)


class TestScatterOnce:
    def test_transparent(self, small_packet):
        """gamma = 0: nothing is reflected or absorbed."""
        point = scatter_once(120, 60, small_packet, 0.0, tol=1e-6)

        assert point.R == pytest.approx(0.0, abs=1e-6)
        assert point.T == pytest.approx(1.0, abs=1e-6)
        assert point.A == pytest.approx(0.0, abs=1e-6)

    def test_half_absorbed_at_two(self, small_packet):
        """At k = pi/2 and gamma = 2 the plane-wave absorption is 1/2."""
        point = scatter_once(120, 60, small_packet, 2.0, tol=1e-6)
        oracle = lattice_plane_wave_rta(np.pi / 2, 2.0)

        assert point.A == pytest.approx(oracle.A, abs=0.02)
        assert point.R == pytest.approx(oracle.R, abs=0.02)
        assert point.T == pytest.approx(oracle.T, abs=0.02)
        assert point.absorbed_integral == pytest.approx(point.A, abs=1e-4)
        assert point.R + point.T + point.A == pytest.approx(1.0, abs=1e-12)

    def test_strong_impurity_reflects(self, small_packet):
        """A very strong absorber acts as a wall: almost everything comes back."""
        point = scatter_once(120, 60, small_packet, 1000.0, tol=1e-7)

        assert point.R > 0.95
        assert point.A < 0.02
        assert point.absorbed_integral == pytest.approx(point.A, abs=1e-6)

    def test_explicit_observation_time(self, small_packet):
        point = scatter_once(120, 60, small_packet, 1.0, tol=1e-6, t_obs=30.0)

        assert point.t_obs == 30.0


class TestOccupancySeries:
    def test_rows(self, small_packet):
        rows = occupancy_series(120, 60, small_packet, 1.0, t_final=4.0, stride=2.0, tol=1e-6)
        times = sorted({t for t, _, _ in rows})

        assert times == [0.0, 2.0, 4.0]
        assert len(rows) == 3 * 120
        first = [occ for t, _, occ in rows if t == 0.0]
        assert sum(first) == pytest.approx(1.0)

    def test_stride_positive(self, small_packet):
        with pytest.raises(InvalidParameterError):
            occupancy_series(120, 60, small_packet, 1.0, t_final=4.0, stride=0.0)

import numpy as np
import pytest

from nhlatt.continuum import (
    ContinuumParams,
    continuum_amplitudes,
    continuum_rta,
    gamma_star,
    lattice_plane_wave_amplitudes,
    lattice_plane_wave_rta,
)


class TestContinuum:
    """Closed forms for the delta potential."""

    def test_limits(self):
        assert continuum_amplitudes(ContinuumParams(k=1.0, gamma=0.0)) == (0j, 1 + 0j)
        assert continuum_amplitudes(ContinuumParams(k=1.0, gamma=float("inf"))) == (-1 + 0j, 0j)

    def test_flux(self):
        for gamma in (0.1, 1.0, 3.0, 25.0):
            rta = continuum_rta(ContinuumParams(k=0.8, gamma=gamma))
            assert rta.R + rta.T + rta.A == pytest.approx(1.0)
            assert rta.A >= 0

    def test_maximum_half(self):
        """A peaks at 1/2 where gamma = k hbar^2 / m."""
        k = 1.3
        g_star = gamma_star(k)
        rta = continuum_rta(ContinuumParams(k=k, gamma=g_star))

        assert g_star == pytest.approx(2 * k)
        assert rta.A == pytest.approx(0.5)
        for g in (0.9 * g_star, 1.1 * g_star):
            assert continuum_rta(ContinuumParams(k=k, gamma=g)).A < 0.5

    def test_units(self):
        assert gamma_star(1.0, hbar=2.0, m=1.0) == pytest.approx(4.0)

    def test_gamma_star_needs_positive_k(self):
        with pytest.raises(ValueError):
            gamma_star(0.0)


class TestLatticePlaneWave:
    def test_amplitudes(self):
        r, t = lattice_plane_wave_amplitudes(np.pi / 2, 2.0)

        assert r == pytest.approx(-0.5)
        assert t == pytest.approx(0.5)

    def test_large_gamma(self):
        """A(10) = 40/144 at k = pi/2: strong absorbers mostly reflect."""
        rta = lattice_plane_wave_rta(np.pi / 2, 10.0)

        assert rta.A == pytest.approx(40 / 144)
        assert rta.R == pytest.approx(100 / 144)

    def test_maximum_at_two_sin_k(self):
        k = 0.9
        peak = 2 * np.sin(k)
        best = lattice_plane_wave_rta(k, peak).A

        assert best == pytest.approx(0.5)
        assert lattice_plane_wave_rta(k, 0.8 * peak).A < best
        assert lattice_plane_wave_rta(k, 1.2 * peak).A < best

"""
Full-size reference runs. Slow; selected with ``pytest -m slow``.
"""

import numpy as np
import pytest

from nhlatt.continuum import lattice_plane_wave_rta
from nhlatt.dynamics import WavepacketSpec, scatter_once
from nhlatt.experiments.scattering import extract_gamma_star, scan_k, scan_rta
from nhlatt.experiments.spectra import classify_ep_structure, gamma_one_series
from nhlatt.lattice import LatticeParams
from nhlatt.spectral import solve

pytestmark = pytest.mark.slow

TOL = 1e-8


@pytest.fixture(scope="module")
def half_pi_scan():
    spec = WavepacketSpec(sigma=40.0, k=np.pi / 2)
    return scan_rta(np.linspace(0.0, 10.0, 41), 500, 250, spec, tol=TOL, n_jobs=1)


class TestAbsorptionScan:
    """Wavepacket scan across the impurity strength at k = pi/2."""

    def test_every_point_succeeds(self, half_pi_scan):
        assert not half_pi_scan.failures
        assert len(half_pi_scan.points) == 41

    def test_maximum_near_two(self, half_pi_scan):
        points = half_pi_scan.points
        best = points[int(np.argmax([p.A for p in points]))]

        assert 1.6 <= best.gamma <= 2.4
        assert extract_gamma_star(half_pi_scan) == pytest.approx(2.0, abs=0.3)

    def test_monotone_reflection_and_transmission(self, half_pi_scan):
        assert half_pi_scan.r_nondecreasing
        assert half_pi_scan.t_nonincreasing

    def test_strong_impurity_matches_plane_wave(self, half_pi_scan):
        last = half_pi_scan.points[-1]

        assert last.gamma == 10.0
        assert last.A == pytest.approx(lattice_plane_wave_rta(np.pi / 2, 10.0).A, abs=0.03)

    def test_absorption_bookkeeping(self, half_pi_scan):
        for p in half_pi_scan.points:
            assert abs(p.A - p.absorbed_integral) < 10 * TOL


class TestSingleRuns:
    def test_hard_wall(self):
        point = scatter_once(500, 250, WavepacketSpec(sigma=40.0, k=np.pi / 2), 1000.0, tol=TOL)

        assert point.R > 0.95
        assert point.A < 0.02

    def test_packet_width_insensitive(self):
        narrow = scatter_once(500, 250, WavepacketSpec(sigma=30.0, k=np.pi / 2), 2.0, tol=TOL)
        wide = scatter_once(500, 250, WavepacketSpec(sigma=50.0, k=np.pi / 2), 2.0, tol=TOL)

        assert abs(narrow.R - wide.R) < 0.02
        assert abs(narrow.T - wide.T) < 0.02
        assert abs(narrow.A - wide.A) < 0.02


class TestMomentumScan:
    def test_gamma_star_follows_group_velocity(self):
        ks = [np.pi / 4, np.pi / 2, 3 * np.pi / 4]
        rows = scan_k(ks, np.linspace(0.0, 4.0, 33), 250, 125, sigma=15.0, tol=TOL, n_jobs=1)

        for row in rows:
            assert row.error is None
            assert abs(row.gamma_star - 2 * np.sin(row.k)) <= 0.3


class TestTaxonomy:
    @pytest.mark.parametrize("L", [6, 10, 14, 30])
    def test_all_paired(self, L):
        assert classify_ep_structure(L).classification == "all-paired-EP"

    @pytest.mark.parametrize("L", [8, 12, 16])
    def test_extra(self, L):
        assert classify_ep_structure(L).classification == "extra-EP"

    @pytest.mark.parametrize("L", [7, 11])
    def test_third_order(self, L):
        assert classify_ep_structure(L).classification == "third-order-EP"

    @pytest.mark.parametrize("L", [9, 13])
    def test_none(self, L):
        assert classify_ep_structure(L).classification == "no-EP"

    def test_extra_ep_moves_toward_two(self):
        series = [g for _, g in gamma_one_series([8, 12, 16])]

        assert series == sorted(series, reverse=True)
        assert all(g > 2.0 for g in series)


def test_strong_impurity_level():
    spectrum = solve(LatticeParams.absorbing(14, 7, 10.0))
    deepest = min(spectrum.eigenvalues, key=lambda z: z.imag)

    assert deepest.imag == pytest.approx(-np.sqrt(96.0), abs=1e-3)

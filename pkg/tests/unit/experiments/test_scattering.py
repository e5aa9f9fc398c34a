from unittest import mock

import numpy as np
import pytest
from pydantic import ValidationError

from nhlatt.cache import ResultCache
from nhlatt.continuum import lattice_plane_wave_rta
from nhlatt.dynamics import RtaPoint, WavepacketSpec
from nhlatt.errors import InvalidParameterError, MaxAtBoundaryError
from nhlatt.experiments.scattering import (
    ScanGrid,
    continuum_scan,
    extract_gamma_star,
    gamma_star_from_curve,
    monotonicity_diagnostics,
    scan_rta,
)


def _point(gamma: float, k: float = np.pi / 2) -> RtaPoint:
    rta = lattice_plane_wave_rta(k, gamma)
    return RtaPoint(
        gamma=gamma, k=k, R=rta.R, T=rta.T, A=1.0 - rta.R - rta.T, t_obs=1.0, norm_final=0.0, absorbed_integral=0.0
    )


class TestScanGrid:
    def test_linspace(self):
        grid = ScanGrid.linspace("gamma", 0.0, 10.0, 41)

        assert len(grid.values) == 41
        assert grid.values[-1] == 10.0

    def test_must_increase(self):
        with pytest.raises(ValidationError):
            ScanGrid(variable="gamma", values=[1.0, 0.5])


class TestGammaStar:
    """Tests for locating the absorption maximum on a scan."""

    def test_plane_wave_curve(self):
        """On the exact lattice curve the maximum sits at 2 sin k."""
        gammas = np.linspace(0.0, 6.0, 25)
        k = np.pi / 4
        absorption = [lattice_plane_wave_rta(k, g).A for g in gammas]

        assert gamma_star_from_curve(gammas, absorption) == pytest.approx(2 * np.sin(k), rel=0.05)

    def test_from_points(self):
        points = [_point(g) for g in np.linspace(0.0, 5.0, 11)]

        assert extract_gamma_star(points) == pytest.approx(2.0, abs=0.2)

    def test_maximum_at_boundary(self):
        gammas = np.linspace(0.0, 1.0, 9)
        with pytest.raises(MaxAtBoundaryError):
            gamma_star_from_curve(gammas, gammas)

    def test_too_few_points(self):
        with pytest.raises(InvalidParameterError):
            gamma_star_from_curve([0.0, 1.0, 2.0], [0.0, 1.0, 0.0])

    def test_continuum(self):
        """The continuum curve peaks at 2k within the grid spacing."""
        k = np.pi / 2
        gammas = np.linspace(0.0, 10.0, 101)
        rows = continuum_scan(k, gammas)
        best = max(rows, key=lambda row: row[3])[0]

        assert best == pytest.approx(np.pi, abs=0.1)


class TestDiagnostics:
    def test_plane_wave_shape(self):
        flags = monotonicity_diagnostics([_point(g) for g in np.linspace(0.0, 10.0, 21)])

        assert flags == {"r_nondecreasing": True, "t_nonincreasing": True, "a_unimodal": True}

    def test_two_peaks(self):
        points = [_point(g) for g in (0.0, 2.0, 10.0, 2.0, 10.0)]
        points = [p.model_copy(update={"gamma": float(i)}) for i, p in enumerate(points)]

        assert monotonicity_diagnostics(points)["a_unimodal"] is False


class TestScanRta:
    """Wavepacket scans on a short chain."""

    def test_small_scan(self, small_packet):
        gammas = np.linspace(0.0, 4.0, 9)
        scan = scan_rta(gammas, 120, 60, small_packet, tol=1e-5, n_jobs=1)

        assert [p.gamma for p in scan.points] == list(gammas)
        assert scan.failures == []
        assert scan.points[0].A == pytest.approx(0.0, abs=1e-5)
        assert scan.a_unimodal and scan.r_nondecreasing and scan.t_nonincreasing
        assert extract_gamma_star(scan) == pytest.approx(2.0, abs=0.2)

    def test_failures_annotated(self):
        """A packet that starts right of the impurity fails every point without raising."""
        spec = WavepacketSpec(sigma=4.0, k=1.0, j0=80)
        scan = scan_rta([0.5, 1.0], 120, 60, spec, tol=1e-5, n_jobs=1)

        assert scan.points == []
        assert len(scan.failures) == 2
        assert "NoValidWindowError" in scan.failures[0].error

    def test_cache(self, small_packet, tmp_path):
        cache = ResultCache(tmp_path / "cache")
        first = scan_rta([0.5, 1.5], 120, 60, small_packet, tol=1e-5, n_jobs=1, cache=cache)

        assert len(cache) == 2
        with mock.patch("nhlatt.experiments.scattering._scatter_entry") as run:
            second = scan_rta([0.5, 1.5], 120, 60, small_packet, tol=1e-5, n_jobs=1, cache=cache)
            run.assert_not_called()
        assert [p.A for p in second.points] == [p.A for p in first.points]
        cache.close()

    def test_cache_key_sees_tolerance(self, small_packet, tmp_path):
        cache = ResultCache(tmp_path / "cache")
        a = cache.rta_key(120, 60, small_packet, 1.0, tol=1e-5)
        b = cache.rta_key(120, 60, small_packet, 1.0, tol=1e-6)

        assert a != b
        cache.close()

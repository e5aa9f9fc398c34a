import numpy as np
import pytest

from nhlatt.errors import InvalidParameterError, PoorFitError, WindowTooSmallError
from nhlatt.experiments.localization import (
    fit_localization_length,
    localization_length,
    map_gamma_to_v,
)
from nhlatt.lattice import LatticeParams


def _profile(L: int, q: int, alpha: float) -> np.ndarray:
    j = np.arange(1, L + 1)
    p = np.exp(-2 * np.abs(j - q) / alpha)
    return p / p.sum()


class TestFit:
    """Tests for the exponential tail fit."""

    def test_exact_exponential(self):
        fit = fit_localization_length(_profile(60, 30, 3.0), 30)

        assert fit.alpha == pytest.approx(3.0, rel=1e-10)
        assert fit.r_squared == pytest.approx(1.0)
        assert 30 not in fit.sites
        assert min(fit.sites) > 5 and max(fit.sites) <= 55

    def test_one_sided(self):
        """An impurity near the edge leaves only the long side."""
        fit = fit_localization_length(_profile(40, 8, 2.0), 8)

        assert all(j > 8 for j in fit.sites)
        assert fit.alpha == pytest.approx(2.0, rel=1e-10)

    def test_window_too_small(self):
        with pytest.raises(WindowTooSmallError):
            fit_localization_length(_profile(14, 7, 2.0), 7)

    def test_flat_profile(self):
        with pytest.raises(PoorFitError):
            fit_localization_length(np.full(40, 1 / 40), 20)

    def test_noisy_profile(self):
        rng = np.random.default_rng(0)
        profile = _profile(60, 30, 3.0) * np.exp(rng.normal(0, 2.0, 60))
        with pytest.raises(PoorFitError):
            fit_localization_length(profile, 30, min_r_squared=0.999)


class TestLocalizationLength:
    def test_absorbing(self, bound_chain):
        assert localization_length(bound_chain) == pytest.approx(1 / np.log(2), rel=1e-4)

    def test_delocalized(self):
        assert localization_length(LatticeParams.absorbing(42, 21, 1.5)) == float("inf")

    def test_shrinks_with_gamma(self):
        a = localization_length(LatticeParams.absorbing(42, 21, 2.5))
        b = localization_length(LatticeParams.absorbing(42, 21, 4.0))

        assert b < a


class TestGammaVMap:
    def test_matches_infinite_chain(self):
        """Same localization length as gamma means V = sqrt(gamma^2 - 4)."""
        mapping = map_gamma_to_v([2.5, 4.0], 42)

        assert mapping.q == 21
        np.testing.assert_allclose(mapping.potentials, [1.5, np.sqrt(12.0)], atol=1e-4)
        np.testing.assert_array_equal(mapping.gammas, [2.5, 4.0])

    def test_needs_gamma_above_two(self):
        with pytest.raises(InvalidParameterError):
            map_gamma_to_v([1.5], 42)

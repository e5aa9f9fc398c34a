import numpy as np
import pytest
import scipy.linalg
from pydantic import ValidationError

from nhlatt.charpoly import (
    CharPolyParams,
    charpoly_abs,
    charpoly_derivative,
    charpoly_eval,
    charpoly_newton_ratio,
    k_eval,
    square_root_factor,
    symmetry_check,
)
from nhlatt.lattice import LatticeParams, build_hamiltonian, dense_matrix


def _det(params: CharPolyParams, lam: complex) -> complex:
    h = dense_matrix(build_hamiltonian(params.to_lattice()))
    return complex(np.linalg.det(lam * np.eye(params.L) - h))


class TestRecurrence:
    def test_low_orders(self):
        """K_0 = 1, K_1 = lam, K_2 = lam^2 - 1, K_{-1} = 0."""
        lam = 0.3 + 0.2j

        assert k_eval(-1, lam) == 0
        assert k_eval(0, lam) == 1
        assert k_eval(1, lam) == pytest.approx(lam)
        assert k_eval(2, lam) == pytest.approx(lam**2 - 1)

    def test_chebyshev(self):
        """K_n(2 cos t) = sin((n+1)t) / sin t."""
        t = 0.37
        for n in (3, 10, 41):
            assert k_eval(n, 2 * np.cos(t)) == pytest.approx(np.sin((n + 1) * t) / np.sin(t))

    def test_vectorized(self):
        lam = np.array([0.1, 1.0 + 1j, -3.0])
        values = k_eval(5, lam)

        assert isinstance(values, np.ndarray)
        for i, x in enumerate(lam):
            assert values[i] == pytest.approx(k_eval(5, x))


class TestCharPoly:
    """The closed form against det(lam*I - H)."""

    def test_two_sites(self):
        """P = lam^2 + i*gamma*lam - 1 for L = 2, q = 1."""
        params = CharPolyParams(L=2, q=1, gamma=1.3)
        lam = 0.4 - 0.7j

        assert charpoly_eval(params, lam) == pytest.approx(lam**2 + 1.3j * lam - 1)

    @pytest.mark.parametrize("L,q,gamma", [(5, 1, 0.5), (8, 4, 2.0), (9, 5, 3.1), (12, 3, 1.7)])
    def test_matches_determinant(self, L, q, gamma):
        params = CharPolyParams(L=L, q=q, gamma=gamma)
        for lam in (0.3, 1.1 - 0.4j, -2.5 + 0.1j):
            assert charpoly_eval(params, lam) == pytest.approx(_det(params, lam), rel=1e-10)

    def test_roots_are_eigenvalues(self):
        params = CharPolyParams(L=10, q=5, gamma=1.2)
        ev = scipy.linalg.eigvals(dense_matrix(build_hamiltonian(params.to_lattice())))

        assert np.max(np.abs(charpoly_eval(params, ev))) < 1e-9

    def test_derivative(self):
        """P' against a central difference."""
        params = CharPolyParams(L=11, q=4, gamma=2.2)
        lam, h = 0.7 - 0.3j, 1e-6
        numeric = (charpoly_eval(params, lam + h) - charpoly_eval(params, lam - h)) / (2 * h)

        assert charpoly_derivative(params, lam) == pytest.approx(numeric, rel=1e-6)

    def test_newton_ratio(self):
        params = CharPolyParams(L=7, q=3, gamma=0.9)
        lam = np.array([0.5 + 0.5j])
        ratio = charpoly_newton_ratio(params, lam)

        expected = charpoly_eval(params, lam[0]) / charpoly_derivative(params, lam[0])
        assert ratio[0] == pytest.approx(expected)

    def test_large_chain_no_overflow(self):
        """Far from the band a 400-site chain overflows doubles; the log magnitude stays finite."""
        params = CharPolyParams(L=400, q=200, gamma=2.0)
        value = charpoly_abs(params, np.array([50.0 + 50j]))

        assert np.isfinite(value[0])
        # |P| ~ |lam|^L for large |lam|
        assert value[0] == pytest.approx(400 * np.log2(abs(50 + 50j)), rel=1e-3)

    def test_mirror_symmetry(self):
        params = CharPolyParams(L=9, q=5, gamma=1.4)

        assert symmetry_check(params, 0.8 - 0.2j) < 1e-10

    @pytest.mark.parametrize("L", [6, 10, 14, 18])
    @pytest.mark.parametrize("shift", [0, 1])
    def test_square_at_two(self, L, shift):
        """P_{2m,m} at gamma = 2 is the square of K_m + i*K_{m-1}, on either central site."""
        m = L // 2
        params = CharPolyParams(L=L, q=m + shift, gamma=2.0)
        rng = np.random.default_rng(L + shift)
        for lam in rng.uniform(-2.5, 2.5, 4) + 1j * rng.uniform(-2.0, 2.0, 4):
            assert charpoly_eval(params, lam) == pytest.approx(square_root_factor(m, lam) ** 2, rel=1e-8)


class TestCharPolyParams:
    def test_site_range(self):
        with pytest.raises(ValidationError, match="q out of range"):
            CharPolyParams(L=4, q=5, gamma=1.0)

    def test_from_lattice(self):
        params = CharPolyParams.from_lattice(LatticeParams.absorbing(8, 3, 1.5))

        assert (params.L, params.q, params.gamma) == (8, 3, 1.5)

    def test_real_impurity_rejected(self):
        with pytest.raises(ValueError):
            CharPolyParams.from_lattice(LatticeParams.real_potential(8, 3, 1.5))

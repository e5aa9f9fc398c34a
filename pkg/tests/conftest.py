import numpy as np
import pytest
from typer.testing import CliRunner

from nhlatt.dynamics import WavepacketSpec
from nhlatt.lattice import LatticeParams


@pytest.fixture
def runner():
    """Create a CLI runner for testing."""
    return CliRunner()


@pytest.fixture
def paired_chain():
    """14 sites, central impurity, at the strength where every eigenvalue pairs up."""
    return LatticeParams.absorbing(14, 7, 2.0)


@pytest.fixture
def bound_chain():
    """Chain long enough for a clean exponential tail at gamma = 2.5."""
    return LatticeParams.absorbing(42, 21, 2.5)


@pytest.fixture
def small_packet():
    """A packet that fits a 120-site chain with the impurity at 60."""
    return WavepacketSpec(sigma=6.0, k=np.pi / 2, j0=30)


@pytest.fixture
def config_file(tmp_path):
    """Creates a config file holding stored spectrum parameters."""
    path = tmp_path / "nhlatt.yaml"
    path.write_text(
        """
tol: 1.0e-06
seed: 3
format: csv
run:
  command: spectrum
  parameters:
    L: 6
    gamma: 1.0
"""
    )
    return path

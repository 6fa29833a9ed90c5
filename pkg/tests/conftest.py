import numpy as np
import pytest

from vanhove.phasespace import PhaseSpaceGrid


def gaussian_phi(grid, center=(0.0, 0.0), widths=(1.0, 1.0), k=(0.0, 0.0)):
    """Normalized complex Gaussian test state with an optional plane phase."""
    Q, P = grid.mesh()
    q0, p0 = center
    wq, wp = widths
    amp = np.exp(-(Q - q0) ** 2 / (4 * wq ** 2) - (P - p0) ** 2 / (4 * wp ** 2))
    phi = amp * np.exp(1j * (k[0] * Q + k[1] * P))
    from vanhove.phasespace import norm_l2
    return phi / norm_l2(grid, phi)


@pytest.fixture
def grid64():
    return PhaseSpaceGrid(-8.0, 8.0, 64, -8.0, 8.0, 64)


@pytest.fixture
def grid128():
    return PhaseSpaceGrid(-8.0, 8.0, 128, -8.0, 8.0, 128)


@pytest.fixture
def grid256():
    return PhaseSpaceGrid(-8.0, 8.0, 256, -8.0, 8.0, 256)

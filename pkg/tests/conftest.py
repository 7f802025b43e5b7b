import numpy as np
import pytest

from capillary_minkowski import CapSpec, ExponentPair, PolarGrid


THETA = np.pi / 3.0


@pytest.fixture(scope="session")
def spec():
    return CapSpec(theta=THETA)


@pytest.fixture(scope="session")
def grid32(spec):
    return PolarGrid(spec, 32, 32)


@pytest.fixture(scope="session")
def grid48(spec):
    return PolarGrid(spec, 48, 48)


@pytest.fixture(scope="session")
def pq31():
    return ExponentPair(p=3.0, q=1.0)


def smooth_field(grid, rng, modes=4, radial_powers=3):
    """Random smooth-on-the-cap field: trig polynomial in the ambient coordinates."""
    R = grid.r[:, None]
    PHI = grid.phi[None, :]
    sin_t = grid.spec.sin_theta
    out = np.zeros(grid.shape)
    for m in range(modes):
        for k in range(radial_powers):
            a, b = rng.normal(size=2)
            rad = (np.sin(R) / sin_t) ** m * np.cos(R) ** k
            term = rad * a * np.cos(m * PHI)
            if m > 0:
                term = term + rad * b * np.sin(m * PHI)
            out = out + term
    return out / np.abs(out).max()

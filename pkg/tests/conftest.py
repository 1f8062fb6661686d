import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "qcreg", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("qcreg")

# numba probes for a TBB threading layer it cannot use; harmless
warnings.filterwarnings("ignore", message=".*TBB.*")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_field(grid, rng, bandlimit=None):
    """Complex Gaussian samples; with ``bandlimit``, only ``|k| <= bandlimit`` survive."""
    from qcreg.grid import Field

    vals = rng.normal(size=(grid.N, grid.N)) + 1j * rng.normal(size=(grid.N, grid.N))
    if bandlimit is not None:
        k = grid.k
        keep = (np.abs(k)[:, None] <= bandlimit) & (np.abs(k)[None, :] <= bandlimit)
        vals = np.fft.ifft2(np.fft.fft2(vals) * keep)
    return Field(grid, vals)

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gapsol import kernels
from gapsol.action import build_context
from gapsol.grid import GridSpec, PeriodicField, make_grid
from gapsol.nonlinear import NonlinearitySpec
from gapsol.spectral import PotentialSpec


def random_smooth_field(grid: GridSpec, rng, amplitude: float = 1.0,
                        max_mode: int = 3) -> PeriodicField:
    """Band-limited random real field: a few low Fourier modes per axis."""
    m = grid.points_per_axis
    spec = np.zeros(grid.shape, dtype=complex)
    if grid.dim == 1:
        for mode in range(-max_mode, max_mode + 1):
            spec[mode % m] = rng.standard_normal() + 1j * rng.standard_normal()
    else:
        for m0 in range(-max_mode, max_mode + 1):
            for m1 in range(-max_mode, max_mode + 1):
                spec[m0 % m, m1 % m] = rng.standard_normal() \
                    + 1j * rng.standard_normal()
    vals = np.real(np.fft.ifftn(spec))
    peak = np.max(np.abs(vals))
    if peak > 0:
        vals = vals * (amplitude / peak)
    return PeriodicField(grid, vals)


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # JIT compilation happens once here, outside any timed test region
    kernels.warmup()


@pytest.fixture(scope="session")
def ctx_constant_small():
    """Positive definite: V=1, cubic, tiny 1D cell."""
    return build_context(PotentialSpec.constant(1.0),
                         NonlinearitySpec.power(1.0, 4.0),
                         "plus", make_grid(1, 1, 8), n_theta=16, n_bands=4)


@pytest.fixture(scope="session")
def ctx_soliton():
    """Positive definite: V=1, cubic, cell large enough for the soliton."""
    return build_context(PotentialSpec.constant(1.0),
                         NonlinearitySpec.power(1.0, 4.0),
                         "plus", make_grid(1, 16, 16), n_theta=16, n_bands=4)


@pytest.fixture(scope="session")
def mathieu_shifted():
    """Cosine potential shifted so zero sits mid-gap; spectrum on both sides."""
    from gapsol.spectral import bloch_bands

    base = PotentialSpec.cosine([(2.0, (1,))])
    bands = bloch_bands(base, n_theta=16, n_bands=4)
    shift = 0.5 * (bands.intervals[0][1] + bands.intervals[1][0])
    return base.affine(1.0, -shift)


@pytest.fixture(scope="session")
def ctx_gap(mathieu_shifted):
    """Indefinite mid-gap context on a moderate cell."""
    return build_context(mathieu_shifted, NonlinearitySpec.power(1.0, 4.0),
                         "plus", make_grid(1, 8, 16), n_theta=16, n_bands=4)

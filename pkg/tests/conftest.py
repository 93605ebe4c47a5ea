import math

import numpy as np
import pytest

from fdkin import collision, grid, kernels


def pytest_configure(config):
    # pin the sweep thread count so every assertion about determinism and
    # tolerance is reproducible across invocations
    collision.set_threads(2)


@pytest.fixture(scope="session")
def const_spec():
    """Unit-mass isotropic kernel with gamma = 1."""
    return kernels.KernelSpec(gamma=1.0, angular=kernels.ConstantKernel(1.0 / (4.0 * math.pi)))


@pytest.fixture(scope="session")
def grid8():
    return grid.build_grid(8, 4.0, 8, 8)


@pytest.fixture(scope="session")
def grid12():
    return grid.build_grid(12, 4.0, 8, 8)


def smooth_random_field(g, eps, seed, bumps=5, kappa=0.35):
    """Seeded nonnegative field: Gaussian bumps times a C^1 radial taper that
    vanishes identically near the cube boundary (so convergence studies see
    interpolation error, not domain truncation).  When eps > 0 the field is
    scaled so that eps * max(f) = 1 - kappa."""
    rng = np.random.default_rng(seed)
    v = g.nodes
    vals = np.zeros(g.size)
    for _ in range(bumps):
        c = rng.uniform(-0.35 * g.l, 0.35 * g.l, 3)
        w = rng.uniform(0.6, 1.1) * (g.l / 4.0)
        amp = rng.uniform(0.3, 1.0)
        vals += amp * np.exp(-np.sum((v - c) ** 2, axis=1) / (2.0 * w * w))
    r = np.sqrt(np.sum(v**2, axis=1))
    r0, r1 = 0.55 * g.l, 0.92 * g.l
    taper = np.cos(0.5 * np.pi * np.clip((r - r0) / (r1 - r0), 0.0, 1.0)) ** 2
    vals *= taper
    if eps > 0:
        vals *= (1.0 - kappa) / (eps * vals.max())
    return grid.DistributionField(g, vals, eps)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)

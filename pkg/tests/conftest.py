import contextlib

import numpy as np
import pytest

from chiral_skyrmion import _accel
from chiral_skyrmion.grid_field import SpinField, make_grid, pin_ring


@contextlib.contextmanager
def backend(name):
    old = _accel.get_backend()
    _accel.set_backend(name)
    try:
        yield
    finally:
        _accel.set_backend(old)


def smooth_random_field(grid, seed, modes=4, amplitude=0.6, q_minus_one=False, scale=1.0):
    """Normalised sum of a few Gaussian-damped Fourier bumps on top of e3 (or Phi)."""
    rng = np.random.default_rng(seed)
    x1, x2 = grid.mesh
    if q_minus_one:
        from chiral_skyrmion.families import sample_stereographic
        v = sample_stereographic(grid, scale).values.copy()
    else:
        v = np.zeros((grid.n, grid.n, 3))
        v[..., 2] = 1.0
    env = np.exp(-(x1 ** 2 + x2 ** 2) / (2.0 * (0.2 * grid.L) ** 2))
    for _ in range(modes):
        k = rng.normal(size=2) * 2.0 / grid.L * 3
        ph = rng.uniform(0, 2 * np.pi)
        d = rng.normal(size=3)
        v += amplitude / modes * (env * np.cos(k[0] * x1 + k[1] * x2 + ph))[..., None] * d
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    pin_ring(v)
    return SpinField(grid, v, tag=f"random({seed})")


@pytest.fixture(scope="session")
def grid_small():
    return make_grid(12.0, 0.2)


# ------------------------------------------------------- acceptance report

ACCEPTANCE_LINES = {}


@pytest.fixture
def acceptance():
    """``acceptance(key, ok, detail)`` records one pass/fail line and echoes it."""

    def record(key, ok, detail):
        line = f"ACCEPTANCE {key:<4} {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[key] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")

    def order(k):
        num = "".join(ch for ch in k if ch.isdigit())
        return (int(num) if num else 99, k)

    for key in sorted(ACCEPTANCE_LINES, key=order):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])

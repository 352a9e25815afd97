import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hybridnls.spectral import ComplexField, LineGrid, TorusGrid

settings.register_profile(
    "default", max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_torus_field(rng, n=64, kmax=12, decay=2.0, amp=1.0):
    grid = TorusGrid(n)
    k = np.arange(-kmax, kmax + 1)
    c = (rng.standard_normal(k.size) + 1j * rng.standard_normal(k.size)) * (1.0 + np.abs(k)) ** (-decay)
    hat = np.zeros(n, dtype=complex)
    hat[k % n] = c
    f = np.fft.ifft(hat) * n
    return ComplexField(grid, amp * f / np.abs(f).max())


def random_line_field(rng, grid: LineGrid, width=3.0, amp=1.0):
    x = grid.x
    env = np.exp(-x**2 / (2 * width**2))
    phase = rng.standard_normal(4)
    carrier = np.exp(1j * (phase[0] * x + phase[1] * np.sin(x * phase[2])))
    return ComplexField(grid, amp * env * carrier * (1 + 0.3 * phase[3] * np.cos(x)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

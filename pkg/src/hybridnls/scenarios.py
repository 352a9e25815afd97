"""Initial data for the named scenarios.

Each scenario returns (v0 on the line grid, w0 on the torus grid).  The
periodic part is always a carrier A e^{ikx}, optionally with one cosine
harmonic and a seeded band-limited perturbation.
"""

from __future__ import annotations

import math

import numpy as np

from .checkpoint import read_checkpoint
from .config import RunConfig
from .errors import HNLSError, InvalidScenario
from .lab import FieldSampler
from .line import boundary_mass_monitor
from .spectral import ComplexField, LineGrid, TorusGrid, resample_torus_to_line

NOISE_STREAM = 7


def _psi(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x, dtype=float)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def smooth_step(y: np.ndarray) -> np.ndarray:
    """C^infinity step: 0 for y <= 0, 1 for y >= 1."""
    y = np.asarray(y, dtype=float)
    a, b = _psi(y), _psi(1.0 - y)
    return a / (a + b)


def bump(x: np.ndarray, center: float, plateau: float, ramp: float) -> np.ndarray:
    """Smooth compactly supported bump, 1 on |x-center| <= plateau/2, 0 beyond plateau/2 + ramp."""
    if plateau < 0 or not ramp > 0:
        raise InvalidScenario("bump needs plateau >= 0 and ramp > 0")
    r = np.abs(np.asarray(x, dtype=float) - center) - plateau / 2
    return 1.0 - smooth_step(r / ramp)


def carrier(cfg: RunConfig, grid: TorusGrid) -> np.ndarray:
    x = grid.x
    w = cfg.amplitude * np.exp(1j * cfg.carrier_k * x)
    if cfg.harmonic_amplitude:
        w = w + cfg.harmonic_amplitude * np.cos(cfg.harmonic_k * x)
    if cfg.w_noise:
        kmax = min(16, grid.n // 4)
        w = w + cfg.w_noise * FieldSampler(cfg.seed, n=grid.n, kmax=kmax).field(0, NOISE_STREAM)
    return w


def plane_wave_exact(cfg: RunConfig, grid: TorusGrid, t: float) -> np.ndarray:
    """A e^{i(kx - (k^2 + A^{p-1}) t)}."""
    A, k = cfg.amplitude, cfg.carrier_k
    return A * np.exp(1j * (k * grid.x - (k**2 + abs(A) ** (cfg.p - 1)) * t))


def _check_modes(cfg: RunConfig, grid: TorusGrid) -> None:
    for k in (cfg.carrier_k, cfg.harmonic_k if cfg.harmonic_amplitude else 0):
        if abs(k) >= grid.n // 2:
            raise InvalidScenario(f"mode {k} is not resolved by torus_n={grid.n}")


def build_initial_data(cfg: RunConfig) -> tuple[ComplexField, ComplexField]:
    tg = TorusGrid(cfg.torus_n)
    lg = LineGrid(cfg.line_n, cfg.line_K)
    x = lg.x
    sc = cfg.scenario
    if sc == "custom_checkpoint":
        v0, w0 = _from_checkpoints(cfg, lg, tg)
    else:
        _check_modes(cfg, tg)
        if sc == "constant":
            w0 = ComplexField(tg, np.full(tg.n, cfg.amplitude, dtype=complex))
            v0 = ComplexField.zeros(lg)
        elif sc == "plane_wave":
            w0 = ComplexField(tg, plane_wave_exact(cfg, tg, 0.0))
            v0 = ComplexField.zeros(lg)
        elif sc == "dropped_bit":
            w0 = ComplexField(tg, carrier(cfg, tg))
            half = cfg.bump_plateau / 2 + cfg.bump_ramp
            if abs(cfg.bump_center) + half >= lg.half_length:
                raise InvalidScenario("bump support does not fit inside the line domain")
            chi = bump(x, cfg.bump_center, cfg.bump_plateau, cfg.bump_ramp)
            v0 = ComplexField(lg, -resample_torus_to_line(w0, lg).values * chi)
        elif sc == "gaussian_on_carrier":
            if not cfg.gaussian_sigma > 0:
                raise InvalidScenario("gaussian_sigma must be positive")
            w0 = ComplexField(tg, carrier(cfg, tg))
            v0 = ComplexField(lg, cfg.gaussian_amplitude
                              * np.exp(-((x - cfg.gaussian_center) ** 2) / (2 * cfg.gaussian_sigma**2)))
        else:
            raise InvalidScenario(f"unknown scenario {sc!r}")
    share = boundary_mass_monitor(v0, cfg.tol("boundary_fraction"))
    if share > cfg.tol("boundary_mass"):
        raise InvalidScenario(f"initial v0 puts {share:.3e} of its mass near the boundary")
    return v0, w0


def _from_checkpoints(cfg: RunConfig, lg: LineGrid, tg: TorusGrid) -> tuple[ComplexField, ComplexField]:
    try:
        v = read_checkpoint(cfg.v0_path)
        w = read_checkpoint(cfg.w0_path)
    except (OSError, HNLSError) as exc:
        raise InvalidScenario(f"cannot load checkpoints: {exc}") from exc
    if v.field.grid != lg or w.field.grid != tg:
        raise InvalidScenario("checkpoint grids do not match the configured grids")
    if not math.isclose(v.p, cfg.p) or not math.isclose(w.p, cfg.p):
        raise InvalidScenario("checkpoint exponent differs from the configured p")
    return v.field, w.field

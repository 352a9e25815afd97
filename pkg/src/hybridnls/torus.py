"""Periodic problem  i w_t + w_xx = |w|^{p-1} w  on the 2*pi torus.

Two independent routes: Strang splitting with an exact phase-rotation
nonlinear substep, and Picard iteration on the Duhamel formula

    w(t) = S(t) w0 - i int_0^t S(t-s) |w|^{p-1} w (s) ds

with the time integral done by the composite trapezoid rule.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import GridMismatch, InvalidParameter, NonConvergence, StepRejected
from .functionals import energy_values, mass_values
from .nonlinearity import Power, abs_pow, as_power, np_values
from .spectral import ComplexField, TorusGrid, _sobolev_norm_values, free_propagator, sobolev_norm

log = logging.getLogger(__name__)

DEFAULT_C_CAL = 0.01


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    dealias: bool | None = None  # None: off for odd integer p, on otherwise
    picard_max_iter: int = 30
    picard_tol: float = 1e-10
    picard_quad_nodes: int = 65

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InvalidParameter(f"dt must be positive, got {self.dt}")
        if not self.picard_tol > 0:
            raise InvalidParameter("picard_tol must be positive")
        if self.picard_quad_nodes < 3:
            raise InvalidParameter("picard_quad_nodes must be >= 3")

    def dealias_for(self, p: Power) -> bool:
        return (not p.is_odd_integer) if self.dealias is None else bool(self.dealias)


@dataclass(frozen=True)
class TorusState:
    t: float
    w: ComplexField

    def __post_init__(self):
        if not isinstance(self.w.grid, TorusGrid):
            raise GridMismatch("TorusState needs a field on a TorusGrid")


def dealias_mask(grid) -> np.ndarray:
    """2/3 rule: keep |k| <= n/3."""
    return np.abs(np.fft.fftfreq(grid.n, d=1.0 / grid.n)) <= grid.n / 3


def strang_values(w: np.ndarray, dt: float, half: np.ndarray, p: float, mask: np.ndarray | None) -> np.ndarray:
    w = np.fft.ifft(np.fft.fft(w) * half)
    w = w * np.exp(-1j * dt * abs_pow(w, p - 1))
    w_hat = np.fft.fft(w)
    if mask is not None:
        w_hat = w_hat * mask
    return np.fft.ifft(w_hat * half)


def strang_step_torus(state: TorusState, cfg: StepperConfig, p, reverse: bool = False) -> TorusState:
    """One step S(dt/2) o N(dt) o S(dt/2).  ``reverse`` steps with -dt."""
    pw = as_power(p)
    grid = state.w.grid
    dt = -cfg.dt if reverse else cfg.dt
    mask = dealias_mask(grid) if cfg.dealias_for(pw) else None
    w = strang_values(state.w.values, dt, free_propagator(grid, dt / 2), pw.p, mask)
    return TorusState(state.t + dt, ComplexField(grid, w))


def guaranteed_time_torus(w0: ComplexField, p, c_cal: float = DEFAULT_C_CAL) -> float:
    """c_cal * ||w0||_{H^1}^{1-p}; +inf for zero data."""
    if not c_cal > 0:
        raise InvalidParameter("c_cal must be positive")
    norm = sobolev_norm(w0, 1.0)
    if norm == 0:
        return math.inf
    return c_cal * norm ** (1 - as_power(p).p)


@dataclass
class TorusTrajectory:
    grid: TorusGrid
    p: float
    s: float
    dt: float
    times: np.ndarray
    w: np.ndarray        # (steps+1, n)
    w_half: np.ndarray   # (steps, n), w at t_j + dt/2
    h1: np.ndarray
    hs: np.ndarray
    energy: np.ndarray
    mass: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    def state(self, j: int) -> TorusState:
        return TorusState(float(self.times[j]), ComplexField(self.grid, self.w[j]))

    def half_state(self, j: int) -> TorusState:
        return TorusState(float(self.times[j] + 0.5 * self.dt), ComplexField(self.grid, self.w_half[j]))


def step_count(t_end: float, dt: float) -> int:
    if t_end < 0:
        raise InvalidParameter("t_end must be nonnegative")
    return int(round(t_end / dt))


def evolve_torus(w0: ComplexField, t_end: float, cfg: StepperConfig, p, s: float = 1.0,
                 half_steps: bool = True) -> TorusTrajectory:
    """Repeated Strang steps from 0 to t_end (rounded to a whole number of steps).

    The half-step samples are single Strang steps of size dt/2 taken from each
    stored full step; they feed the midpoint-frozen substep of the line solver.
    """
    pw = as_power(p)
    grid = w0.grid
    if not isinstance(grid, TorusGrid):
        raise GridMismatch("evolve_torus needs a torus field")
    steps = step_count(t_end, cfg.dt)
    dt = cfg.dt
    mask = dealias_mask(grid) if cfg.dealias_for(pw) else None
    half = free_propagator(grid, dt / 2)
    quarter = free_propagator(grid, dt / 4)
    W = np.empty((steps + 1, grid.n), dtype=complex)
    Wh = np.empty((steps if half_steps else 0, grid.n), dtype=complex)
    W[0] = w0.values
    for j in range(steps):
        if half_steps:
            Wh[j] = strang_values(W[j], dt / 2, quarter, pw.p, mask)
        W[j + 1] = strang_values(W[j], dt, half, pw.p, mask)
    if not np.all(np.isfinite(W)):
        raise StepRejected("torus trajectory became non-finite")
    h1 = np.array([_sobolev_norm_values(w, grid, 1.0) for w in W])
    hs = np.array([_sobolev_norm_values(w, grid, s) for w in W])
    en = np.array([energy_values(w, grid, pw.p) for w in W])
    ms = np.array([mass_values(w, grid.dx) for w in W])
    return TorusTrajectory(grid, pw.p, s, dt, np.arange(steps + 1) * dt, W, Wh, h1, hs, en, ms)


def trajectory_from_samples(grid: TorusGrid, times: np.ndarray, values: np.ndarray, p, s: float = 1.0
                            ) -> TorusTrajectory:
    """Wrap samples of w at arbitrary times (e.g. Picard nodes) as a trajectory without half steps."""
    pw = as_power(p)
    values = np.asarray(values, dtype=complex)
    times = np.asarray(times, dtype=float)
    if values.shape != (len(times), grid.n):
        raise GridMismatch("samples must have shape (len(times), n)")
    dt = float(times[1] - times[0]) if len(times) > 1 else 0.0
    return TorusTrajectory(
        grid, pw.p, s, dt, times, values, np.empty((0, grid.n), dtype=complex),
        np.array([_sobolev_norm_values(w, grid, 1.0) for w in values]),
        np.array([_sobolev_norm_values(w, grid, s) for w in values]),
        np.array([energy_values(w, grid, pw.p) for w in values]),
        np.array([mass_values(w, grid.dx) for w in values]))


# -- Picard ----------------------------------------------------------------

@dataclass
class PicardDiagnostics:
    iterations: int
    distances: list[float]
    ratios: list[float]
    converged: bool
    guaranteed_time: float
    flagged: bool
    quadrature_error: float = 0.0
    extra: dict = field(default_factory=dict)


@dataclass
class PicardResult:
    grid: object
    times: np.ndarray
    values: np.ndarray  # (nodes, n)
    diagnostics: PicardDiagnostics

    def field(self, j: int) -> ComplexField:
        return ComplexField(self.grid, self.values[j])


def picard_iterate(x0: np.ndarray, grid, times: np.ndarray, nonlinearity, cfg: StepperConfig,
                   guaranteed: float, label: str = "picard", mask: np.ndarray | None = None) -> PicardResult:
    """Fixed-point iteration of  x(t) = S(t)x0 - i int_0^t S(t-s) F(s, x(s)) ds.

    ``nonlinearity(j, values)`` returns F at node j.  ``mask`` projects F
    in Fourier space, so that a dealiased Strang run and the Picard solve
    discretize the same equation.  Distances between successive iterates
    are measured in sup-in-time H^1.
    """
    k2 = grid.k**2
    h1w = 1.0 + k2
    prop = np.exp(-1j * np.outer(times, k2))  # S(t_j)
    x0_hat = np.fft.fft(x0)
    current = np.fft.ifft(prop * x0_hat[None, :], axis=1)
    distances: list[float] = []
    ratios: list[float] = []

    def forcing_hat(traj):
        F_hat = np.fft.fft(np.stack([nonlinearity(j, traj[j]) for j in range(len(times))]), axis=1)
        return F_hat if mask is None else F_hat * mask

    def rhs(traj):
        twisted = np.conj(prop) * forcing_hat(traj)  # S(-t_j) F_j
        integ = np.zeros_like(twisted)
        h = np.diff(times)[:, None]
        integ[1:] = np.cumsum(0.5 * h * (twisted[1:] + twisted[:-1]), axis=0)
        return integ, np.fft.ifft(prop * (x0_hat[None, :] - 1j * integ), axis=1)

    def h1_sup(diff):
        d_hat = grid.to_hat(diff)
        return math.sqrt(float(np.max(grid.parseval_weight * np.sum(h1w * np.abs(d_hat) ** 2, axis=1))))

    converged = False
    for it in range(1, cfg.picard_max_iter + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            _, nxt = rhs(current)
            if not np.all(np.isfinite(nxt)):
                break
            d = h1_sup(nxt - current)
        if not math.isfinite(d):
            break
        if distances and distances[-1] > 0:
            ratios.append(d / distances[-1])
        distances.append(d)
        current = nxt
        log.debug("%s iteration %d: distance %.3e", label, it, d)
        if d < cfg.picard_tol:
            converged = True
            break
    diag = PicardDiagnostics(len(distances), distances, ratios, converged, guaranteed,
                             flagged=bool(times[-1] > guaranteed))
    if not converged:
        raise NonConvergence(f"{label} did not reach tol {cfg.picard_tol} in {cfg.picard_max_iter} iterations", diag)
    # trapezoid vs Simpson on the same nodes as a quadrature error estimate
    integ, _ = rhs(current)
    twisted = np.conj(prop) * forcing_hat(current)
    simpson = np.zeros_like(twisted)
    # cumulative_simpson is real-only
    simpson[1:] = (cumulative_simpson(twisted.real, x=times, axis=0)
                   + 1j * cumulative_simpson(twisted.imag, x=times, axis=0))
    diff = np.fft.ifft(prop * (integ - simpson), axis=1)
    diag.quadrature_error = float(np.max(np.sqrt(np.sum(np.abs(diff) ** 2, axis=1) * grid.dx)))
    return PicardResult(grid, times, current, diag)


def quadrature_nodes(T: float, cfg: StepperConfig) -> np.ndarray:
    return np.linspace(0.0, T, cfg.picard_quad_nodes)


def picard_solve_torus(w0: ComplexField, T: float, cfg: StepperConfig, p,
                       c_cal: float = DEFAULT_C_CAL) -> PicardResult:
    pw = as_power(p)
    if not isinstance(w0.grid, TorusGrid):
        raise GridMismatch("picard_solve_torus needs a torus field")
    if not T > 0:
        raise InvalidParameter("T must be positive")
    tg = guaranteed_time_torus(w0, pw, c_cal)
    if T > tg:
        warnings.warn(f"T={T:g} exceeds the guaranteed time {tg:g}; result is flagged", RuntimeWarning)
    times = quadrature_nodes(T, cfg)
    mask = dealias_mask(w0.grid) if cfg.dealias_for(pw) else None
    return picard_iterate(w0.values, w0.grid, times, lambda j, w: np_values(w, pw.p), cfg, tg, "torus picard",
                          mask)

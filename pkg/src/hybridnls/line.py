"""Perturbed line problem  i v_t + v_xx = |v+w|^{p-1}(v+w) - |w|^{p-1} w,
driven by a torus trajectory w that is resampled exactly onto the line grid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatch, InvalidParameter, StepRejected
from .functionals import ledger_row, torus_time_derivative_values, ConservedLedger
from .nonlinearity import as_power, forcing_values
from .spectral import (
    ComplexField, LineGrid, TorusGrid, free_propagator, resample_torus_to_line, resample_values, sobolev_norm,
)
from .torus import (
    DEFAULT_C_CAL, PicardResult, StepperConfig, TorusState, TorusTrajectory, dealias_mask, picard_iterate,
    quadrature_nodes,
)

BOUNDARY_MASS_LIMIT = 1e-6


@dataclass(frozen=True)
class LineState:
    t: float
    v: ComplexField

    def __post_init__(self):
        if not isinstance(self.v.grid, LineGrid):
            raise GridMismatch("LineState needs a field on a LineGrid")


@dataclass(frozen=True)
class HybridState:
    t: float
    v: LineState
    w: TorusState
    w_line: ComplexField

    def __post_init__(self):
        if not (self.v.t == self.w.t == self.t):
            raise InvalidParameter("v, w and the hybrid state must share one time")
        if self.w_line.grid != self.v.v.grid:
            raise GridMismatch("w_line must live on the line grid of v")

    @property
    def u(self) -> ComplexField:
        return self.v.v + self.w_line

    @classmethod
    def initial(cls, v0: ComplexField, w0: ComplexField, t: float = 0.0) -> HybridState:
        w_line = resample_torus_to_line(w0, v0.grid)
        return cls(t, LineState(t, v0), TorusState(t, w0), w_line)


def _rk4_forcing(v: np.ndarray, w: np.ndarray, dt: float, p: float) -> np.ndarray:
    """Classical RK4 for v' = -i G(v, 0, w) with w frozen."""
    f = lambda x: -1j * forcing_values(x, w, p)  # noqa: E731
    k1 = f(v)
    k2 = f(v + 0.5 * dt * k1)
    k3 = f(v + 0.5 * dt * k2)
    k4 = f(v + dt * k3)
    return v + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def strang_line_values(v, w_half, dt, half, p, mask):
    v = np.fft.ifft(np.fft.fft(v) * half)
    v = _rk4_forcing(v, w_half, dt, p)
    v_hat = np.fft.fft(v)
    if mask is not None:
        v_hat = v_hat * mask
    v = np.fft.ifft(v_hat * half)
    if not np.all(np.isfinite(v)):
        raise StepRejected("line field became non-finite")
    return v


def _as_line(field_: ComplexField, grid: LineGrid) -> np.ndarray:
    if isinstance(field_.grid, TorusGrid):
        return resample_torus_to_line(field_, grid).values
    if field_.grid != grid:
        raise GridMismatch("field is on a different line grid")
    return field_.values


def strang_step_line(state: HybridState, w_half: ComplexField, w_next: ComplexField,
                     cfg: StepperConfig, p) -> HybridState:
    """S(dt/2), RK4 on the forcing with w frozen at the midpoint, S(dt/2).

    ``w_half`` (torus or already resampled) is w at t + dt/2; ``w_next`` is the
    torus field at t + dt.
    """
    pw = as_power(p)
    grid = state.v.v.grid
    mask = dealias_mask(grid) if cfg.dealias_for(pw) else None
    wh = _as_line(w_half, grid)
    v = strang_line_values(state.v.v.values, wh, cfg.dt, free_propagator(grid, cfg.dt / 2), pw.p, mask)
    t = state.t + cfg.dt
    if not isinstance(w_next.grid, TorusGrid):
        raise GridMismatch("w_next must be the torus field")
    return HybridState(t, LineState(t, ComplexField(grid, v)), TorusState(t, w_next),
                       resample_torus_to_line(w_next, grid))


def guaranteed_time_line(v0: ComplexField, w0: ComplexField, p, c_cal: float = DEFAULT_C_CAL) -> float:
    """c_cal * min(|v0|^{1-p}, |w0|^{1-p}, |w0|^{-(p^2-1)/2}) in H^1 norms."""
    if not c_cal > 0:
        raise InvalidParameter("c_cal must be positive")
    pv = as_power(p).p
    nv, nw = sobolev_norm(v0, 1.0), sobolev_norm(w0, 1.0)
    terms = []
    if nv > 0:
        terms.append(nv ** (1 - pv))
    if nw > 0:
        terms += [nw ** (1 - pv), nw ** (-(pv**2 - 1) / 2)]
    return c_cal * min(terms) if terms else math.inf


# -- coupled evolution -----------------------------------------------------

@dataclass
class HybridRun:
    line_grid: LineGrid
    torus: TorusTrajectory
    ledger: ConservedLedger
    final: HybridState
    snapshots: dict = field(default_factory=dict)  # step -> v values


def _ledger_entry(v: np.ndarray, torus: TorusTrajectory, j: int, grid: LineGrid, p: float):
    w = torus.w[j]
    tg = torus.grid
    wl = resample_values(w, tg, grid)
    wt = resample_values(torus_time_derivative_values(w, tg, p), tg, grid)
    vals, h1w = ledger_row(v, wl, wt, grid, w, tg, p, torus.s)
    return [float(torus.times[j])] + vals, h1w


def hybrid_ledger(vs: np.ndarray, torus: TorusTrajectory, grid: LineGrid, p) -> ConservedLedger:
    """Ledger of line samples ``vs[j]`` taken at ``torus.times[j]``."""
    pw = as_power(p)
    if len(vs) != len(torus.times):
        raise GridMismatch("need one line sample per torus time")
    entries = [_ledger_entry(v, torus, j, grid, pw.p) for j, v in enumerate(vs)]
    return ConservedLedger.from_rows([e[0] for e in entries], [e[1] for e in entries])


def evolve_hybrid(v0: ComplexField, torus: TorusTrajectory, cfg: StepperConfig, p,
                  snapshot_every: int = 0, on_step=None) -> HybridRun:
    """Co-evolve v against a precomputed torus trajectory on the same dt grid.

    The ledger gets one row per full step.  ``on_step(j, v)`` is called after
    every step (e.g. for checkpointing).
    """
    pw = as_power(p)
    grid = v0.grid
    if not isinstance(grid, LineGrid):
        raise GridMismatch("v0 must live on a LineGrid")
    if not grid.resolves(torus.grid):
        raise GridMismatch(f"{grid} does not resolve {torus.grid}")
    if abs(torus.dt - cfg.dt) > 1e-15 * max(1.0, cfg.dt) or torus.w_half.shape[0] != torus.steps:
        raise GridMismatch("torus trajectory must carry half steps on the same dt grid")
    dt = cfg.dt
    mask = dealias_mask(grid) if cfg.dealias_for(pw) else None
    half = free_propagator(grid, dt / 2)
    tg = torus.grid

    def row(j, v):
        return _ledger_entry(v, torus, j, grid, pw.p)

    v = v0.values.copy()
    rows, h1ws = [], []
    snaps = {}
    r, h = row(0, v)
    rows.append(r)
    h1ws.append(h)
    if snapshot_every:
        snaps[0] = v.copy()
    if on_step is not None:
        on_step(0, v)
    for j in range(torus.steps):
        wh = resample_values(torus.w_half[j], tg, grid)
        v = strang_line_values(v, wh, dt, half, pw.p, mask)
        r, h = row(j + 1, v)
        rows.append(r)
        h1ws.append(h)
        if snapshot_every and (j + 1) % snapshot_every == 0:
            snaps[j + 1] = v.copy()
        if on_step is not None:
            on_step(j + 1, v)
    ledger = ConservedLedger.from_rows(rows, h1ws)
    t_end = float(torus.times[-1])
    w_end = ComplexField(tg, torus.w[-1])
    final = HybridState(t_end, LineState(t_end, ComplexField(grid, v)), TorusState(t_end, w_end),
                        resample_torus_to_line(w_end, grid))
    return HybridRun(grid, torus, ledger, final, snaps)


def picard_solve_line(v0: ComplexField, w_traj: TorusTrajectory, T: float, cfg: StepperConfig, p,
                      c_cal: float = DEFAULT_C_CAL) -> PicardResult:
    """Picard iteration for v on the quadrature nodes of [0, T].

    ``w_traj`` must sample w exactly at those nodes (e.g. evolve_torus with
    dt = T / (picard_quad_nodes - 1)).
    """
    pw = as_power(p)
    grid = v0.grid
    if not isinstance(grid, LineGrid):
        raise GridMismatch("v0 must live on a LineGrid")
    times = quadrature_nodes(T, cfg)
    if len(w_traj.times) != len(times) or not np.allclose(w_traj.times, times, rtol=0, atol=1e-12 * max(1, T)):
        raise GridMismatch("w trajectory does not sit on the Picard quadrature nodes")
    if not grid.resolves(w_traj.grid):
        raise GridMismatch(f"{grid} does not resolve {w_traj.grid}")
    w0 = ComplexField(w_traj.grid, w_traj.w[0])
    tg = guaranteed_time_line(v0, w0, pw, c_cal)
    if T > tg:
        warnings.warn(f"T={T:g} exceeds the guaranteed time {tg:g}; result is flagged", RuntimeWarning)
    w_line = [resample_values(w, w_traj.grid, grid) for w in w_traj.w]
    mask = dealias_mask(grid) if cfg.dealias_for(pw) else None
    return picard_iterate(v0.values, grid, times, lambda j, v: forcing_values(v, w_line[j], pw.p), cfg, tg,
                          "line picard", mask)


# -- monitors --------------------------------------------------------------

@dataclass
class BlowUpReport:
    flagged: bool
    first_flag_time: float | None
    reason: str
    max_h1: float
    note: str = ""


def blow_up_monitor(times, h1, guaranteed_time: float, ceiling: float = 1e6,
                    growth_factor: float = 10.0, floor: float = 1e-8) -> BlowUpReport:
    """Flag H^1 growth past ``ceiling`` or by more than ``growth_factor`` within
    one guaranteed-time window.  Growth is only measured from values above
    ``floor`` so that round-off on a zero field cannot trigger it."""
    times = np.asarray(times, dtype=float)
    h1 = np.asarray(h1, dtype=float)
    if times.size == 0:
        raise InvalidParameter("blow_up_monitor needs a nonempty trajectory")
    note = ("the defocusing line problem is globally wellposed, so a flag indicates numerical failure "
            "(under-resolution or a too large step), not a physical singularity")
    if not np.all(np.isfinite(h1)):
        j = int(np.argmax(~np.isfinite(h1)))
        return BlowUpReport(True, float(times[j]), "non-finite H^1 norm", math.inf, note)
    window = guaranteed_time if math.isfinite(guaranteed_time) else times[-1] - times[0]
    lo = 0
    for j in range(len(times)):
        if h1[j] > ceiling:
            return BlowUpReport(True, float(times[j]), f"H^1 norm exceeded ceiling {ceiling:g}", float(h1.max()), note)
        while times[j] - times[lo] > window:
            lo += 1
        base = h1[lo:j + 1]
        base = base[base > floor]
        if base.size and h1[j] > growth_factor * base.min():
            return BlowUpReport(True, float(times[j]),
                                f"H^1 norm grew by more than {growth_factor:g}x within {window:g}",
                                float(h1.max()), note)
    return BlowUpReport(False, None, "", float(h1.max()), "")


def boundary_mass_monitor(v: ComplexField, fraction: float) -> float:
    """Share of the mass of v sitting in the outer ``fraction`` of the domain at
    each end (so a constant field gives 2*fraction)."""
    if not 0 < fraction < 0.5:
        raise InvalidParameter("fraction must lie in (0, 0.5)")
    grid = v.grid
    dens = np.abs(v.values) ** 2
    total = float(dens.sum())
    if total == 0:
        return 0.0
    # index arithmetic: point j sits at -L + j*dx, so the outer strips are exact
    j = np.arange(grid.n)
    width = fraction * grid.n
    outer = (j < width) | (j >= grid.n - width)
    return float(dens[outer].sum()) / total

"""Mass, energy, the time-dependent Hamiltonian of the line problem, its
remainder integrand, and envelope fits over recorded time series.

The identity checked by the test-suite is  d/dt H(v(t)) = int R dx  along the
coupled flow, where R collects the terms in which the time derivative falls
on the periodic background w.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptyLedger, GridMismatch, InvalidParameter
from .nonlinearity import abs_pow, as_power, forcing_values, np_values, potential_density_values
from .spectral import ComplexField, TorusGrid, check_same_grid, free_propagate, spectral_derivative

LEDGER_COLUMNS = (
    "t", "mass_v", "energy_v", "energy_w", "mass_w", "H", "intR", "hybrid_mass", "h1_v", "hs_w",
)
_LEDGER_FIELDS = (
    "times", "mass_v", "energy_v", "energy_w", "mass_w", "hamiltonian_h",
    "remainder_integral", "hybrid_mass", "h1_v", "hs_w",
)


# -- array level -----------------------------------------------------------

def mass_values(v: np.ndarray, dx: float) -> float:
    return 0.5 * float(np.sum(np.abs(v) ** 2)) * dx


def energy_values(v: np.ndarray, grid, p: float, vx: np.ndarray | None = None) -> float:
    if vx is None:
        vx = spectral_derivative(v, grid)
    return float(np.sum(0.5 * np.abs(vx) ** 2 + abs_pow(v, p + 1) / (p + 1))) * grid.dx


def hamiltonian_values(v: np.ndarray, w: np.ndarray, grid, p: float, vx: np.ndarray | None = None) -> float:
    if vx is None:
        vx = spectral_derivative(v, grid)
    dens = 0.5 * np.abs(vx) ** 2 + potential_density_values(v, w, p)
    return float(np.sum(dens)) * grid.dx


def remainder_density_values(v: np.ndarray, w: np.ndarray, wt: np.ndarray, p: float) -> np.ndarray:
    u = v + w
    cu, cv, cw = np.conj(u), np.conj(v), np.conj(w)
    term = abs_pow(u, p - 1) * cu * wt - abs_pow(w, p - 1) * (cw + cv) * wt
    return np.real(term) - (p - 1) * abs_pow(w, p - 3) * np.real(wt * cw) * np.real(w * cv)


def hybrid_mass_values(v: np.ndarray, w: np.ndarray, dx: float) -> float:
    return float(np.sum(np.abs(v) ** 2 + 2.0 * np.real(v * np.conj(w)))) * dx


def torus_time_derivative_values(w: np.ndarray, grid: TorusGrid, p: float) -> np.ndarray:
    """w_t from the periodic equation: w_t = i w_xx - i |w|^{p-1} w."""
    wxx = spectral_derivative(w, grid, 2)
    return 1j * (wxx - np_values(w, p))


# -- public functionals ------------------------------------------------------

def mass(v: ComplexField) -> float:
    """M(v) = 1/2 int |v|^2."""
    return mass_values(v.values, v.grid.dx)


def energy(v: ComplexField, p) -> float:
    """E(v) = int 1/2 |v_x|^2 + |v|^{p+1}/(p+1)."""
    return energy_values(v.values, v.grid, as_power(p).p)


def hamiltonian(v: ComplexField, w_line: ComplexField, p) -> float:
    grid = check_same_grid(v, w_line)
    return hamiltonian_values(v.values, w_line.values, grid, as_power(p).p)


def hamiltonian_qr(q: ComplexField, r: ComplexField, w_line: ComplexField) -> complex:
    """The cubic (q, r) Hamiltonian

        int q_x r_x + (q+w)^2 (r+conj w)^2 - |w|^4 - 2 (q conj w + r w) |w|^2 dx.

    At (q, r) = (v, conj v) its gradient part is twice that of
    :func:`hamiltonian` with p = 3 and its potential part four times.
    """
    grid = check_same_grid(q, r, w_line)
    q, r, w = q.values, r.values, w_line.values
    qx = spectral_derivative(q, grid)
    rx = spectral_derivative(r, grid)
    aw2 = np.abs(w) ** 2
    dens = qx * rx + (q + w) ** 2 * (r + np.conj(w)) ** 2 - aw2**2 - 2 * (q * np.conj(w) + r * w) * aw2
    return complex(np.sum(dens) * grid.dx)


def remainder_integral(v: ComplexField, w_line: ComplexField, w_t_line: ComplexField, p) -> float:
    """int R dx with R linear in w_t."""
    grid = check_same_grid(v, w_line, w_t_line)
    return float(np.sum(remainder_density_values(v.values, w_line.values, w_t_line.values, as_power(p).p))) * grid.dx


def hybrid_mass(u: ComplexField, w_line: ComplexField) -> float:
    """int |u|^2 - |w|^2, evaluated through the absolutely convergent form
    int |v|^2 + 2 Re(v conj w) with v = u - w."""
    grid = check_same_grid(u, w_line)
    v = u.values - w_line.values
    return hybrid_mass_values(v, w_line.values, grid.dx)


def hybrid_mass_direct(u: ComplexField, w_line: ComplexField) -> float:
    grid = check_same_grid(u, w_line)
    return float(np.sum(np.abs(u.values) ** 2 - np.abs(w_line.values) ** 2)) * grid.dx


def torus_time_derivative(w: ComplexField, p) -> ComplexField:
    if not isinstance(w.grid, TorusGrid):
        raise GridMismatch("w_t is computed on the torus")
    return ComplexField(w.grid, torus_time_derivative_values(w.values, w.grid, as_power(p).p))


def mass_rate(v: ComplexField, w_line: ComplexField, p) -> float:
    """d/dt M(v) along the line flow, (iv, G(v, 0, w))."""
    grid = check_same_grid(v, w_line)
    g = forcing_values(v.values, w_line.values, as_power(p).p)
    return float(np.real(np.vdot(g, 1j * v.values))) * grid.dx


def twisted_profile(v: ComplexField, t: float) -> ComplexField:
    """Interaction-picture profile psi(t) = S(-t) v(t)."""
    return free_propagate(v, -t)


# -- ledger ------------------------------------------------------------------

@dataclass
class ConservedLedger:
    times: np.ndarray
    mass_v: np.ndarray
    energy_v: np.ndarray
    energy_w: np.ndarray
    mass_w: np.ndarray
    hamiltonian_h: np.ndarray
    remainder_integral: np.ndarray
    hybrid_mass: np.ndarray
    h1_v: np.ndarray
    hs_w: np.ndarray
    # kept in memory for the energy-bound envelope, not exported
    h1_w: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        for name in _LEDGER_FIELDS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        self.h1_w = np.asarray(self.h1_w, dtype=float)
        n = len(self.times)
        for name in _LEDGER_FIELDS:
            arr = getattr(self, name)
            if arr.shape != (n,):
                raise InvalidParameter(f"ledger column {name} has shape {arr.shape}, expected ({n},)")
            if not np.all(np.isfinite(arr)):
                raise InvalidParameter(f"ledger column {name} has non-finite entries")
        if self.h1_w.size not in (0, n):
            raise InvalidParameter("h1_w must be empty or aligned with times")
        for name in ("mass_v", "energy_v", "energy_w", "mass_w"):
            if np.any(getattr(self, name) < 0):
                raise InvalidParameter(f"ledger column {name} must be nonnegative")

    def __len__(self):
        return len(self.times)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]], h1_w: Sequence[float] | None = None):
        arr = np.asarray(rows, dtype=float).reshape(-1, len(_LEDGER_FIELDS))
        cols = {name: arr[:, i] for i, name in enumerate(_LEDGER_FIELDS)}
        return cls(**cols, h1_w=np.asarray(h1_w if h1_w is not None else [], dtype=float))

    def rows(self) -> np.ndarray:
        return np.column_stack([getattr(self, name) for name in _LEDGER_FIELDS])

    def to_csv(self, path) -> None:
        lines = [",".join(LEDGER_COLUMNS)]
        for row in self.rows():
            lines.append(",".join(f"{x:.17g}" for x in row))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path) -> ConservedLedger:
        text = Path(path).read_text().strip().splitlines()
        if tuple(text[0].split(",")) != LEDGER_COLUMNS:
            raise InvalidParameter(f"unexpected ledger header {text[0]!r}")
        rows = [[float(x) for x in line.split(",")] for line in text[1:]]
        return cls.from_rows(rows)


def ledger_row(v, w_line, wt_line, line_grid, w_torus, torus_grid, p, s) -> tuple[list[float], float]:
    """One ledger row (without the time) from raw arrays; also returns ||w||_{H^1}."""
    v_hat = np.fft.fft(v)
    vx = np.fft.ifft(v_hat * (1j * line_grid.k))
    dx = line_grid.dx
    m_v = mass_values(v, dx)
    e_v = energy_values(v, line_grid, p, vx)
    h = hamiltonian_values(v, w_line, line_grid, p, vx)
    r = float(np.sum(remainder_density_values(v, w_line, wt_line, p))) * dx
    hm = hybrid_mass_values(v, w_line, dx)
    h1_v = math.sqrt(line_grid.parseval_weight * float(np.sum((1 + line_grid.k**2) * np.abs(v_hat * dx) ** 2)))
    w_hat = torus_grid.to_hat(w_torus)
    ak2 = np.abs(w_hat) ** 2
    tk2 = torus_grid.k**2
    h1_w = math.sqrt(torus_grid.parseval_weight * float(np.sum((1 + tk2) * ak2)))
    hs_w = math.sqrt(torus_grid.parseval_weight * float(np.sum((1 + tk2) ** s * ak2)))
    e_w = energy_values(w_torus, torus_grid, p)
    m_w = mass_values(w_torus, torus_grid.dx)
    return [m_v, e_v, e_w, m_w, h, r, hm, h1_v, hs_w], h1_w


# -- envelopes ---------------------------------------------------------------

@dataclass
class EnvelopeReport:
    kind: str
    fitted: float
    crossed: bool
    n_points: int
    details: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return not self.crossed and math.isfinite(self.fitted)


def _calibration_mask(times: np.ndarray, fraction: float) -> np.ndarray:
    if not 0 < fraction <= 1:
        raise InvalidParameter("calibration_fraction must lie in (0, 1]")
    t0, t1 = times[0], times[-1]
    return times <= t0 + fraction * (t1 - t0) + 1e-12 * max(1.0, abs(t1))


def envelope_check(ledger, kind: str, params: dict | None = None) -> EnvelopeReport:
    """Fit the one free constant of an a-priori bound and test for crossings.

    kind:
      ``energy_bound``   ||w(t)||_{H^1} <= C (a + a^{(p+1)/2}),  a = ||w_0||_{H^1}
      ``hs_exponential`` ||w(t)||_{H^s} <= e^{ct} ||w_0||_{H^s}
      ``equivalence``    H <= cM + E  and  E <= cM + H

    The constant is fitted on the leading ``calibration_fraction`` of each
    series (default: all of it) and the bound is checked on every sample with
    relative slack ``slack``.  ``energy_bound`` accepts a list of ledgers and
    fits one constant across all of them.
    """
    params = dict(params or {})
    fraction = float(params.get("calibration_fraction", 1.0))
    slack = float(params.get("slack", 1e-9))
    ledgers = list(ledger) if isinstance(ledger, (list, tuple)) else [ledger]
    if not ledgers or any(len(lg) == 0 for lg in ledgers):
        raise EmptyLedger("envelope_check needs a nonempty ledger")

    if kind == "energy_bound":
        p = as_power(params["p"]).p
        ratios, masks = [], []
        for lg in ledgers:
            h1 = lg.h1_w if lg.h1_w.size else lg.hs_w
            a = h1[0]
            scale = a + a ** ((p + 1) / 2)
            ratios.append(h1 / scale if scale > 0 else np.zeros_like(h1))
            masks.append(_calibration_mask(lg.times, fraction))
        c_fit = max(float(np.max(r[m])) for r, m in zip(ratios, masks))
        worst = max(float(np.max(r)) for r in ratios)
        crossed = worst > c_fit * (1 + slack)
        return EnvelopeReport(kind, c_fit, crossed, sum(len(r) for r in ratios), {"max_ratio": worst})

    if len(ledgers) != 1:
        raise InvalidParameter(f"{kind} takes a single ledger")
    lg = ledgers[0]
    cal = _calibration_mask(lg.times, fraction)

    if kind == "hs_exponential":
        t = lg.times - lg.times[0]
        hs = lg.hs_w
        if hs[0] == 0:
            crossed = bool(np.any(hs > 0))
            return EnvelopeReport(kind, 0.0, crossed, len(t))
        log_r = np.log(hs / hs[0])
        pos = t > 0
        rates = log_r[pos & cal] / t[pos & cal]
        c_fit = max(0.0, float(rates.max())) if rates.size else 0.0
        c_ls = float(np.dot(t, log_r) / np.dot(t, t)) if np.any(pos) else 0.0
        bound = np.exp(c_fit * t) * hs[0]
        excess = hs / bound - 1.0
        crossed = bool(np.any(excess > slack))
        return EnvelopeReport(kind, c_fit, crossed, len(t), {"c_least_squares": c_ls, "max_excess": float(excess.max())})

    if kind == "equivalence":
        M, E, H = lg.mass_v, lg.energy_v, lg.hamiltonian_h
        ok = M > 0
        if not np.any(ok):
            return EnvelopeReport(kind, 0.0, bool(np.any(np.abs(H - E) > 0)), len(M))
        gap = np.maximum((H - E) / np.where(ok, M, 1.0), (E - H) / np.where(ok, M, 1.0))
        c_fit = max(0.0, float(gap[ok & cal].max())) if np.any(ok & cal) else 0.0
        scale = np.abs(E) + np.abs(H) + c_fit * M
        v1 = H - (c_fit * M + E)
        v2 = E - (c_fit * M + H)
        crossed = bool(np.any(np.maximum(v1, v2) > slack * scale))
        return EnvelopeReport(kind, c_fit, crossed, len(M), {"max_gap": float(gap[ok].max())})

    raise InvalidParameter(f"unknown envelope kind {kind!r}")

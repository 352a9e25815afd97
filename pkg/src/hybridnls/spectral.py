"""Collocation grids, Fourier transforms, multipliers and norms.

Two grids are supported: the 2*pi torus and a periodically truncated line
[-L, L) with L = pi*K.  Every norm uses continuum normalization, so the
discrete quantities converge to the integrals they stand for.

Torus coefficients are  w_k = (1/2pi) int w e^{-ikx} dx,  line coefficients
are  v(xi) ~ dx * sum v e^{-i xi x}.  Internally arrays are kept in FFT order;
:class:`Spectrum` exposes them sorted by frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import GridMismatch, InvalidField, InvalidParameter, Unsupported

TWO_PI = 2.0 * math.pi


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on the torus R / 2piZ with points x_m = 2*pi*m/n."""

    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or not _is_power_of_two(int(self.n)) or self.n < 16:
            raise InvalidParameter(f"torus n must be a power of two >= 16, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    kind = "torus"

    @property
    def period(self) -> float:
        return TWO_PI

    @property
    def dx(self) -> float:
        return TWO_PI / self.n

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.n) * self.dx

    @cached_property
    def k(self) -> np.ndarray:
        """Integer wavenumbers in FFT order, with -n/2 at the Nyquist slot."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n)

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(-self.n // 2, self.n // 2, dtype=float)

    @property
    def parseval_weight(self) -> float:
        return TWO_PI

    def to_hat(self, values: np.ndarray) -> np.ndarray:
        return np.fft.fft(values) / self.n

    def from_hat(self, hat: np.ndarray) -> np.ndarray:
        return np.fft.ifft(hat) * self.n


@dataclass(frozen=True)
class LineGrid:
    """Uniform grid on [-L, L) with L = pi*K, periodic at the ends."""

    n: int
    K: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or not _is_power_of_two(int(self.n)):
            raise InvalidParameter(f"line n must be a power of two, got {self.n!r}")
        if int(self.K) != self.K or self.K < 2:
            raise InvalidParameter(f"line K must be an integer >= 2, got {self.K!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "K", int(self.K))

    kind = "line"

    @property
    def half_length(self) -> float:
        return math.pi * self.K

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.n

    @property
    def dxi(self) -> float:
        return math.pi / self.half_length

    @cached_property
    def x(self) -> np.ndarray:
        return -self.half_length + np.arange(self.n) * self.dx

    @cached_property
    def k(self) -> np.ndarray:
        """Angular frequencies xi_j = pi*j/L in FFT order."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n) * self.dxi

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(-self.n // 2, self.n // 2) * self.dxi

    @property
    def parseval_weight(self) -> float:
        return self.dxi / TWO_PI

    @cached_property
    def _phase(self) -> np.ndarray:
        # e^{i xi_j L} = (-1)^j accounts for the grid starting at -L
        return np.where(np.arange(self.n) % 2 == 0, 1.0, -1.0)

    def to_hat(self, values: np.ndarray) -> np.ndarray:
        return np.fft.fft(values) * (self.dx * self._phase)

    def from_hat(self, hat: np.ndarray) -> np.ndarray:
        return np.fft.ifft(hat * self._phase) / self.dx

    def resolves(self, torus: TorusGrid) -> bool:
        return self.n >= 2 * self.K * torus.n


Grid = TorusGrid | LineGrid


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex samples of a function on a grid.  Values are read-only."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.complex128, copy=True).reshape(-1)
        if vals.shape[0] != self.grid.n:
            raise InvalidField(f"expected {self.grid.n} samples, got {vals.shape[0]}")
        if not np.all(np.isfinite(vals)):
            raise InvalidField("field contains NaN or Inf")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: Grid, fn) -> ComplexField:
        return cls(grid, fn(grid.x))

    @classmethod
    def zeros(cls, grid: Grid) -> ComplexField:
        return cls(grid, np.zeros(grid.n, dtype=complex))

    def _coerce(self, other):
        if isinstance(other, ComplexField):
            check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return ComplexField(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ComplexField(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return ComplexField(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        return ComplexField(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return ComplexField(self.grid, -self.values)

    def conj(self) -> ComplexField:
        return ComplexField(self.grid, np.conj(self.values))


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Continuum-normalized Fourier coefficients, sorted by frequency."""

    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    @property
    def frequencies(self) -> np.ndarray:
        return self.grid.frequencies


def check_same_grid(*fields: ComplexField) -> Grid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatch(f"{f.grid} differs from {grid}")
    return grid


def forward_transform(f: ComplexField) -> Spectrum:
    if not isinstance(f, ComplexField):
        raise InvalidField("forward_transform expects a ComplexField")
    return Spectrum(f.grid, np.fft.fftshift(f.grid.to_hat(f.values)))


def backward_transform(spec: Spectrum) -> ComplexField:
    return ComplexField(spec.grid, spec.grid.from_hat(np.fft.ifftshift(spec.coeffs)))


def free_propagator(grid: Grid, t: float) -> np.ndarray:
    """Multiplier of S(t) = exp(it d_xx), i.e. exp(-i t k^2), in FFT order."""
    return np.exp(-1j * t * grid.k**2)


def free_propagate(f: ComplexField, t: float) -> ComplexField:
    """Apply S(t).  Negative t gives the inverse (the twisting map)."""
    if not math.isfinite(t):
        raise InvalidParameter("propagation time must be finite")
    if t == 0:
        return f
    return ComplexField(f.grid, np.fft.ifft(np.fft.fft(f.values) * free_propagator(f.grid, t)))


def derivative(f: ComplexField, order: int = 1) -> ComplexField:
    return ComplexField(f.grid, spectral_derivative(f.values, f.grid, order))


def spectral_derivative(values: np.ndarray, grid: Grid, order: int = 1) -> np.ndarray:
    return np.fft.ifft(np.fft.fft(values) * (1j * grid.k) ** order)


def sobolev_norm(f: ComplexField, s: float) -> float:
    """H^s norm with weight (1 + k^2)^s on the squared coefficients."""
    if s < 0:
        raise InvalidParameter(f"Sobolev index must be >= 0, got {s}")
    return _sobolev_norm_values(f.values, f.grid, s)


def _sobolev_norm_values(values: np.ndarray, grid: Grid, s: float) -> float:
    hat = grid.to_hat(values)
    weight = (1.0 + grid.k**2) ** s
    return math.sqrt(grid.parseval_weight * float(np.sum(weight * np.abs(hat) ** 2)))


def lp_norm(f: ComplexField, q: float) -> float:
    if q < 1:
        raise InvalidParameter(f"L^q needs q >= 1, got {q}")
    return _lp_norm_values(f.values, f.grid.dx, q)


def _lp_norm_values(values: np.ndarray, dx: float, q: float) -> float:
    a = np.abs(values)
    if math.isinf(q):
        return float(a.max())
    return float(np.sum(a**q) * dx) ** (1.0 / q)


def inner(f: ComplexField, g: ComplexField) -> float:
    """Real L^2 pairing (f, g) = Re int f conj(g) dx."""
    check_same_grid(f, g)
    return float(np.real(np.vdot(g.values, f.values)) * f.grid.dx)


def littlewood_paley(f: ComplexField, N: int) -> ComplexField:
    """Sharp dyadic band projection on the torus.

    N = 1 keeps |k| <= 1; N >= 2 keeps N <= |k| < 2N.  Summing over
    N = 1, 2, 4, ..., n/2 reproduces f exactly.
    """
    if not isinstance(f.grid, TorusGrid):
        raise Unsupported("Littlewood-Paley projections are implemented on the torus only")
    if N < 1 or not _is_power_of_two(int(N)) or int(N) != N:
        raise InvalidParameter(f"N must be a dyadic integer, got {N}")
    ak = np.abs(f.grid.k)
    mask = ak <= 1 if N == 1 else (ak >= N) & (ak < 2 * N)
    return ComplexField(f.grid, np.fft.ifft(np.fft.fft(f.values) * mask))


def dyadic_levels(grid: TorusGrid) -> list[int]:
    return [2**j for j in range(int(math.log2(grid.n)))]


def resample_torus_to_line(w: ComplexField, g: LineGrid) -> ComplexField:
    """Evaluate the trigonometric interpolant of w at the line points."""
    if not isinstance(w.grid, TorusGrid):
        raise GridMismatch("resampling source must live on a TorusGrid")
    if not g.resolves(w.grid):
        raise GridMismatch(f"{g} does not resolve every mode of {w.grid} (need n/(2K) >= n_torus)")
    return ComplexField(g, resample_values(w.values, w.grid, g))


def resample_values(values: np.ndarray, torus: TorusGrid, g: LineGrid) -> np.ndarray:
    hat = torus.to_hat(values)
    k = torus.k
    if g.n % g.K:
        return np.exp(1j * np.outer(g.x, k)) @ hat
    m = g.n // g.K  # points per 2*pi period
    padded = np.zeros(m, dtype=complex)
    # shift to the first line point, -L = -pi*K; e^{-ikL} = (-1)^{kK}
    shifted = hat * np.where((k.astype(np.int64) * g.K) % 2 == 0, 1.0, -1.0)
    h = torus.n // 2
    padded[:h] = shifted[:h]
    padded[m - h:] = shifted[h:]
    one_period = np.fft.ifft(padded) * m
    return np.tile(one_period, g.K)


def evaluate_series(w: ComplexField, x: np.ndarray) -> np.ndarray:
    """Direct O(n*len(x)) evaluation of the torus Fourier series at x."""
    hat = w.grid.to_hat(w.values)
    return np.exp(1j * np.outer(np.asarray(x, dtype=float), w.grid.k)) @ hat

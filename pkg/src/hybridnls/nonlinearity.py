"""Pointwise power nonlinearities and their difference / Taylor-remainder forms.

All maps act sample by sample and apply no dealiasing.  Array-level helpers
(``*_values``) are what the solvers call in their inner loops; the
ComplexField wrappers are the public surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter
from .spectral import ComplexField, check_same_grid


@dataclass(frozen=True)
class Power:
    """Exponent p of the defocusing nonlinearity |u|^{p-1} u."""

    p: float

    def __post_init__(self):
        p = float(self.p)
        if not math.isfinite(p) or p < 2:
            raise InvalidParameter(f"p must be >= 2, got {self.p}")
        object.__setattr__(self, "p", p)

    @property
    def floor_p(self) -> int:
        return math.floor(self.p)

    @property
    def is_odd_integer(self) -> bool:
        return self.p == self.floor_p and self.floor_p % 2 == 1


def as_power(p) -> Power:
    return p if isinstance(p, Power) else Power(p)


def abs_pow(u: np.ndarray, e: float) -> np.ndarray:
    """|u|^e with 0^e := 0 for e != 0 and 0^0 := 1."""
    a2 = np.real(u) ** 2 + np.imag(u) ** 2
    if e == 0:
        return np.ones_like(a2)
    half = 0.5 * e
    if half == int(half) and half > 0:
        return a2 ** int(half)
    out = np.zeros_like(a2)
    nz = a2 > 0
    out[nz] = np.exp(half * np.log(a2[nz]))
    return out


def np_values(u: np.ndarray, p: float) -> np.ndarray:
    return abs_pow(u, p - 1) * u


def np_derivative_values(u: np.ndarray, ux: np.ndarray, p: float) -> np.ndarray:
    """Chain rule for d/dx (|u|^{p-1}u), exact at zeros of u."""
    return abs_pow(u, p - 1) * ux + (p - 1) * abs_pow(u, p - 3) * np.real(np.conj(u) * ux) * u


def g_values(v1: np.ndarray, v2: np.ndarray, w: np.ndarray, p: float) -> np.ndarray:
    return np_values(v1 + w, p) - np_values(v2 + w, p)


def forcing_values(v: np.ndarray, w: np.ndarray, p: float) -> np.ndarray:
    """Right-hand side nonlinearity of the line problem, G(v, 0, w)."""
    return np_values(v + w, p) - np_values(w, p)


def potential_density_values(v: np.ndarray, w: np.ndarray, p: float) -> np.ndarray:
    u = v + w
    return (
        abs_pow(u, p + 1) - abs_pow(w, p + 1) - (p + 1) * abs_pow(w, p - 1) * np.real(v * np.conj(w))
    ) / (p + 1)


def n_p(u: ComplexField, p) -> ComplexField:
    """|u|^{p-1} u."""
    return ComplexField(u.grid, np_values(u.values, as_power(p).p))


def g_difference(v1: ComplexField, v2: ComplexField, w: ComplexField, p) -> ComplexField:
    """G(v1, v2, w) = |v1+w|^{p-1}(v1+w) - |v2+w|^{p-1}(v2+w)."""
    grid = check_same_grid(v1, v2, w)
    return ComplexField(grid, g_values(v1.values, v2.values, w.values, as_power(p).p))


def taylor_remainders(v: ComplexField, w: ComplexField, p):
    """The three expansion remainders of |v+w|^q around w, by direct subtraction.

    Returns (r1, r2, r3) with

    * r1 = |v+w|^{p-1} - |w|^{p-1} - (p-1) Re(w conj v) |w|^{p-3}
    * r2 = |v+w|^{p+1} - |w|^{p+1} - (p+1) Re(w conj v) |w|^{p-1} - |v|^{p+1}
    * r3 = |v+w|^{p-1}(v+w) - |w|^{p-1} w - (p-1) Re(w conj v) |w|^{p-3} w - v |w|^{p-1}
    """
    pw = as_power(p)
    if pw.p < 3:
        raise InvalidParameter(f"Taylor remainders need p >= 3, got {pw.p}")
    grid = check_same_grid(v, w)
    r1, r2, r3 = taylor_remainder_values(v.values, w.values, pw.p)
    return ComplexField(grid, r1), ComplexField(grid, r2), ComplexField(grid, r3)


def taylor_remainder_values(v: np.ndarray, w: np.ndarray, p: float):
    u = v + w
    cross = np.real(w * np.conj(v))
    w_pm3 = abs_pow(w, p - 3)
    w_pm1 = abs_pow(w, p - 1)
    r1 = abs_pow(u, p - 1) - w_pm1 - (p - 1) * cross * w_pm3
    r2 = abs_pow(u, p + 1) - abs_pow(w, p + 1) - (p + 1) * cross * w_pm1 - abs_pow(v, p + 1)
    r3 = np_values(u, p) - w_pm1 * w - ((p - 1) * cross * w_pm3 * w + v * w_pm1)
    return r1.astype(complex), r2.astype(complex), r3


def hamiltonian_density_gradient(v: ComplexField, w: ComplexField, p) -> ComplexField:
    """Gradient of the potential part of H with respect to conj(v).

    Pairs with a direction h through Re int grad * conj(h) dx.
    """
    grid = check_same_grid(v, w)
    return ComplexField(grid, forcing_values(v.values, w.values, as_power(p).p))


def potential_density(v: ComplexField, w: ComplexField, p) -> ComplexField:
    grid = check_same_grid(v, w)
    return ComplexField(grid, potential_density_values(v.values, w.values, as_power(p).p))

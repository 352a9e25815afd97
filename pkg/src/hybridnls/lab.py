"""Randomized checks of pointwise and norm inequalities used in the analysis.

Every inequality of the form LHS <= c * RHS is evaluated on sampled fields and
summarized by the worst observed ratio LHS / RHS.  Sample i draws from its own
generator seeded by (seed, i), so serial and parallel runs agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidParameter
from .nonlinearity import abs_pow, as_power, g_values, np_derivative_values, np_values, taylor_remainder_values
from .spectral import TorusGrid, _lp_norm_values, _sobolev_norm_values

RHS_FLOOR = 1e-300
# skip points whose RHS is this small relative to the terms cancelled in the LHS;
# there the ratio measures rounding, not the inequality
CANCELLATION_GUARD = 1e-5
HOLDER_SLACK = 1e-12
REPORT_COLUMNS = ("lemma", "p", "s", "gamma", "samples", "max_ratio", "q50", "q90", "q99", "violated")

# adversarial families, cycled by sample index
GENERIC, NEAR, SMALL_W = 0, 1, 2


@dataclass(frozen=True)
class FieldSampler:
    """Band-limited random fields on the torus.

    Coefficients are complex Gaussians times (1 + |k|)^{-gamma} for
    |k| <= kmax, drawn independently of n so that refining the grid samples
    the same functions.  Each field is normalized to sup-norm ``amplitude``
    on the grid.
    """

    seed: int
    n: int = 128
    gamma: float = 2.0
    amplitude: float = 1.0
    kmax: int = 16

    def __post_init__(self):
        if self.gamma < 0:
            raise InvalidParameter("gamma must be >= 0")
        if 2 * self.kmax + 1 > self.n:
            raise InvalidParameter("kmax too large for the grid")

    @property
    def grid(self) -> TorusGrid:
        return TorusGrid(self.n)

    def rng(self, index: int, stream: int = 0) -> np.random.Generator:
        return np.random.default_rng([int(self.seed), int(index), int(stream)])

    def _synthesize(self, rng: np.random.Generator) -> np.ndarray:
        ks = np.arange(-self.kmax, self.kmax + 1)
        c = (rng.standard_normal(ks.size) + 1j * rng.standard_normal(ks.size)) / math.sqrt(2)
        c *= (1.0 + np.abs(ks)) ** (-self.gamma)
        hat = np.zeros(self.n, dtype=complex)
        hat[ks % self.n] = c
        f = np.fft.ifft(hat) * self.n
        return f / np.abs(f).max()

    def field(self, index: int, stream: int = 0) -> np.ndarray:
        return self.amplitude * self._synthesize(self.rng(index, stream))

    def fields(self, index: int, count: int) -> list[np.ndarray]:
        rng = self.rng(index)
        return [self.amplitude * self._synthesize(rng) for _ in range(count)]


@dataclass
class EstimateReport:
    lemma_id: str
    samples: int
    max_ratio: float
    ratio_quantiles: tuple[float, float, float]
    params: dict
    violated: bool = False
    skipped: int = 0
    half_max_ratio: float = math.nan
    extra: dict = field(default_factory=dict)

    def csv_row(self) -> str:
        p = self.params
        q50, q90, q99 = self.ratio_quantiles
        vals = [self.lemma_id, _g(p.get("p")), _g(p.get("s")), _g(p.get("gamma")), str(self.samples),
                _g(self.max_ratio), _g(q50), _g(q90), _g(q99), "true" if self.violated else "false"]
        return ",".join(vals)


def _g(x) -> str:
    if x is None:
        return ""
    return f"{float(x):.17g}"


def write_reports(path, reports: Sequence[EstimateReport]) -> None:
    lines = [",".join(REPORT_COLUMNS)] + [r.csv_row() for r in reports]
    Path(path).write_text("\n".join(lines) + "\n")


def _summarize(lemma_id: str, per_sample: np.ndarray, params: dict, skipped: int = 0,
               violated: bool = False) -> EstimateReport:
    per_sample = np.asarray(per_sample, dtype=float)
    if per_sample.size == 0:
        raise InvalidParameter("no samples")
    q = np.quantile(per_sample, [0.5, 0.9, 0.99])
    half = per_sample[: max(1, per_sample.size // 2)]
    rep = EstimateReport(lemma_id, int(per_sample.size), float(per_sample.max()),
                         (float(q[0]), float(q[1]), float(q[2])), params, violated, skipped, float(half.max()))
    if not math.isfinite(rep.max_ratio):
        raise InvalidParameter(f"{lemma_id}: non-finite ratio")
    return rep


def _pointwise_max(lhs: np.ndarray, rhs: np.ndarray, scale: np.ndarray | None = None) -> tuple[float, int]:
    ok = rhs > RHS_FLOOR
    if scale is not None:
        ok &= rhs > CANCELLATION_GUARD * scale
    skipped = int(np.count_nonzero(~ok))
    if not np.any(ok):
        return 0.0, skipped
    return float(np.max(lhs[ok] / rhs[ok])), skipped


def _spectral_dx(f: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return np.fft.ifft(np.fft.fft(f) * (1j * grid.k))


# -- fractional chain rule ---------------------------------------------------

def fractional_chain_range_ok(p, s: float) -> bool:
    pw = as_power(p)
    return s >= 0 and (pw.is_odd_integer or s <= pw.floor_p)


def fractional_chain_ratio(f: np.ndarray, grid: TorusGrid, p: float, s: float) -> float:
    num = _sobolev_norm_values(np_values(f, p), grid, s)
    den = _lp_norm_values(f, grid.dx, math.inf) ** (p - 1) * _sobolev_norm_values(f, grid, s)
    return num / den if den > RHS_FLOOR else 0.0


def verify_fractional_chain(sampler: FieldSampler, p, s: float, n_samples: int,
                            exploratory: bool = False) -> EstimateReport:
    """|| |f|^{p-1} f ||_{H^s} / ( ||f||_inf^{p-1} ||f||_{H^s} )."""
    pw = as_power(p)
    if not fractional_chain_range_ok(pw, s) and not exploratory:
        raise InvalidParameter(f"s={s} lies outside 0 <= s <= [p] for p={pw.p}")
    grid = sampler.grid
    ratios = np.array([fractional_chain_ratio(sampler.field(i), grid, pw.p, s) for i in range(n_samples)])
    rep = _summarize("fractional_chain", ratios, {"p": pw.p, "s": s, "gamma": sampler.gamma})
    rep.extra["exploratory"] = exploratory and not fractional_chain_range_ok(pw, s)
    return rep


# -- difference estimates ----------------------------------------------------

def _difference_triple(sampler: FieldSampler, i: int):
    v1, v2, w = sampler.fields(i, 3)
    family = i % 3
    if family == NEAR:
        v2 = v1 + 1e-3 * v2
    elif family == SMALL_W:
        w = 1e-3 * w
    return v1, v2, w


def difference_ratios(v1, v2, w, grid: TorusGrid, p: float) -> tuple[float, float, int]:
    G = g_values(v1, v2, w, p)
    tri = np.sqrt(np.abs(v1) ** 2 + np.abs(v2) ** 2 + np.abs(w) ** 2)
    d = np.abs(v1 - v2)
    r_val, sk1 = _pointwise_max(np.abs(G), d * abs_pow(tri, p - 1), abs_pow(tri, p))
    v1x, v2x, wx = (_spectral_dx(a, grid) for a in (v1, v2, w))
    Gx = np_derivative_values(v1 + w, v1x + wx, p) - np_derivative_values(v2 + w, v2x + wx, p)
    trix = np.sqrt(np.abs(v1x) ** 2 + np.abs(v2x) ** 2 + np.abs(wx) ** 2)
    rhs = np.abs(v1x - v2x) * abs_pow(tri, p - 1) + d * trix * abs_pow(tri, p - 2)
    r_der, sk2 = _pointwise_max(np.abs(Gx), rhs, abs_pow(tri, p - 1) * trix)
    return r_val, r_der, sk1 + sk2


def verify_difference_lemma(sampler: FieldSampler, p, n_samples: int) -> tuple[EstimateReport, EstimateReport]:
    """Pointwise bounds on G(v1, v2, w) and on its x-derivative.

    |(a, b, c)| is the Euclidean norm of the moduli.  Returns one report for
    the value estimate and one for the derivative estimate.
    """
    pw = as_power(p)
    grid = sampler.grid
    val = np.empty(n_samples)
    der = np.empty(n_samples)
    skipped = 0
    for i in range(n_samples):
        v1, v2, w = _difference_triple(sampler, i)
        val[i], der[i], sk = difference_ratios(v1, v2, w, grid, pw.p)
        skipped += sk
    params = {"p": pw.p, "s": None, "gamma": sampler.gamma}
    return (_summarize("difference_value", val, params, skipped),
            _summarize("difference_derivative", der, params, skipped))


# -- Taylor remainders ---------------------------------------------------------

def _taylor_pair(sampler: FieldSampler, i: int):
    v, w = sampler.fields(i, 2)
    family = i % 3
    if family == NEAR:
        v = 1e-2 * v
    elif family == SMALL_W:
        w = 1e-2 * w
    return v, w


def taylor_ratios(v, w, p: float) -> tuple[list[float], int]:
    r1, r2, r3 = taylor_remainder_values(v, w, p)
    av2 = np.abs(v) ** 2
    aw = np.abs(w)
    rhs1 = av2 * (abs_pow(w, p - 3) + abs_pow(v, p - 3))
    rhs2 = av2 * aw * (abs_pow(w, p - 2) + abs_pow(v, p - 2))
    rhs3 = av2 * (abs_pow(w, p - 2) + abs_pow(v, p - 2))
    big = np.abs(v) + aw
    out, skipped = [], 0
    for lhs, rhs, deg in ((r1, rhs1, p - 1), (r2, rhs2, p + 1), (r3, rhs3, p)):
        r, sk = _pointwise_max(np.abs(lhs), rhs, big**deg)
        out.append(r)
        skipped += sk
    return out, skipped


def verify_taylor_lemma(sampler: FieldSampler, p, n_samples: int) -> tuple[EstimateReport, ...]:
    pw = as_power(p)
    if pw.p < 3:
        raise InvalidParameter(f"the Taylor estimates need p >= 3, got {pw.p}")
    ratios = np.empty((n_samples, 3))
    skipped = 0
    for i in range(n_samples):
        v, w = _taylor_pair(sampler, i)
        ratios[i], sk = taylor_ratios(v, w, pw.p)
        skipped += sk
    params = {"p": pw.p, "s": None, "gamma": sampler.gamma}
    return tuple(_summarize(f"taylor_{j + 1}", ratios[:, j], params, skipped) for j in range(3))


# -- Hölder interpolation -----------------------------------------------------

def interpolation_ratio(v: np.ndarray, dx: float, p: float, q: float) -> float:
    """||v||_q^q / ( ||v||_2^{2a} ||v||_{p+1}^{(p+1)b} ),  a = (p-q+1)/(p-1), b = (q-2)/(p-1)."""
    a = (p - q + 1) / (p - 1)
    b = (q - 2) / (p - 1)
    lhs = float(np.sum(np.abs(v) ** q) * dx)
    m2 = float(np.sum(np.abs(v) ** 2) * dx)
    mp = float(np.sum(np.abs(v) ** (p + 1)) * dx)
    rhs = m2**a * mp**b
    return lhs / rhs if rhs > RHS_FLOOR else 0.0


def _interpolation_field(sampler: FieldSampler, i: int) -> np.ndarray:
    f = sampler.field(i)
    if i % 3 == NEAR:
        # constant modulus on a random subset: equality case of Hölder
        rng = sampler.rng(i, 1)
        mask = rng.random(sampler.n) < rng.uniform(0.05, 0.95)
        mask[0] = True
        f = sampler.amplitude * np.exp(1j * np.angle(f)) * mask
    return f


def verify_interpolation(sampler: FieldSampler, p, q: float, n_samples: int) -> EstimateReport:
    pw = as_power(p)
    if not 2 <= q <= pw.p + 1:
        raise InvalidParameter(f"q={q} must lie in [2, p+1] = [2, {pw.p + 1}]")
    grid = sampler.grid
    ratios = np.array([interpolation_ratio(_interpolation_field(sampler, i), grid.dx, pw.p, q)
                       for i in range(n_samples)])
    violated = bool(np.any(ratios > 1.0 + HOLDER_SLACK))
    rep = _summarize("interpolation", ratios, {"p": pw.p, "s": None, "gamma": sampler.gamma}, violated=violated)
    rep.extra["q"] = q
    rep.extra["violations"] = int(np.count_nonzero(ratios > 1.0 + HOLDER_SLACK))
    return rep

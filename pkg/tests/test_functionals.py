import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hybridnls.errors import EmptyLedger, GridMismatch, InvalidParameter
from hybridnls.functionals import (
    LEDGER_COLUMNS, ConservedLedger, energy, envelope_check, hamiltonian, hamiltonian_qr, hybrid_mass,
    hybrid_mass_direct, mass, mass_rate, remainder_integral, torus_time_derivative, twisted_profile,
)
from hybridnls.spectral import ComplexField, LineGrid, TorusGrid, free_propagate, lp_norm, spectral_derivative

from conftest import random_line_field

LG = LineGrid(1024, 8)
seeds = st.integers(0, 2**32 - 1)


def test_mass_examples():
    assert mass(ComplexField.zeros(LG)) == 0
    assert mass(ComplexField(TorusGrid(32), np.ones(32))) == pytest.approx(math.pi, rel=1e-14)
    g = ComplexField.from_function(LG, lambda x: np.exp(-x**2 / 2))
    assert mass(g) == pytest.approx(0.5 * math.sqrt(math.pi), abs=1e-10)


def test_energy_examples():
    tg = TorusGrid(32)
    assert energy(ComplexField.zeros(tg), 3) == 0
    assert energy(ComplexField(tg, np.full(32, 1.3)), 3) == pytest.approx(2 * math.pi * 1.3**4 / 4, rel=1e-13)
    for k in (1, 2, 5):
        w = ComplexField.from_function(tg, lambda x: np.exp(1j * k * x))
        assert energy(w, 3) == pytest.approx(2 * math.pi * (k**2 / 2 + 0.25), rel=1e-13)


def test_hamiltonian_examples(rng):
    v = random_line_field(rng, LG, amp=0.3)
    w = ComplexField.from_function(LG, lambda x: 0.4 * np.exp(1j * x) + 0.1 * np.cos(2 * x))
    assert hamiltonian(ComplexField.zeros(LG), w, 3) == pytest.approx(0, abs=1e-15)
    assert hamiltonian(v, ComplexField.zeros(LG), 3.5) == pytest.approx(energy(v, 3.5), rel=1e-13)
    # independent expansion of the integrand for p = 3:
    # |v+w|^4 - |w|^4 - 4|w|^2 Re(v w*) = |v|^4 + 4|v|^2 Re(v w*) + 4 Re(v w*)^2 + 2|v|^2|w|^2
    a, b = v.values, w.values
    c = np.real(a * np.conj(b))
    pot = (np.abs(a) ** 4 + 4 * np.abs(a) ** 2 * c + 4 * c**2 + 2 * np.abs(a) ** 2 * np.abs(b) ** 2) / 4
    grad = 0.5 * np.abs(spectral_derivative(a, LG)) ** 2
    direct = float(np.sum(grad + pot)) * LG.dx
    assert hamiltonian(v, w, 3) == pytest.approx(direct, rel=1e-10)


def test_qr_hamiltonian_normalization(rng):
    v = random_line_field(rng, LG, amp=0.5)
    w = ComplexField.from_function(LG, lambda x: 0.7 * np.exp(1j * x))
    h4 = hamiltonian_qr(v, v.conj(), w)
    kinetic = 0.5 * float(np.sum(np.abs(spectral_derivative(v.values, LG)) ** 2)) * LG.dx
    h = hamiltonian(v, w, 3)
    assert abs(h4.imag) <= 1e-12 * abs(h4.real)
    assert h4.real == pytest.approx(2 * kinetic + 4 * (h - kinetic), rel=1e-11)


def test_remainder_examples(rng):
    v = random_line_field(rng, LG, amp=0.4)
    w = ComplexField.from_function(LG, lambda x: np.exp(1j * x))
    wt = ComplexField.from_function(LG, lambda x: 0.3j * np.exp(1j * x))
    assert remainder_integral(ComplexField.zeros(LG), w, wt, 3) == pytest.approx(0, abs=1e-15)
    assert remainder_integral(v, w, ComplexField.zeros(LG), 4) == 0
    with pytest.raises(GridMismatch):
        remainder_integral(v, w, ComplexField.zeros(LineGrid(512, 8)), 3)


def test_remainder_is_derivative_of_h_along_w(rng):
    """With v frozen, d/ds H(v, w(s)) equals int R computed from dw/ds (the w_t slot)."""
    v = random_line_field(rng, LG, amp=0.4)
    w0 = ComplexField.from_function(LG, lambda x: 0.8 * np.exp(1j * x) + 0.2 * np.cos(3 * x))
    dw = ComplexField.from_function(LG, lambda x: 0.5j * np.exp(2j * x) + 0.1)
    for p in (3.0, 4.0, 5.0):
        eps = 1e-5
        fd = (hamiltonian(v, w0 + dw * eps, p) - hamiltonian(v, w0 - dw * eps, p)) / (2 * eps)
        assert fd == pytest.approx(remainder_integral(v, w0, dw, p), rel=1e-7)


@given(seeds)
def test_hybrid_mass_two_forms(seed):
    rng = np.random.default_rng(seed)
    v = random_line_field(rng, LG, amp=0.5)
    w = ComplexField.from_function(LG, lambda x: (0.3 + rng.random()) * np.exp(1j * x))
    assert hybrid_mass(v + w, w) == pytest.approx(hybrid_mass_direct(v + w, w), rel=1e-10, abs=1e-12)
    assert hybrid_mass(w, w) == pytest.approx(0, abs=1e-15)
    z = ComplexField.zeros(LG)
    assert hybrid_mass(v, z) == pytest.approx(2 * mass(v), rel=1e-14)


def test_torus_time_derivative_plane_wave():
    tg = TorusGrid(32)
    w = ComplexField.from_function(tg, lambda x: 0.5 * np.exp(2j * x))
    # w_t = -i (k^2 + A^{p-1}) w
    np.testing.assert_allclose(torus_time_derivative(w, 3).values, -1j * (4 + 0.25) * w.values, atol=1e-13)


def test_mass_rate_vanishes_without_w(rng):
    v = random_line_field(rng, LG, amp=0.5)
    assert mass_rate(v, ComplexField.zeros(LG), 3) == pytest.approx(0, abs=1e-14)


def test_twisted_profile_inverts_free_flow(rng):
    v = random_line_field(rng, LG)
    psi = twisted_profile(free_propagate(v, 0.7), 0.7)
    assert lp_norm(psi - v, 2) < 1e-12


def _ledger(n=5, **over):
    if over:
        n = len(next(iter(over.values())))
    cols = {name: np.linspace(1.0, 2.0, n) for name in
            ("times", "mass_v", "energy_v", "energy_w", "mass_w", "hamiltonian_h",
             "remainder_integral", "hybrid_mass", "h1_v", "hs_w")}
    cols.update(over)
    return ConservedLedger(**cols)


def test_ledger_validation_and_csv(tmp_path):
    lg = _ledger()
    lg.to_csv(tmp_path / "a.csv")
    head = (tmp_path / "a.csv").read_text().splitlines()[0]
    assert head == ",".join(LEDGER_COLUMNS) == "t,mass_v,energy_v,energy_w,mass_w,H,intR,hybrid_mass,h1_v,hs_w"
    back = ConservedLedger.from_csv(tmp_path / "a.csv")
    np.testing.assert_array_equal(back.rows(), lg.rows())
    back.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    with pytest.raises(InvalidParameter):
        _ledger(mass_v=-np.ones(5))
    with pytest.raises(InvalidParameter):
        _ledger(h1_v=np.array([1, 2, np.inf, 3, 4.0]))
    with pytest.raises(InvalidParameter):
        ConservedLedger(*[np.ones(5)] * 9, np.ones(4))


def test_envelope_examples():
    flat = _ledger(times=np.linspace(0, 1, 5), **{k: np.full(5, 2.0) for k in ("hs_w", "mass_v", "energy_v")},
                   hamiltonian_h=np.full(5, 2.0))
    e = envelope_check(flat, "hs_exponential")
    assert e.fitted == 0 and not e.crossed
    eq = envelope_check(flat, "equivalence")
    assert eq.fitted == 0 and eq.holds
    growing = _ledger(times=np.linspace(0, 1, 11), hs_w=np.exp(0.3 * np.linspace(0, 1, 11)))
    g = envelope_check(growing, "hs_exponential")
    assert g.fitted == pytest.approx(0.3, rel=1e-12) and not g.crossed
    # calibrated on the first half, a faster second half crosses
    t = np.linspace(0, 1, 11)
    kink = _ledger(times=t, hs_w=np.exp(np.where(t < 0.5, 0.1 * t, 0.05 + 2 * (t - 0.5))))
    assert envelope_check(kink, "hs_exponential", {"calibration_fraction": 0.5}).crossed
    with pytest.raises(EmptyLedger):
        envelope_check(_ledger(0), "equivalence")
    with pytest.raises(InvalidParameter):
        envelope_check(flat, "nonsense")


def test_energy_bound_single_constant_across_ledgers():
    a = _ledger(times=np.linspace(0, 1, 4), hs_w=np.array([1.0, 1.5, 1.2, 1.0]))
    b = _ledger(times=np.linspace(0, 1, 4), hs_w=np.array([2.0, 2.0, 3.0, 2.0]))
    rep = envelope_check([a, b], "energy_bound", {"p": 3})
    assert rep.fitted == pytest.approx(max(1.5 / 2, 3.0 / (2 + 4)))
    assert rep.holds

import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from qmedia.errors import DomainError, InvalidParameterError
from qmedia.media import PhysicalParams
from qmedia.nonlinearity import (Nonlinearity, as_custom, energy_density, equation_of_state,
                                 fermi_coefficient, gp_coupling_from_scattering_length, mu,
                                 polytropic_gamma, pressure, sound_speed_sq)


def _sympy_pressure(mu_expr, n):
    """Oracle: p(n) = ∫_0^n x μ'(x) dx."""
    x = sp.symbols("x", positive=True)
    return sp.integrate(x * sp.diff(mu_expr.subs(n, x), x), (x, 0, n))


def test_gp_pressure():
    n, g = sp.symbols("n g", positive=True)
    assert sp.simplify(_sympy_pressure(g * n, n) - g * n**2 / 2) == 0
    nl = Nonlinearity.gross_pitaevskii(0.7)
    assert pressure(nl, 2.0) == pytest.approx(0.7 * 4 / 2, rel=1e-15)


def test_fermion_pressure_3d():
    # p = (1/20)(3/π)^{2/3} h² n^{5/3}/m with h = 2πħ
    hbar, m = 1.3, 0.8
    nl = Nonlinearity.fermion(hbar, m, 3)
    h = 2 * math.pi * hbar
    for n in (1e-3, 1.0, 1e3):
        want = (3 / math.pi) ** (2 / 3) * h**2 * n ** (5 / 3) / (20 * m)
        assert pressure(nl, n) == pytest.approx(want, rel=1e-13)
    assert polytropic_gamma(nl) == pytest.approx(5 / 3)


def test_fermion_pressure_matches_sympy():
    n, c = sp.symbols("n c", positive=True)
    p = _sympy_pressure(c * n ** sp.Rational(2, 3), n)
    assert sp.simplify(p - sp.Rational(2, 5) * c * n ** sp.Rational(5, 3)) == 0


@pytest.mark.parametrize("d, want", [
    (3, (3 * math.pi**2) ** (2 / 3) / 2),
    (1, math.pi**2 / 8),        # spin-1/2 gas in 1-d: k_F = πn/2
    (2, math.pi),               # spin-1/2 gas in 2-d: k_F² = 2πn
])
def test_fermi_coefficient(d, want):
    assert fermi_coefficient(1.0, 1.0, d) == pytest.approx(want, rel=1e-14)


def test_fermi_coefficient_bad_dimension():
    with pytest.raises(InvalidParameterError):
        fermi_coefficient(1.0, 1.0, 4)


def test_log_pressure():
    nl = Nonlinearity.logarithmic(2.0, -1.5)
    assert pressure(nl, 3.0) == pytest.approx(4.5)
    assert sound_speed_sq(nl, PhysicalParams(m=1.0)) == pytest.approx(1.5)
    assert polytropic_gamma(nl) == 1.0


def test_none():
    nl = Nonlinearity.none()
    assert sound_speed_sq(nl, PhysicalParams()) == 0.0
    assert np.all(pressure(nl, np.array([0.0, 1.0])) == 0)


def test_log_fluid_unit_sound_speed():
    assert sound_speed_sq(Nonlinearity.logarithmic(1.0, -1.0), PhysicalParams()) == pytest.approx(1.0)


def test_attractive_gp_has_negative_cs2():
    assert sound_speed_sq(Nonlinearity.gross_pitaevskii(-2.0), PhysicalParams()) == -2.0


def test_fermion_sound_speed_is_vf2_over_3():
    hbar, m, n0 = 1.0, 1.0, 0.37
    vf = hbar * (3 * math.pi**2 * n0) ** (1 / 3) / m
    cs2 = sound_speed_sq(Nonlinearity.fermion(hbar, m, 3), PhysicalParams(m, hbar, n0))
    assert cs2 == pytest.approx(vf**2 / 3, rel=1e-13)


def test_scattering_length_conventions():
    a, hbar, m, n0 = 0.01, 1.1, 2.0, 3.0
    g = gp_coupling_from_scattering_length(a, hbar, m)
    cs2 = sound_speed_sq(Nonlinearity.gross_pitaevskii(g), PhysicalParams(m, hbar, n0))
    assert cs2 == pytest.approx(4 * math.pi * a * hbar**2 * n0 / m**2, rel=1e-14)
    gm = gp_coupling_from_scattering_length(a, hbar, m, "mass")
    assert gm == pytest.approx(g / m**2)
    with pytest.raises(InvalidParameterError):
        gp_coupling_from_scattering_length(a, hbar, m, "weird")


@given(st.floats(0.1, 5.0), st.floats(0.1, 3.0), st.floats(1e-3, 1e3))
def test_power_law_eos(g, s, n):
    nl = Nonlinearity.power_law(g, s)
    assert pressure(nl, n) == pytest.approx(g * s * n ** (s + 1) / (s + 1), rel=1e-13)
    assert polytropic_gamma(nl) == pytest.approx(1 + s)
    eos = equation_of_state(nl, PhysicalParams(n0=n))
    assert eos.cs2 == pytest.approx(g * s * n**s, rel=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["gp", "fermion", "log"]), st.floats(-2.0, 2.0))
def test_custom_copy_matches_builtin(kind, log_n):
    n = 10.0**log_n
    nl = {"gp": Nonlinearity.gross_pitaevskii(0.9),
          "fermion": Nonlinearity.fermion(1.0, 1.0, 3),
          "log": Nonlinearity.logarithmic(1.5, -0.7)}[kind]
    cust = as_custom(nl)
    assert pressure(cust, n) == pytest.approx(pressure(nl, n), rel=1e-9)
    assert energy_density(cust, n) == pytest.approx(energy_density(nl, n), rel=1e-8, abs=1e-12)


def test_energy_density_derivative_is_mu():
    nl = Nonlinearity.fermion(1.0, 1.0, 3)
    n, h = 0.8, 1e-5
    dF = (energy_density(nl, n + h) - energy_density(nl, n - h)) / (2 * h)
    assert dF == pytest.approx(mu(nl, n), rel=1e-8)


def test_negative_density_is_domain_error():
    with pytest.raises(DomainError):
        pressure(Nonlinearity.gross_pitaevskii(1.0), -1.0)

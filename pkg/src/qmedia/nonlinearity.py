"""Local nonlinearity μ(n), its barotropic pressure and the sound speed.

The pressure is fixed by ``∇p = n∇μ``, i.e. ``p(n) = ∫_0^n n' μ'(n') dn'``,
and the squared sound speed is ``c_s² = p'(n₀)/m``.  Negative values of
``c_s²`` (attractive contact interactions) are legitimate and never clamped.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import AccuracyError, DomainError, InvalidParameterError

NONLINEARITY_FORMS = ("none", "power_law", "logarithmic", "custom")


@dataclass(frozen=True)
class Nonlinearity:
    form: str = "none"
    coefficient: float = 0.0
    exponent: float = 1.0
    a: float = 1.0
    b: float = 0.0
    func: Optional[Callable] = field(default=None, compare=False)
    label: str = ""

    def __post_init__(self):
        if self.form not in NONLINEARITY_FORMS:
            raise InvalidParameterError("form", f"unknown nonlinearity {self.form!r}")
        if self.form == "logarithmic" and not self.a > 0:
            raise InvalidParameterError("a", "logarithmic nonlinearity needs a > 0")
        if self.form == "custom" and self.func is None:
            raise InvalidParameterError("func", "custom nonlinearity needs μ(n)")

    @classmethod
    def none(cls):
        return cls("none", label="none")

    @classmethod
    def power_law(cls, coefficient, exponent, label="power_law"):
        return cls("power_law", coefficient=float(coefficient), exponent=float(exponent), label=label)

    @classmethod
    def gross_pitaevskii(cls, g):
        """Contact interaction ``μ = g n``."""
        return cls.power_law(g, 1.0, label="gross_pitaevskii")

    @classmethod
    def fermion(cls, hbar, m, d=3):
        """Degenerate spin-1/2 Fermi gas in ``d`` dimensions, ``μ ∝ n^{2/d}``."""
        return cls.power_law(fermi_coefficient(hbar, m, d), 2.0 / d, label=f"fermion_{d}d")

    @classmethod
    def logarithmic(cls, a, b):
        """``μ = -b ln(a n)``."""
        return cls("logarithmic", a=float(a), b=float(b), label="logarithmic")

    @classmethod
    def custom(cls, func, label="custom"):
        return cls("custom", func=func, label=label)

    @property
    def is_null(self):
        return self.form == "none"


@dataclass(frozen=True)
class EquationOfState:
    pressure: Callable
    cs2: float
    gamma: Optional[float]


def fermi_coefficient(hbar, m, d=3):
    """Prefactor of ``n^{2/d}`` in the degenerate-fermion chemical potential.

    ``(1/2) (d / 2S_d)^{2/d} (2πħ)² / m`` with ``S_d`` the solid angle of the
    unit sphere in ``d`` dimensions.  For ``d = 3`` this is
    ``(3π²)^{2/3} ħ² / 2m``.
    """
    if d not in (1, 2, 3):
        raise InvalidParameterError("d", "dimension must be 1, 2 or 3")
    solid_angle = 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)
    return 0.5 * (d / (2.0 * solid_angle)) ** (2.0 / d) * (2.0 * math.pi * hbar) ** 2 / m


def gp_coupling_from_scattering_length(a_s, hbar, m, normalization="number"):
    """Contact coupling ``g`` from an s-wave scattering length.

    With the wavefunction normalised to the number density the coupling is
    ``4π a_s ħ²/m``, which gives ``c_s² = 4π a_s ħ² n₀/m²``.  With mass-density
    normalisation (``|ψ|² = m n``) it is ``4π a_s ħ²/m³``.
    """
    if normalization == "number":
        return 4.0 * math.pi * a_s * hbar**2 / m
    if normalization == "mass":
        return 4.0 * math.pi * a_s * hbar**2 / m**3
    raise InvalidParameterError("normalization", "expected 'number' or 'mass'")


def mu(nl: Nonlinearity, n):
    n = np.asarray(n, dtype=float)
    if nl.form == "none":
        return np.zeros_like(n)
    if nl.form == "power_law":
        return nl.coefficient * n**nl.exponent
    if nl.form == "logarithmic":
        return -nl.b * np.log(nl.a * n)
    return np.asarray(nl.func(n), dtype=float)


def _quad(f, lo, hi, what):
    val, err = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)
    scale = max(abs(val), 1e-300)
    if err > 1e-9 * scale and err > 1e-300:
        raise AccuracyError(f"quadrature of {what} failed on [{lo:.6g}, {hi:.6g}]", err / scale)
    return val


def _custom_pressure(func, n):
    # p(n) = n μ(n) - ∫_0^n μ  (integration by parts of n μ')
    if n == 0:
        return 0.0
    return n * float(func(n)) - _quad(lambda x: float(func(x)), 0.0, n, "μ")


def pressure(nl: Nonlinearity, n):
    """Barotropic pressure ``p(n)`` with ``p(0) = 0``."""
    narr = np.asarray(n, dtype=float)
    if np.any(narr < 0):
        raise DomainError("density must be non-negative")
    if nl.form == "none":
        out = np.zeros_like(narr)
    elif nl.form == "power_law":
        s = nl.exponent
        out = nl.coefficient * s * narr ** (s + 1) / (s + 1)
    elif nl.form == "logarithmic":
        if np.any(narr <= 0):
            raise DomainError("logarithmic pressure needs n > 0")
        out = -nl.b * narr
    else:
        out = np.vectorize(lambda x: _custom_pressure(nl.func, x), otypes=[float])(narr)
    return float(out) if np.ndim(n) == 0 else out


def energy_density(nl: Nonlinearity, n):
    """Local energy density ``F(n) = ∫_0^n μ``, so that ``δF/δn = μ``."""
    narr = np.asarray(n, dtype=float)
    if nl.form == "none":
        return np.zeros_like(narr)
    if nl.form == "power_law":
        s = nl.exponent
        return nl.coefficient * narr ** (s + 1) / (s + 1)
    if nl.form == "logarithmic":
        safe = np.where(narr > 0, narr, 1.0)
        return np.where(narr > 0, -nl.b * (narr * np.log(nl.a * safe) - narr), 0.0)
    return narr * mu(nl, narr) - pressure(nl, narr)


def sound_speed_sq(nl: Nonlinearity, params) -> float:
    """Squared sound speed ``c_s² = (1/m) dp/dn`` at ``n = n₀``.

    Builtin forms use closed expressions.  Custom forms use the centred
    difference ``[p(n₀+h) - p(n₀-h)]/2h`` with ``h = 1e-6 n₀``; the pressure
    difference is integrated directly over ``[n₀-h, n₀+h]`` to avoid
    cancellation between two large pressures.
    """
    n0, m = params.n0, params.m
    if nl.form == "none":
        return 0.0
    if nl.form == "power_law":
        return nl.coefficient * nl.exponent * n0**nl.exponent / m
    if nl.form == "logarithmic":
        return -nl.b / m
    h = 1e-6 * n0
    lo, hi = n0 - h, n0 + h
    f = lambda x: float(nl.func(x))
    dp = hi * f(hi) - lo * f(lo) - _quad(f, lo, hi, "μ")
    return dp / (2.0 * h) / m


def polytropic_gamma(nl: Nonlinearity) -> Optional[float]:
    """Exponent of ``p ∝ n^γ`` for the builtin forms, ``None`` otherwise."""
    if nl.form == "power_law":
        return 1.0 + nl.exponent
    if nl.form == "logarithmic":
        return 1.0
    return None


def equation_of_state(nl: Nonlinearity, params) -> EquationOfState:
    return EquationOfState(
        pressure=lambda n: pressure(nl, n),
        cs2=sound_speed_sq(nl, params),
        gamma=polytropic_gamma(nl),
    )


def as_custom(nl: Nonlinearity) -> Nonlinearity:
    """Copy of a builtin nonlinearity that only exposes μ(n) as a closure."""
    return Nonlinearity.custom(lambda n, nl=nl: mu(nl, n), label=f"custom({nl.label})")

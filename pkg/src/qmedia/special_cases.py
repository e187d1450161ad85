"""Closed-form dispersion relations and critical wavenumbers of particular media.

These are written out independently of :func:`qmedia.dispersion.omega_sq` so
that they can serve as oracles for the generic relation and for the
bisection root finder.
"""
import math

import numpy as np


def free_omega_sq(k, cs2=0.0, hbar=1.0, m=1.0):
    """Medium without long-range interaction."""
    k = np.asarray(k, dtype=float)
    return cs2 * k**2 + hbar**2 * k**4 / (4.0 * m**2)


def bogoliubov_omega(k, cs2, hbar=1.0, m=1.0):
    """Positive Bogoliubov branch; needs ``cs2 >= 0``."""
    k = np.asarray(k, dtype=float)
    return np.sqrt(hbar**2 * k**4 / (4.0 * m**2) + cs2 * k**2)


def poisson_omega_sq(k, coupling, n0, m, cs2=0.0, hbar=1.0):
    k = np.asarray(k, dtype=float)
    return 4.0 * math.pi * coupling * n0 / m + cs2 * k**2 + hbar**2 * k**4 / (4.0 * m**2)


def jeans_omega_sq(k, omega_j, cs2=0.0, hbar=1.0, m=1.0):
    """Self-gravitating medium; ``hbar = 0`` and ``cs2 = 0`` give the reduced forms."""
    k = np.asarray(k, dtype=float)
    return -(omega_j**2) + cs2 * k**2 + hbar**2 * k**4 / (4.0 * m**2)


def plasma_omega_sq(k, omega_p, cs2=0.0, hbar=1.0, m=1.0):
    k = np.asarray(k, dtype=float)
    return omega_p**2 + cs2 * k**2 + hbar**2 * k**4 / (4.0 * m**2)


def chemotaxis_omega_sq(k, lam, rho_bar, cs2):
    k = np.asarray(k, dtype=float)
    return -lam * rho_bar + cs2 * k**2


def jeans_wavenumber(G, n0, m, cs2=0.0, hbar=1.0):
    """Jeans wavenumber with sound speed and quantum pressure.

    ``√2 m/ħ [√(c_s⁴ + 4πGn₀ħ²/m) - c_s²]^{1/2}``; the bracket is evaluated
    as ``x/(√(c_s⁴+x) + c_s²)`` when ``c_s² > 0`` to avoid cancellation.
    """
    x = 4.0 * math.pi * G * n0 * hbar**2 / m
    root = math.sqrt(cs2**2 + x)
    bracket = x / (root + cs2) if cs2 > 0 else root - cs2
    return math.sqrt(2.0) * m / hbar * math.sqrt(bracket)


def tachyonic_wavenumber(cs2, hbar=1.0, m=1.0):
    """Attractive contact interaction without long-range forces, ``cs2 < 0``."""
    return math.sqrt(4.0 * m**2 * abs(cs2) / hbar**2)


def quantum_jeans_wavenumber(G, n0, m, hbar=1.0):
    """Gravity balanced by quantum pressure alone."""
    return (16.0 * math.pi * G * n0 * m**3 / hbar**2) ** 0.25


def classical_jeans_wavenumber(G, n0, m, cs2):
    return math.sqrt(4.0 * math.pi * G * n0 * m / cs2)


def chemotaxis_wavenumber(lam, rho_bar, cs2):
    return math.sqrt(lam * rho_bar / cs2)

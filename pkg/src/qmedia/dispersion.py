"""Linear stability of a homogeneous medium.

The generic relation is

    ω² = (n₀/m) Ṽ(k) k² + c_s² k² + ħ² k⁴ / 4m²

and everything else here (critical wavenumbers, growth rates, the NMC and
chemotaxis laws, inversion for an analog kernel) is built on it.  ``k = 0``
is never sampled; long-wavelength behaviour is reported as a limit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BracketNotFoundError, DomainError, InputError, SingularityError
from .kernels import FourierSamples, fourier_eval
from .media import MediumSpec, PhysicalParams
from .provenance import write_csv

STABLE, MARGINAL, UNSTABLE = "stable", "marginal", "unstable"


def _terms(medium: MediumSpec, k):
    p = medium.params
    k = np.asarray(k, dtype=float)
    if medium.kernel.is_null:
        interaction = np.zeros_like(k)
    elif medium.kernel.form == "poisson":
        # Ṽ k² is exactly 4πG_kernel; skip the k⁻²·k² round trip
        interaction = np.full_like(k, p.n0 / p.m * 4.0 * math.pi * medium.kernel.coupling)
    else:
        interaction = p.n0 / p.m * fourier_eval(medium.kernel, k) * k**2
    pressure = medium.cs2 * k**2
    quantum = p.hbar**2 * k**4 / (4.0 * p.m**2)
    return interaction, pressure, quantum


def omega_sq(medium: MediumSpec, k):
    """ω² of the generic dispersion relation for scalar or array ``k > 0``."""
    if np.any(~(np.asarray(k, dtype=float) > 0)):
        raise DomainError("dispersion is evaluated for k > 0 only")
    a, b, c = _terms(medium, k)
    out = a + b + c
    return float(out) if np.ndim(k) == 0 else out


def term_scale(medium: MediumSpec, k):
    """Sum of absolute term magnitudes, the natural scale of ω²(k)."""
    a, b, c = _terms(medium, k)
    return np.abs(a) + np.abs(b) + np.abs(c)


def classify(w2):
    w2 = np.asarray(w2, dtype=float)
    return np.where(w2 > 0, STABLE, np.where(w2 < 0, UNSTABLE, MARGINAL))


@dataclass(frozen=True)
class DispersionCurve:
    k: np.ndarray
    omega_sq: np.ndarray
    classification: np.ndarray
    gamma: np.ndarray

    @classmethod
    def from_samples(cls, k, w2):
        k = np.asarray(k, dtype=float)
        w2 = np.asarray(w2, dtype=float)
        if k.ndim != 1 or k.shape != w2.shape:
            raise InputError("k and ω² must be 1-d arrays of equal length")
        if np.any(k <= 0) or np.any(np.diff(k) <= 0):
            raise InputError("k must be positive and strictly increasing")
        gamma = np.full_like(w2, np.nan)
        neg = w2 < 0
        gamma[neg] = np.sqrt(-w2[neg])
        return cls(k, w2, classify(w2), gamma)

    def bands(self):
        """Contiguous k intervals sharing one classification."""
        out = []
        start = 0
        for i in range(1, self.k.size + 1):
            if i == self.k.size or self.classification[i] != self.classification[start]:
                out.append({"class": str(self.classification[start]),
                            "k_min": float(self.k[start]), "k_max": float(self.k[i - 1])})
                start = i
        return out

    def to_csv(self, path, provenance=None):
        rows = zip(self.k, self.omega_sq, self.classification, self.gamma)
        write_csv(path, ["k", "omega_sq", "class", "gamma"],
                  ((float(a), float(b), str(c), float(d)) for a, b, c, d in rows), provenance)


def sample_curve(medium: MediumSpec, k) -> DispersionCurve:
    return DispersionCurve.from_samples(k, omega_sq(medium, k))


@dataclass(frozen=True)
class CriticalWavenumber:
    k_star: Optional[float]
    bracket: Optional[tuple]
    residual: Optional[float]
    scan_range: tuple


def _balance_scales(medium: MediumSpec):
    """Wavenumbers where two terms of ω² have equal magnitude.

    Returns ``(quantum, classical)``: balances against the ħ²k⁴ term, and the
    kernel/pressure balance.
    """
    p = medium.params
    omega2 = 0.0
    if not medium.kernel.is_null:
        lo, hi = medium.kernel.k_range
        k_ref = 1.0 if lo <= 1.0 <= hi else math.sqrt(lo * hi) if math.isfinite(hi) else 2 * lo
        omega2 = abs(float(_terms(medium, k_ref)[0]))
    cs2 = abs(medium.cs2)
    quantum, classical = [], []
    with np.errstate(over="ignore", divide="ignore"):
        if p.hbar > 0:
            if omega2 > 0:
                quantum.append(math.sqrt(2.0 * p.m * math.sqrt(omega2) / p.hbar))
            if cs2 > 0:
                quantum.append(2.0 * p.m * math.sqrt(cs2) / p.hbar)
        if omega2 > 0 and cs2 > 0:
            classical.append(math.sqrt(omega2 / cs2) if omega2 / cs2 < 1e300 else math.inf)
    keep = lambda xs: [x for x in xs if 0 < x < math.inf]
    return keep(quantum), keep(classical)


def characteristic_wavenumber(medium: MediumSpec) -> float:
    """Scale above which ω² keeps its large-k sign (1 if the medium has no scale).

    With ħ > 0 the ħ²k⁴ term dominates every other term beyond the largest
    quantum balance, so that bounds all roots; otherwise the kernel/pressure
    balance is used.
    """
    quantum, classical = _balance_scales(medium)
    scales = quantum if medium.params.hbar > 0 and quantum else classical
    return max(scales) if scales else 1.0


def _lowest_scale(medium: MediumSpec) -> float:
    quantum, classical = _balance_scales(medium)
    scales = quantum + classical
    return min(scales) if scales else 1.0


def critical_wavenumber(medium: MediumSpec, k_hi=None, k_lo=None, n_scan=4001,
                        rtol=1e-10) -> CriticalWavenumber:
    """Lowest k where ω² changes sign, located by scan and bisection.

    The scan runs over ``[k_lo, k_hi]`` (log-spaced); the default ``k_hi`` is
    10³ times :func:`characteristic_wavenumber` and the default ``k_lo`` is
    10⁻⁹ times the smallest balance wavenumber.
    ``k_star`` is ``None`` when ω² keeps one sign over the whole domain.

    Raises
    ------
    BracketNotFoundError
        If ω² is still negative at ``k_hi`` while the ħ²k⁴ term guarantees a
        root further out.
    """
    kc = characteristic_wavenumber(medium)
    k_hi = 1e3 * kc if k_hi is None else float(k_hi)
    k_lo = 1e-9 * _lowest_scale(medium) if k_lo is None else float(k_lo)
    lo_dom, hi_dom = medium.kernel.k_range
    k_lo, k_hi = max(k_lo, lo_dom), min(k_hi, hi_dom)
    if not 0 < k_lo < k_hi:
        raise InputError("invalid scan range")
    ks = np.geomspace(k_lo, k_hi, n_scan)
    w2 = omega_sq(medium, ks)
    sgn = np.sign(w2)
    change = np.nonzero(sgn[:-1] * sgn[1:] <= 0)[0]
    change = [i for i in change if not (sgn[i] == 0 and sgn[i + 1] == 0)]
    if not change:
        if w2[-1] < 0 and medium.params.hbar > 0 and math.isinf(hi_dom):
            raise BracketNotFoundError("ω² < 0 at the scan bound but a root must exist beyond it",
                                       (k_lo, k_hi))
        return CriticalWavenumber(None, None, None, (k_lo, k_hi))
    i = change[0]
    if sgn[i] == 0:
        root = float(ks[i])
        return CriticalWavenumber(root, (root, root), 0.0, (k_lo, k_hi))
    a, b = float(ks[i]), float(ks[i + 1])
    fa = w2[i]
    for _ in range(200):
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        fm = omega_sq(medium, mid)
        if fm == 0:
            a = b = mid
            break
        if (fm < 0) == (fa < 0):
            a, fa = mid, fm
        else:
            b = mid
    root = 0.5 * (a + b)
    residual = abs(omega_sq(medium, root)) / float(term_scale(medium, root))
    if residual > rtol:
        # sign change is a discontinuity (pole), not a root
        raise SingularityError("ω² changes sign without a root", root)
    return CriticalWavenumber(root, (float(ks[i]), float(ks[i + 1])), residual, (k_lo, k_hi))


@dataclass(frozen=True)
class NmcParams:
    """Weak-field parameters of non-minimal matter-curvature coupling gravity.

    Units follow from the dispersion law: ``gamma`` has units of ``G`` (so
    ``γ m n₀`` is a squared frequency), ``alpha`` is a squared length and
    ``beta`` has units of ``gamma × length²``.
    """

    alpha: float
    beta: float
    gamma: float


def omega_sq_nmc(p: NmcParams, params: PhysicalParams, k):
    """Jeans-type dispersion of NMC gravity."""
    k = np.asarray(k, dtype=float)
    den = 1.0 + 3.0 * p.alpha * k**2
    if np.any(den == 0):
        bad = np.atleast_1d(k)[np.atleast_1d(den) == 0][0]
        raise SingularityError("pole 1 + 3αk² = 0", float(bad))
    grav = -((p.alpha * p.gamma - p.beta / 2) * k**2 + p.gamma / 4) / den * params.m * params.n0
    out = grav + params.hbar**2 * k**4 / (4.0 * params.m**2)
    return float(out) if out.ndim == 0 else out


def omega_sq_chemotaxis(lam, rho_bar, cs2, k):
    """Classical chemotactic aggregation; ``lam > 0`` is attractive."""
    if not rho_bar > 0:
        raise InputError("rho_bar must be positive")
    k = np.asarray(k, dtype=float)
    out = -lam * rho_bar + cs2 * k**2
    return float(out) if out.ndim == 0 else out


def chemotaxis_critical_wavenumber(lam, rho_bar, cs2):
    """``(λρ̄/c_s²)^{1/2}`` for attraction with ``c_s² > 0``, else ``None``."""
    if lam > 0 and cs2 > 0:
        return math.sqrt(lam * rho_bar / cs2)
    return None


def match_analog(k, target_omega_sq, params: PhysicalParams, cs2=None, min_points=8):
    """Kernel transform that makes a medium reproduce a target dispersion law.

    Solves the generic relation for ``Ṽ(k)``.  When ``cs2`` is not given it is
    fitted as the coefficient of ``k²`` in a least-squares fit of
    ``ω² - ħ²k⁴/4m² = a + c_s² k²`` over the upper half of the k samples (the
    constant absorbs a Poisson-type kernel).

    Returns
    -------
    (FourierSamples, float)
        Sampled ``Ṽ(k)`` and the ``c_s²`` that was used.
    """
    k = np.asarray(k, dtype=float)
    w2 = np.asarray(target_omega_sq, dtype=float)
    if k.ndim != 1 or k.shape != w2.shape:
        raise InputError("k and target ω² must be 1-d arrays of equal length")
    if k.size < min_points:
        raise InputError(f"target grid too sparse: {k.size} points, need at least {min_points}")
    if np.any(k <= 0) or np.any(np.diff(k) <= 0):
        raise InputError("target k must be positive and strictly increasing")
    m, hbar, n0 = params.m, params.hbar, params.n0
    residual = w2 - hbar**2 * k**4 / (4.0 * m**2)
    if cs2 is None:
        upper = slice(k.size // 2, None)
        design = np.column_stack([np.ones(k[upper].size), k[upper] ** 2])
        coef, *_ = np.linalg.lstsq(design, residual[upper], rcond=None)
        cs2 = float(coef[1])
    vk = (m / n0) * (residual - cs2 * k**2) / k**2
    return FourierSamples(k, vk), float(cs2)


def long_wave_limit(medium: MediumSpec, k_small):
    """``ω²/k²`` at small k; tends to c_s² when there is no long-range kernel."""
    return omega_sq(medium, k_small) / k_small**2


def short_wave_ratio(medium: MediumSpec, k_large):
    """``ω² / (ħ²k⁴/4m²)``; tends to 1 when ħ > 0."""
    p = medium.params
    return omega_sq(medium, k_large) / (p.hbar**2 * k_large**4 / (4.0 * p.m**2))


def summary(medium: MediumSpec, curve: DispersionCurve, crit: CriticalWavenumber):
    k_small, k_large = float(curve.k[0]), float(curve.k[-1])
    limits = {
        "k_min": k_small,
        "omega_sq_at_k_min": float(curve.omega_sq[0]),
        "omega_sq_over_k2_at_k_min": float(long_wave_limit(medium, k_small)),
        "k_max": k_large,
    }
    if medium.params.hbar > 0:
        limits["omega_sq_over_quantum_term_at_k_max"] = float(short_wave_ratio(medium, k_large))
    return {
        "medium": medium.name,
        "cs2": medium.cs2,
        "k_star": crit.k_star,
        "k_star_bracket": crit.bracket,
        "k_star_residual": crit.residual,
        "scan_range": crit.scan_range,
        "limits": limits,
        "bands": curve.bands(),
    }

"""Long-range self-interaction kernels, described by their Fourier transforms.

A kernel ``V(|r - r'|)`` enters the dynamics only through ``Ṽ(k)``, so every
kernel here is defined in Fourier space.  Real-space forms are only used by
:func:`numeric_radial_transform`, which serves as an independent check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from .errors import AccuracyError, DomainError, InputError

KERNEL_FORMS = ("none", "poisson", "nmc_pure", "custom_fourier")
TABLE_HEADER = "# k Vk"


@dataclass(frozen=True)
class FourierSamples:
    """Sampled transform ``Ṽ(k)`` on a strictly increasing positive k grid."""

    k: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        k = np.array(self.k, dtype=float)
        v = np.array(self.values, dtype=float)
        if k.ndim != 1 or k.shape != v.shape:
            raise InputError("k and values must be 1-d arrays of equal length")
        if k.size and (k[0] <= 0 or np.any(np.diff(k) <= 0)):
            raise InputError("k grid must be positive and strictly increasing")
        k.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.k.size


@dataclass(frozen=True)
class InteractionKernel:
    """An isotropic real interaction kernel.

    Use the named constructors rather than the raw fields:

    * :meth:`none` -- no long-range interaction;
    * :meth:`poisson` -- ``V = G/r`` with ``Ṽ = 4πG/k²``;
    * :meth:`nmc_pure` -- ``Ṽ = -4πA/k² + 2πB``, the constant-plus-Coulomb
      form that reproduces the pure non-minimal-coupling dispersion law
      (``A = γm²/16π``, ``B = βm²/4π``).  It is a matched transform, not the
      transform of a real-space ``B/r³`` term, which is log-divergent;
    * :meth:`custom` -- a closure ``k -> Ṽ(k)``;
    * :meth:`from_table` -- monotone cubic interpolation of samples.
    """

    form: str = "none"
    coupling: float = 0.0
    A: float = 0.0
    B: float = 0.0
    func: Optional[Callable] = field(default=None, compare=False)
    table: Optional[FourierSamples] = field(default=None, compare=False)
    zero_mode: Optional[float] = None
    label: str = ""

    def __post_init__(self):
        if self.form not in KERNEL_FORMS:
            raise InputError(f"unknown kernel form {self.form!r}")
        if self.form == "custom_fourier" and self.func is None and self.table is None:
            raise InputError("custom_fourier kernel needs a closure or a table")
        if self.table is not None and self.func is None:
            if len(self.table) < 2:
                raise InputError("a kernel table needs at least two samples")
            interp = PchipInterpolator(self.table.k, self.table.values, extrapolate=False)
            object.__setattr__(self, "func", interp)

    @classmethod
    def none(cls):
        return cls("none", label="none")

    @classmethod
    def poisson(cls, coupling):
        return cls("poisson", coupling=float(coupling), label="poisson")

    @classmethod
    def nmc_pure(cls, A, B):
        return cls("nmc_pure", A=float(A), B=float(B), label="nmc_pure")

    @classmethod
    def custom(cls, func, zero_mode=None, label="custom"):
        return cls("custom_fourier", func=func, zero_mode=zero_mode, label=label)

    @classmethod
    def from_table(cls, samples: FourierSamples, label="table"):
        return cls("custom_fourier", table=samples, label=label)

    @property
    def is_null(self):
        return self.form == "none"

    @property
    def k_range(self):
        """Domain of validity for tabulated kernels, ``(0, inf)`` otherwise."""
        if self.table is not None:
            return float(self.table.k[0]), float(self.table.k[-1])
        return 0.0, math.inf

    def scaled(self, c):
        """Kernel with every coupling multiplied by ``c``."""
        if self.form == "none":
            return self
        if self.form == "poisson":
            return InteractionKernel.poisson(c * self.coupling)
        if self.form == "nmc_pure":
            return InteractionKernel.nmc_pure(c * self.A, c * self.B)
        if self.table is not None:
            samples = FourierSamples(self.table.k, c * self.table.values)
            return InteractionKernel.from_table(samples, label=self.label)
        f = self.func
        z = None if self.zero_mode is None else c * self.zero_mode
        return InteractionKernel.custom(lambda k: c * f(k), zero_mode=z, label=self.label)

    def zero_mode_value(self):
        """Finite ``Ṽ(0)`` if the kernel has one, else ``None``."""
        if self.form == "none":
            return 0.0
        if self.form == "custom_fourier" and self.zero_mode is not None:
            return float(self.zero_mode)
        return None


def fourier_eval(kernel: InteractionKernel, k):
    """Evaluate ``Ṽ(k)`` for scalar or array ``k > 0``."""
    karr = np.asarray(k, dtype=float)
    if np.any(~(karr > 0)):
        raise DomainError("Ṽ(k) is only evaluated for k > 0; the k = 0 mode is a policy choice")
    if kernel.form == "none":
        out = np.zeros_like(karr)
    elif kernel.form == "poisson":
        out = 4.0 * np.pi * kernel.coupling / karr**2
    elif kernel.form == "nmc_pure":
        out = -4.0 * np.pi * kernel.A / karr**2 + 2.0 * np.pi * kernel.B
    else:
        lo, hi = kernel.k_range
        if np.any(karr < lo) or np.any(karr > hi):
            raise DomainError(
                f"k outside the tabulated range [{lo:.6g}, {hi:.6g}] of kernel {kernel.label!r}"
            )
        out = np.asarray(kernel.func(karr), dtype=float)
        if np.iscomplexobj(out):
            raise DomainError("kernel transform must be real")
    if np.ndim(k) == 0:
        return float(out)
    return out


def numeric_radial_transform(V, k, r_max, tolerance=1e-10, limit=500):
    """Transform an isotropic real-space kernel by adaptive quadrature.

    Computes ``Ṽ(k) = (4π/k) ∫_0^{r_max} r sin(kr) V(r) dr`` with QUADPACK's
    oscillatory-weight rule.  ``tolerance`` is absolute on ``Ṽ``; the caller
    is responsible for choosing ``r_max`` so that the neglected tail is below
    it.

    Raises
    ------
    AccuracyError
        If the quadrature error estimate exceeds ``tolerance``.
    """
    ks = np.atleast_1d(np.asarray(k, dtype=float))
    if np.any(ks <= 0):
        raise DomainError("k must be positive")
    values = np.empty_like(ks)
    # QUADPACK samples the endpoint r = 0; use the limit of r V(r) there
    r_tiny = 1e-12 * r_max
    f = lambda r: r * V(r) if r > 0 else r_tiny * V(r_tiny)
    for i, kk in enumerate(ks):
        pref = 4.0 * np.pi / kk
        val, err, *rest = integrate.quad(
            f,
            0.0,
            r_max,
            weight="sin",
            wvar=kk,
            epsabs=tolerance / pref / 4,
            epsrel=0.0,
            limit=limit,
            full_output=1,
        )
        if pref * err > tolerance:
            raise AccuracyError(f"radial transform did not converge at k={kk:.6g}", pref * err)
        values[i] = pref * val
    return FourierSamples(ks, values)


def regulated_radial_transform(V, k, eps=(0.1, 0.05, 0.025, 0.0125, 0.00625), tolerance=1e-10):
    """Transform a long-range kernel through an ``exp(-εr)`` regulator.

    Each regulated transform is computed with ``r_max`` chosen so that the
    regulator has decayed below ``tolerance``; the ``ε -> 0`` limit is then
    taken by polynomial (Neville) extrapolation through all ``eps`` values.
    """
    ks = np.atleast_1d(np.asarray(k, dtype=float))
    eps = np.asarray(sorted(eps, reverse=True), dtype=float)
    table = np.empty((eps.size, ks.size))
    for j, e in enumerate(eps):
        r_max = -math.log(tolerance * 1e-3) / e
        table[j] = numeric_radial_transform(
            lambda r, e=e: V(r) * math.exp(-e * r), ks, r_max, tolerance
        ).values
    # Neville's scheme evaluated at eps = 0
    p = table.copy()
    for level in range(1, eps.size):
        for j in range(eps.size - level):
            e0, e1 = eps[j], eps[j + level]
            p[j] = (e1 * p[j] - e0 * p[j + 1]) / (e1 - e0)
    return FourierSamples(ks, p[0])


def load_fourier_table(path) -> FourierSamples:
    """Read a two-column ``k Vk`` text table.

    Comment lines start with ``#``; one of them must be exactly ``# k Vk``.
    """
    lines = Path(path).read_text().splitlines()
    comments = [ln.strip() for ln in lines if ln.strip().startswith("#")]
    if TABLE_HEADER not in [" ".join(c.split()) for c in comments]:
        raise InputError(f"{path}: missing header line {TABLE_HEADER!r}")
    rows = [ln.split() for ln in lines if ln.strip() and not ln.strip().startswith("#")]
    if any(len(r) != 2 for r in rows):
        raise InputError(f"{path}: every data line needs exactly two columns")
    data = np.array(rows, dtype=float).reshape(-1, 2)
    if np.any(np.diff(data[:, 0]) <= 0):
        raise InputError(f"{path}: k column must be strictly ascending")
    return FourierSamples(data[:, 0], data[:, 1])


def save_fourier_table(path, samples: FourierSamples, provenance=None):
    from .provenance import format_float

    out = []
    if provenance:
        out.append(f"# {provenance}")
    out.append(TABLE_HEADER)
    for kk, vv in zip(samples.k, samples.values):
        out.append(f"{format_float(kk)} {format_float(vv)}")
    Path(path).write_text("\n".join(out) + "\n")

"""Periodic uniform grids, wavefunction states and spectral derivatives."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DegenerateStateError, InputError


def _is_pow2(n):
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Periodic box ``[0, L_i)`` sampled with ``N_i`` points per axis."""

    shape: tuple
    lengths: tuple

    def __post_init__(self):
        shape = tuple(int(s) for s in np.atleast_1d(self.shape))
        lengths = tuple(float(x) for x in np.atleast_1d(self.lengths))
        if len(shape) not in (1, 2, 3) or len(lengths) != len(shape):
            raise InputError("grid needs 1 to 3 axes with one length per axis")
        if not all(_is_pow2(s) for s in shape):
            raise InputError(f"grid sizes must be powers of two, got {shape}")
        if not all(L > 0 for L in lengths):
            raise InputError("box lengths must be positive")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "lengths", lengths)

    @property
    def dims(self):
        return len(self.shape)

    @property
    def spacing(self):
        return tuple(L / N for L, N in zip(self.lengths, self.shape))

    @property
    def dV(self):
        return math.prod(self.spacing)

    @property
    def volume(self):
        return math.prod(self.lengths)

    @property
    def size(self):
        return math.prod(self.shape)

    def _bcast(self, axis, vec):
        shp = [1] * self.dims
        shp[axis] = vec.size
        return vec.reshape(shp)

    @cached_property
    def coords(self):
        """Broadcastable coordinate arrays, one per axis."""
        return tuple(self._bcast(i, np.arange(N) * dx)
                     for i, (N, dx) in enumerate(zip(self.shape, self.spacing)))

    @cached_property
    def wavevectors(self):
        """Broadcastable angular wavenumber arrays in FFT order."""
        return tuple(self._bcast(i, 2 * np.pi * np.fft.fftfreq(N, d=dx))
                     for i, (N, dx) in enumerate(zip(self.shape, self.spacing)))

    @cached_property
    def odd_wavevectors(self):
        """Wavevectors with the Nyquist entry zeroed, for odd-order derivatives."""
        out = []
        for i, N in enumerate(self.shape):
            k = 2 * np.pi * np.fft.fftfreq(N, d=self.spacing[i])
            k[N // 2] = 0.0
            out.append(self._bcast(i, k))
        return tuple(out)

    @cached_property
    def k2(self):
        return sum(k**2 for k in self.wavevectors)

    @property
    def k_max(self):
        """Largest resolved wavenumber along the finest axis (Nyquist)."""
        return max(math.pi / dx for dx in self.spacing)

    def fundamental(self, axis=0):
        return 2 * math.pi / self.lengths[axis]

    def mode_index(self, k, axis=0, tol=1e-9):
        """Integer mode index for a wavenumber that lies on the grid."""
        j = k / self.fundamental(axis)
        jr = round(j)
        if abs(j - jr) > tol * max(1.0, abs(j)):
            raise InputError(f"k={k:.6g} is not a grid wavenumber (box length {self.lengths[axis]:.6g})")
        return int(jr)

    def dealias_mask(self, fraction=2.0 / 3.0):
        """Boolean mask keeping modes with ``|k_i| <= fraction * k_nyq,i`` on every axis."""
        mask = np.ones(self.shape, dtype=bool)
        for i, k in enumerate(self.wavevectors):
            mask &= np.abs(k) <= fraction * math.pi / self.spacing[i] + 1e-12
        return mask


@dataclass(frozen=True)
class GridState:
    """Wavefunction sampled on a periodic grid at time ``t``."""

    psi: np.ndarray
    grid: Grid
    t: float = 0.0

    def __post_init__(self):
        psi = np.array(self.psi, dtype=complex)
        if psi.shape != self.grid.shape:
            raise InputError(f"field shape {psi.shape} does not match grid {self.grid.shape}")
        norm = float(np.sum(np.abs(psi) ** 2) * self.grid.dV)
        if not np.isfinite(norm):
            raise DegenerateStateError("wavefunction norm is not finite")
        if norm <= 0:
            raise DegenerateStateError("wavefunction vanishes identically")
        psi.flags.writeable = False
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "t", float(self.t))

    @property
    def density(self):
        return np.abs(self.psi) ** 2

    @property
    def norm(self):
        return float(np.sum(np.abs(self.psi) ** 2) * self.grid.dV)

    @classmethod
    def uniform(cls, grid, n0, t=0.0):
        return cls(np.full(grid.shape, math.sqrt(n0), dtype=complex), grid, t)


def fft(f):
    return np.fft.fftn(f)


def ifft(F, real=False):
    out = np.fft.ifftn(F)
    return out.real if real else out


def gradient(f, grid: Grid):
    """Spectral gradient; returns one array per axis (real if ``f`` is real)."""
    F = fft(f)
    real = not np.iscomplexobj(f)
    return [ifft(1j * k * F, real) for k in grid.odd_wavevectors]


def divergence(vec, grid: Grid):
    total = sum(1j * k * fft(v) for k, v in zip(grid.odd_wavevectors, vec))
    real = not any(np.iscomplexobj(v) for v in vec)
    return ifft(total, real)


def laplacian(f, grid: Grid):
    return ifft(-grid.k2 * fft(f), not np.iscomplexobj(f))


def mode_amplitude(field, grid: Grid, index):
    """Normalised Fourier coefficient ``(1/N) Σ f e^{-ik·r}`` of one grid mode."""
    F = fft(field)
    return complex(F[tuple(index)]) / grid.size

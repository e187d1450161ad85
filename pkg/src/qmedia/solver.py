"""Strang split-step pseudospectral integrator for the nonlocal nonlinear
Schrödinger equation

    iħ ∂ψ/∂t = [-ħ²Δ/2m + Φ[|ψ|²] + μ(|ψ|²)] ψ,   Φ = V * |ψ|².

The external potential of a neutralising background (or the Jeans swindle)
is never built as a field: it is exactly the removal of the k = 0 mode of
the convolution.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BlowUpError, ConfigurationError
from .grid import Grid, GridState
from .kernels import fourier_eval
from .media import MediumSpec, PhysicalParams
from .nonlinearity import energy_density, mu
from .provenance import write_csv


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    grid: Grid
    dealias: Optional[bool] = None
    snapshot_every: int = 0
    safety: float = 0.5

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive")
        if self.t_end < 0:
            raise ConfigurationError("t_end must be non-negative")
        if not 0 < self.safety:
            raise ConfigurationError("safety factor must be positive")

    @property
    def dims(self):
        return self.grid.dims

    def dt_bound(self, params: PhysicalParams):
        """Kinetic phase-rotation bound ``safety * 2m dx² / (π ħ)``."""
        if params.hbar == 0:
            return math.inf
        dx = min(self.grid.spacing)
        return self.safety * 2.0 * params.m * dx**2 / (math.pi * params.hbar)

    def use_dealias(self, medium: MediumSpec):
        return (not medium.nonlinearity.is_null) if self.dealias is None else bool(self.dealias)

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))


@dataclass(frozen=True)
class StepReport:
    t: float
    norm: float
    e_kin: float
    e_int: float
    e_nl: float
    e_ext: float
    max_psi: float

    @property
    def energy(self):
        return self.e_kin + self.e_int + self.e_nl + self.e_ext


REPORT_COLUMNS = ["t", "N", "E_kin", "E_int", "E_nl", "max_psi"]


def write_reports(path, reports, provenance=None):
    write_csv(path, REPORT_COLUMNS,
              ((r.t, r.norm, r.e_kin, r.e_int, r.e_nl, r.max_psi) for r in reports), provenance)


def kernel_on_grid(grid: Grid, medium: MediumSpec):
    """``Ṽ`` on the full FFT grid with the k = 0 entry set by the background policy."""
    vk = np.zeros(grid.shape)
    if medium.kernel.is_null:
        return vk
    k = np.sqrt(grid.k2)
    nz = k > 0
    vk[nz] = fourier_eval(medium.kernel, k[nz])
    zero = (0,) * grid.dims
    if medium.zeroes_k0:
        vk[zero] = 0.0
    else:
        v0 = medium.kernel.zero_mode_value()
        if v0 is None or not np.isfinite(v0):
            raise ConfigurationError(
                f"kernel {medium.kernel.label!r} has a divergent k = 0 mode; use a "
                "neutralizing_background or jeans_swindle external potential mode"
            )
        vk[zero] = v0
    return vk


def nonlocal_potential(state: GridState, medium: MediumSpec):
    """Convolution ``∫ |ψ(r')|² V(|r - r'|) dr'`` evaluated spectrally.

    With a finite ``Ṽ(0)`` and no background subtraction the zero mode
    contributes ``Ṽ(0) N / Volume``.
    """
    vk = kernel_on_grid(state.grid, medium)
    return np.fft.ifftn(vk * np.fft.fftn(state.density)).real


class SplitStepSolver:
    """Second-order Strang splitting with a spectral kinetic substep.

    One step is ``A(dt/2) B(dt) A(dt/2)`` with ``A`` the local phase from
    ``Φ + μ(n)`` and ``B`` the exact free propagator.  ``A`` leaves ``|ψ|``
    unchanged, so the potential at the end of a step is reused at the start
    of the next.

    ``spectral_filter`` is an optional boolean Fourier mask applied together
    with the kinetic substep (and combined with the 2/3 dealiasing mask).
    """

    def __init__(self, medium: MediumSpec, cfg: SolverConfig, check_dt=True, spectral_filter=None):
        p = medium.params
        if p.hbar == 0:
            raise ConfigurationError(
                "the wavefunction solver needs ħ > 0; approximate the classical limit "
                "with classical_surrogate()"
            )
        if check_dt and cfg.dt > cfg.dt_bound(p) * (1 + 1e-12):
            raise ConfigurationError(
                f"dt={cfg.dt:.6g} exceeds the kinetic stability bound {cfg.dt_bound(p):.6g}"
            )
        self.medium = medium
        self.cfg = cfg
        self.grid = cfg.grid
        g = self.grid
        self._vk_full = kernel_on_grid(g, medium)
        self._has_kernel = bool(np.any(self._vk_full))
        # real-input transform only keeps the last axis' non-negative half
        self._vk_half = self._vk_full[..., : g.shape[-1] // 2 + 1]
        self._nl = medium.nonlinearity
        self.dealias = cfg.use_dealias(medium)
        self._mask = g.dealias_mask() if self.dealias else None
        if spectral_filter is not None:
            keep = np.asarray(spectral_filter, dtype=bool)
            self._mask = keep if self._mask is None else self._mask & keep
        self._kin = {}
        self._axes = tuple(range(g.dims))

    def _kinetic(self, dt):
        if dt not in self._kin:
            p = self.medium.params
            phase = np.exp(-1j * p.hbar * self.grid.k2 * dt / (2.0 * p.m))
            if self._mask is not None:
                phase = phase * self._mask
            self._kin[dt] = phase
        return self._kin[dt]

    def local_potential(self, n):
        V = np.zeros(n.shape) if self._nl.is_null else mu(self._nl, n)
        if self._has_kernel:
            V = V + np.fft.irfftn(self._vk_half * np.fft.rfftn(n), s=n.shape, axes=self._axes)
        return V

    def advance(self, psi, n_steps, dt=None, t0=0.0, every=0, callback=None):
        """Advance a raw field by ``n_steps`` steps of size ``dt``.

        ``callback(step_index, psi)`` is invoked after every ``every``-th
        completed step.  Returns the new field (the input is not modified).
        """
        dt = self.cfg.dt if dt is None else dt
        hbar = self.medium.params.hbar
        kin = self._kinetic(dt)
        psi = np.array(psi, dtype=complex)
        last_good, t_last = psi.copy(), t0
        with np.errstate(over="ignore", invalid="ignore"):
            half = np.exp(-0.5j * dt / hbar * self.local_potential(np.abs(psi) ** 2))
            for s in range(1, n_steps + 1):
                psi *= half
                psi = np.fft.ifftn(kin * np.fft.fftn(psi))
                n = psi.real**2 + psi.imag**2
                if not np.isfinite(n.sum()):
                    raise BlowUpError(t0 + s * dt, GridState(last_good, self.grid, t_last))
                half = np.exp(-0.5j * dt / hbar * self.local_potential(n))
                psi *= half
                if every and s % every == 0:
                    if callback is not None:
                        callback(s, psi)
                    last_good, t_last = psi.copy(), t0 + s * dt
        if n_steps and not np.isfinite(psi).all():
            raise BlowUpError(t0 + n_steps * dt, GridState(last_good, self.grid, t_last))
        return psi

    def step(self, state: GridState, backward=False):
        dt = -self.cfg.dt if backward else self.cfg.dt
        psi = self.advance(state.psi, 1, dt, t0=state.t)
        new = GridState(psi, state.grid, state.t + dt)
        return new, self.report(new)

    def evolve(self, state: GridState, n_steps, every=0, callback=None):
        """Advance a :class:`GridState`; ``callback(state)`` every ``every`` steps."""
        dt = self.cfg.dt
        wrapped = None
        if callback is not None:
            wrapped = lambda s, psi: callback(GridState(psi, state.grid, state.t + s * dt))
        psi = self.advance(state.psi, n_steps, dt, t0=state.t, every=every, callback=wrapped)
        return GridState(psi, state.grid, state.t + n_steps * dt)

    def report(self, state: GridState) -> StepReport:
        p = self.medium.params
        g = state.grid
        n = state.density
        psi_k = np.fft.fftn(state.psi)
        e_kin = p.hbar**2 / (2 * p.m) * float(np.sum(g.k2 * np.abs(psi_k) ** 2)) * g.dV / g.size
        e_int = 0.0
        if self._has_kernel:
            phi = np.fft.irfftn(self._vk_half * np.fft.rfftn(n), s=n.shape, axes=self._axes)
            e_int = 0.5 * float(np.sum(phi * n)) * g.dV
        e_nl = float(np.sum(energy_density(self._nl, n))) * g.dV
        return StepReport(state.t, state.norm, e_kin, e_int, e_nl, 0.0, float(np.sqrt(n.max())))


def step(state: GridState, medium: MediumSpec, cfg: SolverConfig, backward=False):
    """Single Strang step; returns ``(new_state, StepReport)``."""
    return SplitStepSolver(medium, cfg).step(state, backward=backward)


def run(state: GridState, medium: MediumSpec, cfg: SolverConfig, on_snapshot=None):
    """Integrate to ``cfg.t_end``, collecting a report every ``snapshot_every`` steps.

    ``on_snapshot(state, report)`` is called at the same cadence.  Returns the
    final state and the list of reports (the initial report included).
    """
    solver = SplitStepSolver(medium, cfg)
    reports = [solver.report(state)]
    if on_snapshot:
        on_snapshot(state, reports[0])

    def cb(s):
        rep = solver.report(s)
        reports.append(rep)
        if on_snapshot:
            on_snapshot(s, rep)

    n_steps = cfg.n_steps
    every = cfg.snapshot_every or n_steps
    final = solver.evolve(state, n_steps, every=every, callback=cb)
    if n_steps % every:
        cb(final)
    return final, reports


def classical_surrogate(medium: MediumSpec, grid: Grid, ratio=1e-4):
    """Copy of ``medium`` with ħ small enough to mimic the classical fluid.

    ħ is chosen so that the quantum term ``ħ²k⁴/4m²`` at the grid's largest
    wavenumber is ``ratio`` times the largest classical term
    ``|(n₀/m)Ṽk²| + |c_s²|k²`` on the grid.  Returns ``(medium, ratio)``.
    """
    from .dispersion import _terms

    p = medium.params
    k = np.sqrt(grid.k2[grid.k2 > 0])
    a, b, _ = _terms(medium, k)
    classical = float(np.max(np.abs(a) + np.abs(b)))
    if classical == 0:
        raise ConfigurationError("medium has no classical restoring or driving term")
    kmax = float(k.max())
    hbar = 2.0 * p.m * math.sqrt(ratio * classical) / kmax**2
    params = PhysicalParams(p.m, hbar, p.n0)
    return dataclasses.replace(medium, params=params), ratio

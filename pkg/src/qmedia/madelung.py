"""Madelung transform between ψ and the fluid fields (n, u, S, Q).

Derivatives are spectral.  The velocity uses the current-density form
``u = (ħ/m) Im(ψ*∇ψ)/|ψ|²`` rather than a gradient of ``arg ψ``, so no phase
unwrapping is needed.  Below ``vacuum_threshold * max(n)`` the velocity and
the quantum potential are undefined and set to NaN.
"""
from __future__ import annotations

import struct
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateStateError, InconsistentFieldsError, InputError
from .grid import Grid, GridState, divergence, fft, gradient, ifft, laplacian
from .media import MediumSpec, PhysicalParams
from .nonlinearity import pressure
from .provenance import write_csv

DEFAULT_VACUUM = 1e-8


@dataclass(frozen=True)
class MadelungFields:
    n: np.ndarray
    u: tuple
    S: np.ndarray
    Q: np.ndarray
    grid: Grid
    params: PhysicalParams
    t: float = 0.0
    vacuum_threshold: float = DEFAULT_VACUUM

    @property
    def defined(self):
        return self.n >= self.vacuum_threshold * self.n.max()


def current_density(psi, grid: Grid, params: PhysicalParams):
    """``j = n u = (ħ/m) Im(ψ* ∇ψ)``, one component per axis."""
    return [params.hbar / params.m * np.imag(np.conj(psi) * d) for d in gradient(psi, grid)]


def quantum_potential(n, grid: Grid, params: PhysicalParams, form="amplitude"):
    """Bohm potential from the density.

    ``form="amplitude"`` evaluates ``-(ħ²/2m) Δ√n/√n``; ``form="density"``
    evaluates ``-(ħ²/4m)[Δn/n - (∇n)²/2n²]``.  The two are algebraically
    equal; comparing them is a discretisation check.
    """
    c = params.hbar**2 / params.m
    with np.errstate(divide="ignore", invalid="ignore"):
        if form == "amplitude":
            a = np.sqrt(n)
            return -0.5 * c * laplacian(a, grid) / a
        if form == "density":
            grad2 = sum(g**2 for g in gradient(n, grid))
            return -0.25 * c * (laplacian(n, grid) / n - 0.5 * grad2 / n**2)
    raise InputError(f"unknown quantum potential form {form!r}")


def to_fields(state: GridState, params: PhysicalParams, vacuum_threshold=DEFAULT_VACUUM) -> MadelungFields:
    n = state.density
    if not n.max() > 0:
        raise DegenerateStateError("all-zero field has no hydrodynamic representation")
    mask = n >= vacuum_threshold * n.max()
    j = current_density(state.psi, state.grid, params)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = tuple(np.where(mask, ji / n, np.nan) for ji in j)
    Q = np.where(mask, quantum_potential(n, state.grid, params), np.nan)
    S = params.hbar * np.angle(state.psi)
    return MadelungFields(n, u, S, Q, state.grid, params, state.t, vacuum_threshold)


def from_fields(fields: MadelungFields, curl_tol=1e-6) -> GridState:
    """Rebuild ``ψ = √n e^{iS/ħ}`` with ``S`` integrated spectrally from ``m u``.

    A uniform velocity component becomes a linear phase, which is only
    periodic when ``m ū L / 2πħ`` is an integer.

    Raises
    ------
    InconsistentFieldsError
        If ħ = 0, if ``u`` is not a gradient to within ``curl_tol`` (relative),
        or if the mean flow is incompatible with the periodic box.
    """
    p, g = fields.params, fields.grid
    if p.hbar == 0:
        raise InconsistentFieldsError("phase reconstruction is undefined in the classical limit ħ = 0")
    n = np.asarray(fields.n, dtype=float)
    if np.any(n < 0):
        raise InconsistentFieldsError("density must be non-negative")
    u = [np.nan_to_num(np.asarray(c, dtype=float)) for c in fields.u]
    if len(u) != g.dims:
        raise InconsistentFieldsError("velocity needs one component per grid axis")
    phase = np.zeros(g.shape)
    for axis, comp in enumerate(u):
        mean = comp.mean()
        winding = p.m * mean * g.lengths[axis] / (2 * np.pi * p.hbar)
        if abs(winding - round(winding)) > 1e-8 * max(1.0, abs(winding)):
            raise InconsistentFieldsError(
                f"mean velocity along axis {axis} gives a non-integer phase winding {winding:.6g}"
            )
        phase = phase + p.m * mean * g.coords[axis] / p.hbar
    k2 = g.k2.copy()
    k2[(0,) * g.dims] = 1.0
    div_hat = sum(1j * k * fft(p.m * (c - c.mean())) for k, c in zip(g.odd_wavevectors, u))
    S_fluct = ifft(-div_hat / k2, real=True)
    # consistency: ∇S/m must give back the fluctuating velocity
    grads = gradient(S_fluct, g)
    mismatch = np.sqrt(sum(np.sum((gr / p.m - (c - c.mean())) ** 2) for gr, c in zip(grads, u)))
    scale = np.sqrt(sum(np.sum(c**2) for c in u))
    if scale > 0 and mismatch > curl_tol * scale:
        raise InconsistentFieldsError(
            f"velocity is not curl-free: relative mismatch {mismatch / scale:.3e}"
        )
    psi = np.sqrt(n) * np.exp(1j * (phase + S_fluct / p.hbar))
    return GridState(psi, g, fields.t)


def curl(u, grid: Grid):
    """Discrete curl (scalar in 2-d, 3 components in 3-d)."""
    if grid.dims == 2:
        return gradient(u[1], grid)[0] - gradient(u[0], grid)[1]
    if grid.dims == 3:
        gx, gy, gz = (gradient(c, grid) for c in u)
        return (gz[1] - gy[2], gx[2] - gz[0], gy[0] - gx[1])
    raise InputError("curl needs a 2-d or 3-d grid")


def _l2(fields, mask, dV):
    return float(np.sqrt(sum(np.sum(np.where(mask, f, 0.0) ** 2) for f in fields) * dV))


def hydrodynamic_residual(state_a: GridState, state_b: GridState, medium: MediumSpec,
                          vacuum_threshold=DEFAULT_VACUUM):
    """Discrete residuals of the continuity and Euler equations.

    Time derivatives are the difference quotient between the two states and
    all other terms are averaged over them, so both residuals are centred at
    the midpoint and vanish at second order in the time separation for an
    exact solution.  The Euler balance is written per particle::

        m ∂u/∂t + m (u·∇)u + ∇Φ + ∇p/n + ∇Q

    Returns a dict with the L² norms ``continuity`` and ``euler`` taken over
    the non-vacuum region of both states.
    """
    from .solver import nonlocal_potential

    tau = state_b.t - state_a.t
    if tau == 0:
        raise InputError("states must be at different times")
    g = state_a.grid
    p = medium.params
    n_a, n_b = state_a.density, state_b.density
    mask = (n_a >= vacuum_threshold * n_a.max()) & (n_b >= vacuum_threshold * n_b.max())

    def parts(state, n):
        j = current_density(state.psi, g, p)
        safe = np.where(n > 0, n, 1.0)
        u = [np.where(n > 0, c / safe, 0.0) for c in j]
        grads_u = [gradient(c, g) for c in u]
        adv = [p.m * sum(u[j_] * grads_u[i][j_] for j_ in range(g.dims)) for i in range(g.dims)]
        phi = nonlocal_potential(state, medium) if not medium.kernel.is_null else np.zeros(g.shape)
        press = pressure(medium.nonlinearity, n) if not medium.nonlinearity.is_null else np.zeros(g.shape)
        Q = np.nan_to_num(quantum_potential(n, g, p)) if p.hbar > 0 else np.zeros(g.shape)
        grad_phi, grad_p, grad_Q = gradient(phi, g), gradient(press, g), gradient(Q, g)
        force = [adv[i] + grad_phi[i] + grad_p[i] / safe + grad_Q[i] for i in range(g.dims)]
        return j, u, force

    j_a, u_a, f_a = parts(state_a, n_a)
    j_b, u_b, f_b = parts(state_b, n_b)
    cont = (n_b - n_a) / tau + divergence([(x + y) / 2 for x, y in zip(j_a, j_b)], g)
    euler = [p.m * (ub - ua) / tau + (fa + fb) / 2 for ua, ub, fa, fb in zip(u_a, u_b, f_a, f_b)]
    return {"continuity": _l2([cont], mask, g.dV), "euler": _l2(euler, mask, g.dV)}


# --- snapshot container ---------------------------------------------------
_MAGIC = b"QMSNAP1\x00"


def save_snapshot(path, state: GridState, provenance="", byteorder=None):
    """Binary snapshot: magic, endianness tag, header, raw complex128 data.

    Layout after the 8-byte magic and the 1-byte tag (``<`` or ``>``), all in
    the tagged byte order: ``uint32 dims``, ``uint64 shape[dims]``,
    ``float64 lengths[dims]``, ``float64 t``, ``uint32 len`` + UTF-8
    provenance string, then the field in C order.
    """
    bo = byteorder or ("<" if sys.byteorder == "little" else ">")
    if bo not in "<>":
        raise InputError("byteorder must be '<' or '>'")
    g = state.grid
    prov = provenance.encode()
    header = struct.pack(f"{bo}I{g.dims}Q{g.dims}dd", g.dims, *g.shape, *g.lengths, state.t)
    header += struct.pack(f"{bo}I", len(prov)) + prov
    data = np.ascontiguousarray(state.psi, dtype=np.dtype(f"{bo}c16")).tobytes()
    Path(path).write_bytes(_MAGIC + bo.encode() + header + data)


def load_snapshot(path):
    """Read a snapshot; returns ``(GridState, provenance)``."""
    raw = Path(path).read_bytes()
    if raw[:8] != _MAGIC:
        raise InputError(f"{path}: not a snapshot file")
    bo = raw[8:9].decode()
    if bo not in ("<", ">"):
        raise InputError(f"{path}: bad endianness tag {bo!r}")
    off = 9
    (dims,) = struct.unpack_from(f"{bo}I", raw, off)
    off += 4
    shape = struct.unpack_from(f"{bo}{dims}Q", raw, off)
    off += 8 * dims
    lengths = struct.unpack_from(f"{bo}{dims}d", raw, off)
    off += 8 * dims
    (t,) = struct.unpack_from(f"{bo}d", raw, off)
    off += 8
    (plen,) = struct.unpack_from(f"{bo}I", raw, off)
    off += 4
    prov = raw[off: off + plen].decode()
    off += plen
    psi = np.frombuffer(raw, dtype=np.dtype(f"{bo}c16"), offset=off).reshape(shape)
    return GridState(psi.astype(complex), Grid(shape, lengths), t), prov


def export_slice_csv(path, state: GridState, axis=0, index=None, provenance=None):
    """Write a 1-d line through the field: columns x, re_psi, im_psi, n."""
    g = state.grid
    idx = [s // 2 if index is None else index for s in g.shape]
    idx[axis] = slice(None)
    line = state.psi[tuple(idx)]
    x = np.arange(g.shape[axis]) * g.spacing[axis]
    rows = ((float(a), float(b.real), float(b.imag), float(abs(b) ** 2)) for a, b in zip(x, line))
    write_csv(path, ["x", "re_psi", "im_psi", "n"], rows, provenance)

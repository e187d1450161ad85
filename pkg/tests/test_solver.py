import math

import numpy as np
import pytest
from scipy.special import erf

from qmedia.dispersion import omega_sq
from qmedia.errors import BlowUpError, ConfigurationError
from qmedia.grid import Grid, GridState
from qmedia.kernels import InteractionKernel
from qmedia.media import MediumSpec, PhysicalParams
from qmedia.nonlinearity import Nonlinearity
from qmedia.provenance import read_csv
from qmedia.solver import (REPORT_COLUMNS, SolverConfig, SplitStepSolver, classical_surrogate,
                           nonlocal_potential, run, step, write_reports)
from conftest import medium

G1 = Grid((256,), (20 * math.pi,))


def _bump(g=G1):
    x = g.coords[0]
    L = g.lengths[0]
    return (1 + 0.1 * np.exp(-((x - L / 2) / 3) ** 2)) * np.exp(0.2j * np.sin(2 * math.pi * 2 * x / L))


# nonlocal potential ---------------------------------------------------------

def test_uniform_density_has_no_potential():
    for med in (medium("self_gravity", omega_j=1.0), medium("quantum_plasma", omega_p=1.0)):
        phi = nonlocal_potential(GridState.uniform(G1, 1.0), med)
        assert np.max(np.abs(phi)) < 1e-15


def test_single_mode_potential():
    g = Grid((64,), (2 * math.pi,))
    k, eps, n0, coupling = 3.0, 1e-3, 2.0, 0.7
    x = g.coords[0]
    n = n0 * (1 + eps * np.cos(k * x))
    med = MediumSpec(PhysicalParams(n0=n0), InteractionKernel.poisson(coupling),
                     external_potential_mode="neutralizing_background")
    phi = nonlocal_potential(GridState(np.sqrt(n), g), med)
    np.testing.assert_allclose(phi, eps * n0 * 4 * math.pi * coupling / k**2 * np.cos(k * x),
                               atol=1e-15)


def test_finite_zero_mode_without_background():
    g = Grid((32,), (4.0,))
    med = MediumSpec(PhysicalParams(), InteractionKernel.custom(lambda k: 1 / (1 + k**2), zero_mode=1.0))
    state = GridState.uniform(g, 2.0)
    phi = nonlocal_potential(state, med)
    np.testing.assert_allclose(phi, 1.0 * state.norm / g.volume, rtol=1e-14)


def test_poisson_without_background_is_configuration_error():
    med = MediumSpec(PhysicalParams(), InteractionKernel.poisson(1.0), external_potential_mode="none")
    with pytest.raises(ConfigurationError):
        nonlocal_potential(GridState.uniform(G1, 1.0), med)


def test_3d_blob_far_field():
    # oracle: G N erf(r/√2σ)/r for the blob, plus the r² potential of the
    # subtracted uniform background, up to one gauge constant
    N, L, sig = 128, 1.0, 0.015
    g = Grid((N,) * 3, (L,) * 3)
    x, y, z = (c - L / 2 for c in g.coords)
    r = np.sqrt(x**2 + y**2 + z**2)
    state = GridState(np.exp(-r**2 / (4 * sig**2)) + 0j, g)
    med = medium("self_gravity", G=1.0)
    phi = nonlocal_potential(state, med)
    Gk, Ntot = med.kernel.coupling, state.norm
    assert Gk == -1.0
    far = (r > 5 * sig) & (r < 0.3 * L)
    background = (2 * math.pi / 3) * Gk * (Ntot / g.volume) * r[far] ** 2
    blob = Gk * Ntot * erf(r[far] / (math.sqrt(2) * sig)) / r[far]
    gauge = np.mean(phi[far] - blob - background)
    newton = Gk * Ntot / r[far]
    rel = np.abs(phi[far] - gauge - background - newton) / np.abs(newton)
    assert rel.max() < 0.02


# stepping -------------------------------------------------------------------

def test_free_plane_wave_phase():
    g = Grid((16,), (2 * math.pi,))
    k, dt = 3.0, 0.01
    psi = np.exp(1j * k * g.coords[0])
    new, rep = step(GridState(psi, g), medium("free"), SolverConfig(dt, 1.0, g))
    np.testing.assert_allclose(new.psi, psi * np.exp(-0.5j * k**2 * dt), atol=1e-13)
    assert new.t == dt and rep.norm == pytest.approx(2 * math.pi, rel=1e-14)


def test_dt_bound():
    cfg = SolverConfig(1.0, 1.0, G1)
    dx = G1.spacing[0]
    assert cfg.dt_bound(PhysicalParams()) == pytest.approx(0.5 * 2 * dx**2 / math.pi)
    with pytest.raises(ConfigurationError):
        SplitStepSolver(medium("free"), cfg)
    with pytest.raises(ConfigurationError):
        SolverConfig(0.0, 1.0, G1)


def test_classical_medium_needs_surrogate():
    chem = medium("chemotaxis", lam=1.0, cs2=1.0)
    with pytest.raises(ConfigurationError):
        SplitStepSolver(chem, SolverConfig(0.01, 1.0, G1))
    surrogate, ratio = classical_surrogate(chem, G1, ratio=1e-4)
    p = surrogate.params
    kmax = G1.k_max
    classical = 1.0 + 1.0 * kmax**2
    assert p.hbar**2 * kmax**4 / 4 == pytest.approx(ratio * classical, rel=1e-12)
    k = np.geomspace(G1.fundamental(), kmax, 20)
    np.testing.assert_allclose(omega_sq(surrogate, k), omega_sq(chem, k), rtol=2e-4, atol=1e-12)


def test_norm_conservation():
    med = medium("bec", g=1.0)
    sol = SplitStepSolver(med, SolverConfig(0.01, 1.0, G1))
    s0 = GridState(_bump(), G1)
    out = sol.evolve(s0, 2000)
    assert abs(out.norm - s0.norm) / s0.norm <= 1e-12


@pytest.mark.parametrize("dealias", [True, False])
def test_time_reversal(dealias):
    med = medium("self_gravity", omega_j=1.0, cs2=1.0)
    sol = SplitStepSolver(med, SolverConfig(0.01, 1.0, G1, dealias=dealias))
    psi0 = _bump()
    back = sol.advance(sol.advance(psi0, 200), 200, dt=-0.01)
    assert np.linalg.norm(back - psi0) / np.linalg.norm(psi0) <= 1e-10


def test_backward_step():
    med = medium("bec", g=1.0)
    cfg = SolverConfig(0.01, 1.0, G1)
    s0 = GridState(_bump(), G1)
    s1, _ = step(s0, med, cfg)
    s2, _ = step(s1, med, cfg, backward=True)
    assert s2.t == pytest.approx(0.0, abs=1e-18)
    assert np.max(np.abs(s2.psi - s0.psi)) < 1e-13


def _order(med, dealias=None):
    psi0 = _bump()
    ref = SplitStepSolver(med, SolverConfig(1 / 6400, 1.0, G1, dealias=dealias)).advance(psi0, 6400)
    errs = []
    for n in (100, 200, 400):
        out = SplitStepSolver(med, SolverConfig(1 / n, 1.0, G1, dealias=dealias)).advance(psi0, n)
        errs.append(np.linalg.norm(out - ref) / np.linalg.norm(ref))
    return np.log2(np.array(errs[:-1]) / errs[1:])


def test_step_halving_order():
    np.testing.assert_allclose(_order(medium("self_gravity", omega_j=1.0, cs2=1.0)), 2.0, atol=0.1)


def test_energy_drift_second_order():
    med = medium("bec", g=1.0)
    s0 = GridState(_bump(), G1)
    drift = []
    for dt in (0.01, 0.005, 0.0025):
        sol = SplitStepSolver(med, SolverConfig(dt, 1.0, G1))
        e0 = sol.report(s0).energy
        drift.append(abs(sol.report(sol.evolve(s0, int(round(2 / dt)))).energy - e0) / abs(e0))
    np.testing.assert_allclose(np.log2(np.array(drift[:-1]) / drift[1:]), 2.0, atol=0.1)
    assert max(drift) < 1e-7


def test_energy_components():
    med = medium("self_gravity", omega_j=1.0, cs2=0.5)
    g = Grid((16,), (2 * math.pi,))
    sol = SplitStepSolver(med, SolverConfig(0.01, 1.0, g))
    x = g.coords[0]
    eps = 1e-3
    state = GridState(np.sqrt(1 + eps * np.cos(x)), g)
    rep = sol.report(state)
    # (1/2)∫Φ δn with Φ = ε(4πG/k²)cos x, 4πG = -1 and k = 1
    assert rep.e_int == pytest.approx(-eps**2 * g.volume / 4, rel=1e-10)
    assert rep.e_nl == pytest.approx(0.5 * 0.5 * np.sum(state.density**2) * g.dV, rel=1e-14)
    assert rep.max_psi == pytest.approx(math.sqrt(1 + eps))


def test_blow_up_keeps_last_state():
    g = Grid((32,), (2 * math.pi,))
    bad = Nonlinearity.custom(lambda n: np.where(n > 1.5, np.inf, 0.0))
    x = g.coords[0]
    psi = 1 + 0.01 * np.exp(1j * x)
    med_focus = MediumSpec(PhysicalParams(), InteractionKernel.poisson(-5.0), bad, "jeans_swindle")
    cfg = SolverConfig(0.01, 50.0, g, snapshot_every=10)
    with pytest.raises(BlowUpError) as info:
        run(GridState(psi, g), med_focus, cfg)
    err = info.value
    assert err.t > 0 and err.last_state is not None
    assert np.all(np.isfinite(err.last_state.psi)) and 0 < err.last_state.t < err.t


def test_run_reports(tmp_path):
    med = medium("bec", g=1.0)
    cfg = SolverConfig(0.01, 1.0, G1, snapshot_every=25)
    seen = []
    final, reports = run(GridState(_bump(), G1), med, cfg, on_snapshot=lambda s, r: seen.append(s.t))
    assert len(reports) == 5 and seen == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])
    assert final.t == pytest.approx(1.0)
    write_reports(tmp_path / "r.csv", reports, "qmedia test")
    cols, rows = read_csv(tmp_path / "r.csv")
    assert cols == REPORT_COLUMNS == ["t", "N", "E_kin", "E_int", "E_nl", "max_psi"]
    assert len(rows) == 5


def test_dealias_default():
    cfg = SolverConfig(0.01, 1.0, G1)
    assert cfg.use_dealias(medium("bec", g=1.0))
    assert not cfg.use_dealias(medium("self_gravity", omega_j=1.0))
    assert not SolverConfig(0.01, 1.0, G1, dealias=False).use_dealias(medium("bec", g=1.0))

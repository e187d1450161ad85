import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qmedia.errors import DegenerateStateError, InconsistentFieldsError, InputError
from qmedia.grid import Grid, GridState, gradient
from qmedia.madelung import (MadelungFields, curl, export_slice_csv, from_fields,
                             hydrodynamic_residual, load_snapshot, quantum_potential,
                             save_snapshot, to_fields)
from qmedia.media import PhysicalParams
from qmedia.provenance import read_csv
from qmedia.solver import SolverConfig, SplitStepSolver
from conftest import medium

P = PhysicalParams()


def test_plane_wave_fields():
    g = Grid((64,), (2 * math.pi,))
    k, n0 = 3.0, 2.0
    psi = math.sqrt(n0) * np.exp(1j * k * g.coords[0])
    f = to_fields(GridState(psi, g), P)
    assert np.array_equal(f.n, np.abs(psi) ** 2)
    np.testing.assert_allclose(f.n, n0, rtol=1e-14)
    np.testing.assert_allclose(f.u[0], k, rtol=1e-12)
    assert np.max(np.abs(f.Q)) < 1e-12


def _gaussian_state(N=256, L=40.0):
    g = Grid((N,), (L,))
    x = g.coords[0] - L / 2
    return GridState(np.exp(-x**2 / 2), g), x


def test_gaussian_quantum_potential():
    state, x = _gaussian_state()
    f = to_fields(state, P)
    centre = np.argmin(np.abs(x))
    assert f.Q[centre] == pytest.approx(0.5, rel=1e-10)
    # symbolic: Q = -(1/2)(x² - 1) for ħ = m = σ = 1
    core = np.abs(x) < 4
    np.testing.assert_allclose(f.Q[core], -0.5 * (x[core] ** 2 - 1), atol=1e-8)
    assert np.all(np.isnan(f.Q[~f.defined]))


def test_gaussian_finite_difference_crosscheck():
    # second-order finite differences of √n agree with the analytic Q(0)
    h = 1e-3
    a = lambda x: math.exp(-x * x / 2)
    lap = (a(h) - 2 * a(0) + a(-h)) / h**2
    assert -0.5 * lap / a(0) == pytest.approx(0.5, rel=1e-6)


@pytest.mark.parametrize("N", [64, 128])
def test_quantum_potential_forms_agree(N):
    g = Grid((N,), (2 * math.pi,))
    x = g.coords[0]
    n = 1.0 + 0.3 * np.cos(x) + 0.1 * np.sin(2 * x)
    q1 = quantum_potential(n, g, P, "amplitude")
    q2 = quantum_potential(n, g, P, "density")
    # discretisation error of either form: compare against a finer grid
    gf = Grid((4 * N,), (2 * math.pi,))
    xf = gf.coords[0]
    qf = quantum_potential(1.0 + 0.3 * np.cos(xf) + 0.1 * np.sin(2 * xf), gf, P)[::4]
    disc = max(np.max(np.abs(q1 - qf)), 1e-14)
    assert np.max(np.abs(q1 - q2)) <= 10 * disc + 1e-13


def test_quantum_potential_bad_form():
    g = Grid((8,), (1.0,))
    with pytest.raises(InputError):
        quantum_potential(np.ones(8), g, P, "bohm")


def test_zero_state_is_degenerate():
    g = Grid((8,), (1.0,))
    with pytest.raises(DegenerateStateError):
        GridState(np.zeros(8), g)


def test_homogeneous_static_state():
    g = Grid((16,), (1.0,))
    f = MadelungFields(np.full(16, 2.0), (np.zeros(16),), np.zeros(16), np.zeros(16), g, P)
    state = from_fields(f)
    np.testing.assert_allclose(state.psi, math.sqrt(2.0), rtol=1e-15)


def _smooth_random_fields(rng, g, mean_winding=0):
    x = g.coords[0]
    L = g.lengths[0]
    n = np.ones(g.shape)
    phase = 2 * math.pi * mean_winding * x / L
    for j in range(1, 5):
        a, b, c, d = rng.normal(size=4) * 0.1 / j
        n = n + a * np.cos(2 * math.pi * j * x / L) + b * np.sin(2 * math.pi * j * x / L)
        phase = phase + c * np.cos(2 * math.pi * j * x / L) + d * np.sin(2 * math.pi * j * x / L)
    u = gradient(phase, g)[0] if mean_winding == 0 else None
    if u is None:
        u = gradient(phase - 2 * math.pi * mean_winding * x / L, g)[0] + 2 * math.pi * mean_winding / L
    return n, u


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(-3, 3))
def test_round_trip(seed, winding):
    g = Grid((128,), (10.0,))
    n, u = _smooth_random_fields(np.random.default_rng(seed), g, winding)
    f = MadelungFields(n, (u,), np.zeros(g.shape), np.zeros(g.shape), g, P)
    back = to_fields(from_fields(f), P)
    assert np.max(np.abs(back.n - n)) / np.max(n) <= 1e-12
    assert np.max(np.abs(back.u[0] - u)) / max(np.max(np.abs(u)), 1e-300) <= 1e-8


def test_state_round_trip():
    g = Grid((64, 32), (6.0, 3.0))
    rng = np.random.default_rng(3)
    x, y = g.coords
    phase = 0.3 * np.sin(2 * math.pi * x / 6) * np.cos(2 * math.pi * y / 3) + rng.normal() * 0.1
    psi = (1 + 0.2 * np.cos(2 * math.pi * y / 3)) * np.exp(1j * phase)
    state = GridState(psi, g)
    back = from_fields(to_fields(state, P))
    err = np.abs(back.psi * np.exp(1j * np.angle(np.vdot(back.psi, psi))) - psi)
    assert np.max(err) / np.max(np.abs(psi)) <= 1e-8


def test_classical_reconstruction_refused():
    g = Grid((8,), (1.0,))
    f = MadelungFields(np.ones(8), (np.zeros(8),), np.zeros(8), np.zeros(8), g, PhysicalParams(hbar=0.0))
    with pytest.raises(InconsistentFieldsError):
        from_fields(f)


def test_rotational_velocity_rejected():
    g = Grid((32, 32), (2 * math.pi, 2 * math.pi))
    x, y = g.coords
    u = (np.sin(y) * np.ones(g.shape), -np.sin(x) * np.ones(g.shape))
    f = MadelungFields(np.ones(g.shape), u, np.zeros(g.shape), np.zeros(g.shape), g, P)
    with pytest.raises(InconsistentFieldsError):
        from_fields(f)


def test_fractional_winding_rejected():
    g = Grid((16,), (1.0,))
    f = MadelungFields(np.ones(16), (np.full(16, 0.5),), np.zeros(16), np.zeros(16), g, P)
    with pytest.raises(InconsistentFieldsError):
        from_fields(f)


def test_evolved_2d_state_is_irrotational():
    g = Grid((64, 64), (20.0, 20.0))
    x, y = g.coords
    psi = 1 + 0.2 * np.exp(-((x - 10) ** 2 + (y - 8) ** 2) / 4) * np.exp(1j * 0.3 * np.sin(2 * np.pi * x / 20))
    med = medium("bec", g=1.0)
    solver = SplitStepSolver(med, SolverConfig(0.01, 1.0, g))
    out = solver.evolve(GridState(psi, g), 100)
    f = to_fields(out, P)
    c = curl(f.u, g)
    umax = max(np.nanmax(np.abs(comp)) for comp in f.u)
    assert np.nanmax(np.abs(c)) <= 1e-6 * umax


def test_curl_needs_2d():
    g = Grid((8,), (1.0,))
    with pytest.raises(InputError):
        curl((np.zeros(8),), g)


# residuals ------------------------------------------------------------------

def _pair(med, dt, g, psi0, t_a=0.5):
    sol = SplitStepSolver(med, SolverConfig(dt, 1.0, g, dealias=False))
    a = sol.evolve(GridState(psi0, g), int(round(t_a / dt)))
    return a, sol.evolve(a, 1)


def _bump(g):
    x = g.coords[0]
    L = g.lengths[0]
    return (1 + 0.1 * np.exp(-((x - L / 2) / 3) ** 2)) * np.exp(0.2j * np.sin(4 * math.pi * x / L))


def test_free_plane_wave_residual_at_floor():
    g = Grid((64,), (2 * math.pi,))
    k = 2.0
    psi = np.exp(1j * k * g.coords[0])
    a = GridState(psi, g, 0.0)
    b = GridState(psi * np.exp(-0.5j * k**2 * 0.1), g, 0.1)
    r = hydrodynamic_residual(a, b, medium("free"))
    assert r["continuity"] < 1e-10 and r["euler"] < 1e-10


def test_residual_converges_at_second_order():
    g = Grid((128,), (20 * math.pi,))
    med = medium("bec", g=1.0)
    res = [hydrodynamic_residual(*_pair(med, dt, g, _bump(g)), med) for dt in (0.02, 0.01, 0.005)]
    for key in ("continuity", "euler"):
        vals = np.array([r[key] for r in res])
        order = np.log2(vals[:-1] / vals[1:])
        np.testing.assert_allclose(order, 2.0, atol=0.1)


def test_corrupted_state_residual():
    g = Grid((128,), (20 * math.pi,))
    med = medium("bec", g=1.0)
    a, b = _pair(med, 0.01, g, _bump(g))
    floor = hydrodynamic_residual(a, b, med)["continuity"]
    psi = a.psi.copy()
    psi[: g.shape[0] // 2] *= 2
    bad = hydrodynamic_residual(GridState(psi, g, a.t), b, med)["continuity"]
    assert bad >= 1e3 * floor


def test_residual_needs_distinct_times():
    g = Grid((16,), (1.0,))
    s = GridState.uniform(g, 1.0)
    with pytest.raises(InputError):
        hydrodynamic_residual(s, s, medium("free"))


# persistence ----------------------------------------------------------------

@pytest.mark.parametrize("order", ["<", ">"])
def test_snapshot_round_trip(tmp_path, order):
    g = Grid((8, 4), (2.0, 1.0))
    rng = np.random.default_rng(0)
    psi = rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)
    state = GridState(psi, g, 1.25)
    path = tmp_path / "s.bin"
    save_snapshot(path, state, "qmedia test", byteorder=order)
    assert path.read_bytes()[8:9] == order.encode()
    back, prov = load_snapshot(path)
    assert prov == "qmedia test"
    assert back.grid == g and back.t == 1.25
    assert np.array_equal(back.psi, psi)


def test_snapshot_rejects_garbage(tmp_path):
    path = tmp_path / "x.bin"
    path.write_bytes(b"not a snapshot")
    with pytest.raises(InputError):
        load_snapshot(path)


def test_slice_csv(tmp_path):
    g = Grid((16, 8), (1.0, 1.0))
    state = GridState.uniform(g, 4.0)
    export_slice_csv(tmp_path / "s.csv", state, axis=1, provenance="p")
    cols, rows = read_csv(tmp_path / "s.csv")
    assert cols == ["x", "re_psi", "im_psi", "n"] and len(rows) == 8
    assert float(rows[0][3]) == 4.0

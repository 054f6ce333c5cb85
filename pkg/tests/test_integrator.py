from dataclasses import dataclass

import numpy as np
import pytest

from conftest import F_COR, G_KM, LX, LY
from vrsw.cases import CaseSpec, init_isolated_vortex, init_lake_at_rest
from vrsw.diagnostics import quantities
from vrsw.dynamics import PhysParams, advection_term, kinetic_term, pressure_term
from vrsw.errors import ConfigError, SolverError, StateError
from vrsw.integrator import (SolverParams, State, courant_number, density_matrix, density_step, integrate,
                             momentum_step, step)
from vrsw.mesh import build_regular_mesh
from vrsw.operators import project_velocity

DAY = 86400.0


# ---------------------------------------------------------------------------
# density update


@dataclass(frozen=True, eq=False)
class TwoCells:
    """Two cells joined by one edge, enough for the density update."""

    edge_cells: np.ndarray
    edge_length: np.ndarray
    cell_area: np.ndarray
    n_cells: int = 2


@pytest.mark.parametrize("V,dt", [(3.0, 0.1), (-7.5, 0.02), (120.0, 0.5)])
def test_density_step_two_cell_crank_nicolson(V, dt):
    f, om0, om1 = 2.0, 3.0, 5.0
    toy = TwoCells(np.array([[0, 1]]), np.array([f]), np.array([om0, om1]))
    D0, D1 = 0.8, 1.3
    phi = 0.5 * f * V
    a, b = 0.5 * dt * phi / om0, 0.5 * dt * phi / om1
    det = 1.0 + a - b
    r0, r1 = D0 - a * (D0 + D1), D1 + b * (D0 + D1)
    expect = np.array([(r0 * (1.0 - b) - a * r1) / det, ((1.0 + a) * r1 + b * r0) / det])
    got = density_step(toy, np.array([V]), np.array([D0, D1]), dt)
    assert np.max(np.abs(got - expect)) <= 1e-14
    assert om0 * got[0] + om1 * got[1] == pytest.approx(om0 * D0 + om1 * D1, rel=1e-14)


def test_density_matrix_sparsity_and_column_sums(pmesh8):
    V = np.random.default_rng(0).normal(0, 30, pmesh8.n_edges)
    M = density_matrix(pmesh8, V)
    assert np.max(np.diff(M.tocsr().indptr)) <= 4
    # mass: area-weighted column sums vanish
    colsum = pmesh8.cell_area @ M.toarray()
    assert np.max(np.abs(colsum)) <= 1e-12 * np.abs(M).max() * pmesh8.cell_area.max()


def test_density_step_zero_velocity_is_identity(pmesh8):
    D = np.random.default_rng(1).uniform(0.5, 1.0, pmesh8.n_cells)
    assert np.array_equal(density_step(pmesh8, np.zeros(pmesh8.n_edges), D, 0.01), D)


@pytest.mark.parametrize("method", ["direct", "iterative"])
def test_density_step_conserves_mass(pmesh8, method):
    rng = np.random.default_rng(2)
    V = rng.normal(0, 50, pmesh8.n_edges)
    D = rng.uniform(0.5, 1.0, pmesh8.n_cells)
    D1 = density_step(pmesh8, V, D, 0.01, SolverParams(dt=0.01, linear_solver=method))
    m0, m1 = pmesh8.cell_area @ D, pmesh8.cell_area @ D1
    assert abs(m1 - m0) <= 1e-12 * m0


# ---------------------------------------------------------------------------
# momentum update


def test_lake_at_rest_is_fixed_point(mesh16):
    state, B = init_lake_at_rest(mesh16)
    params = PhysParams(g=G_KM, f=F_COR, H0=0.75, B=B)
    solver = SolverParams(dt=60.0 / DAY)
    V1, iters = momentum_step(mesh16, state.V, state.D, state.D, params, solver)
    assert iters == 1 and not V1.any()
    s = integrate(mesh16, state, params, solver, 100)
    assert np.max(np.abs(s.D + B - 0.75)) <= 1e-12 * 0.75
    assert not s.V.any()


def quiescent(mesh, amp):
    xy = mesh.barycenter
    D = 0.75 + amp * np.sin(2 * np.pi * xy[:, 0] / LX) * np.cos(2 * np.pi * xy[:, 1] / LY)
    return State(0.0, np.zeros(mesh.n_edges), D)


def test_quiescent_step_leading_order(mesh16):
    """From rest the new velocity is ``-dt G(D1)`` plus terms quadratic in that velocity."""
    params = PhysParams(g=G_KM, f=0.0, H0=0.75)
    solver = SolverParams(dt=60.0 / DAY)
    dev = []
    for amp in (1e-4, 2e-4):
        s0 = quiescent(mesh16, amp)
        s1 = step(mesh16, s0, params, solver)
        assert np.array_equal(s1.D, s0.D)
        lead = -solver.dt * pressure_term(mesh16, s1.D, params)
        dev.append(np.max(np.abs(s1.V - lead)) / np.max(np.abs(lead)))
    assert dev[0] < 1e-3
    assert dev[1] / dev[0] == pytest.approx(2.0, rel=0.02)


def test_quiescent_step_satisfies_implicit_equation(mesh16):
    params = PhysParams(g=G_KM, f=F_COR, H0=0.75)
    solver = SolverParams(dt=60.0 / DAY)
    s0 = quiescent(mesh16, 1e-3)
    s1 = step(mesh16, s0, params, solver)
    dt = solver.dt
    V = s1.V
    rhs = -dt * pressure_term(mesh16, s1.D, params) + 0.5 * dt * (
        kinetic_term(mesh16, V) - advection_term(mesh16, V, s1.D, params.f))
    assert np.max(np.abs(V - rhs)) <= 1e-12 * np.max(np.abs(V))


def test_solver_error_when_iterations_exhausted(mesh16):
    params = PhysParams(g=G_KM, f=F_COR, H0=0.75)
    s0 = quiescent(mesh16, 1e-3)
    with pytest.raises(SolverError) as info:
        step(mesh16, s0, params, SolverParams(dt=60.0 / DAY, max_fp_iterations=2))
    assert info.value.iterations == 2 and info.value.residual > 0


def test_large_courant_number_fails_loudly(mesh16):
    params = PhysParams(g=G_KM, f=F_COR, H0=0.75)
    state, _ = init_isolated_vortex(mesh16, CaseSpec("isolated_vortex"), params)
    dt = 5.0 * mesh16.dx_min / np.sqrt(G_KM * 0.75)
    assert courant_number(mesh16, 0.75, dt, G_KM) == pytest.approx(5.0)
    with pytest.raises((SolverError, StateError)) as info:
        integrate(mesh16, state, params, SolverParams(dt=dt), 200)
    assert "step" in str(info.value)


def test_step_advances_time_and_reports_iterations(mesh16):
    params = PhysParams(g=G_KM, f=F_COR, H0=0.75)
    state, _ = init_isolated_vortex(mesh16, CaseSpec("isolated_vortex"), params)
    seen = []
    s = integrate(mesh16, state, params, SolverParams(dt=48.0 / DAY), 5, callback=lambda k, st: seen.append(k))
    assert seen == [1, 2, 3, 4, 5]
    assert s.t == pytest.approx(5 * 48.0 / DAY)
    assert 1 <= s.iterations <= 50


@pytest.mark.slow
def test_vortex_converges_every_step_for_one_day(mesh32):
    params = PhysParams(g=G_KM, f=F_COR, H0=0.75)
    state, _ = init_isolated_vortex(mesh32, CaseSpec("isolated_vortex"), params)
    solver = SolverParams(dt=48.0 / DAY)
    iters = []
    integrate(mesh32, state, params, solver, 1800, callback=lambda k, s: iters.append(s.iterations))
    assert len(iters) == 1800 and max(iters) <= solver.max_fp_iterations


@pytest.mark.parametrize("method", ["direct", "iterative"])
def test_mass_and_pv_drift_per_step(mesh16, method):
    params = PhysParams(g=G_KM, f=F_COR, H0=0.75)
    state, _ = init_isolated_vortex(mesh16, CaseSpec("isolated_vortex"), params)
    solver = SolverParams(dt=120.0 / DAY, linear_solver=method)
    q0 = quantities(mesh16, state, params)
    prev = q0

    def check(k, s):
        nonlocal prev
        q = quantities(mesh16, s, params)
        assert abs(q.mass - prev.mass) <= 1e-12 * q0.mass
        assert abs(q.PV - prev.PV) <= 1e-12 * abs(q0.PV)
        prev = q

    integrate(mesh16, state, params, solver, 30, callback=check)
    assert q0.PV == pytest.approx(F_COR * LX * LY, rel=1e-12)


def test_solver_params_validation():
    with pytest.raises(ConfigError):
        SolverParams(dt=0.0)
    with pytest.raises(ConfigError):
        SolverParams(dt=1.0, linear_solver="magic")
    with pytest.raises(ConfigError):
        SolverParams(dt=1.0, max_fp_iterations=0)


def test_state_check():
    with pytest.raises(StateError, match="cell 1"):
        State(0.0, np.zeros(3), np.array([1.0, -1.0])).check()


# ---------------------------------------------------------------------------
# Courant number


@pytest.mark.parametrize("H0,dt_s,dx,C", [(0.75, 60.0, 5.183, 0.99), (10.0, 12.0, 1.313, 2.86)])
def test_courant_examples(H0, dt_s, dx, C):
    assert round(courant_number(dx, H0, dt_s / DAY, G_KM), 2) == C


def test_courant_zero_step():
    assert courant_number(5.0, 1.0, 0.0, G_KM) == 0.0


# ---------------------------------------------------------------------------
# mirror symmetry: reflecting x and flipping f maps trajectories onto each other


def mirror_maps(mesh):
    def match(points_a, points_b):
        d = mesh.min_image(points_a[:, None, :] - points_b[None, :, :])
        idx = np.argmin(np.einsum("abk,abk->ab", d, d), axis=1)
        assert np.allclose(mesh.min_image(points_a - points_b[idx]), 0.0, atol=1e-6)
        return idx

    reflect = np.array([-1.0, 1.0])
    bc = mesh.barycenter
    cell = match(np.mod(bc * reflect + [mesh.Lx, 0.0], [mesh.Lx, mesh.Ly]), bc)
    mid = mesh.edge_midpoint
    edge = match(np.mod(mid * reflect + [mesh.Lx, 0.0], [mesh.Lx, mesh.Ly]), mid)
    sign = np.sign(np.einsum("ij,ij->i", mesh.edge_normal[edge], mesh.edge_normal * reflect))
    return cell, edge, sign


def test_mirrored_trajectory():
    m = build_regular_mesh(8, LX, LY)
    cell, edge, sign = mirror_maps(m)
    assert np.all(np.abs(sign) == 1)
    rng = np.random.default_rng(7)
    xy = m.barycenter
    D = 0.75 + 0.01 * np.exp(-((xy[:, 0] - 1800.0) ** 2 + (xy[:, 1] - 2500.0) ** 2) / 6e5)
    u = lambda x, y: (20.0 * np.sin(2 * np.pi * y / LY) + 5.0, 10.0 * np.cos(2 * np.pi * x / LX))  # noqa: E731
    V = project_velocity(m, u) + rng.normal(0, 0.5, m.n_edges)
    solver = SolverParams(dt=120.0 / DAY)
    p = PhysParams(g=G_KM, f=F_COR, H0=0.75)
    a = integrate(m, State(0.0, V, D), p, solver, 20)
    Vm = np.empty_like(V)
    Vm[edge] = sign * V
    Dm = np.empty_like(D)
    Dm[cell] = D
    b = integrate(m, State(0.0, Vm, Dm), p.with_(f=-F_COR), solver, 20)
    assert np.max(np.abs(b.D[cell] - a.D)) <= 1e-10 * np.max(np.abs(a.D))
    assert np.max(np.abs(b.V[edge] - sign * a.V)) <= 1e-10 * np.max(np.abs(a.V))

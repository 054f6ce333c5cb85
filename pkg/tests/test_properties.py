"""Property-based checks of the structural invariants."""
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import F_COR, G_KM, LX, LY, perturbed_mesh
from vrsw.diagnostics import predict_frequencies, quantities, regime_numbers, spectrum
from vrsw.dynamics import PhysParams, continuity_rhs, momentum_rhs, pressure_term
from vrsw.integrator import SolverParams, State, density_step, step
from vrsw.kernels import momentum_terms
from vrsw.mesh import RawMesh, build_regular_mesh, compute_dual_geometry
from vrsw.operators import (assemble_A, curl, divergence, grad_normal, grad_tangential,
                            lie_derivative_stencil, weighted_divergence)
from vrsw.oracle import lie_derivative_oracle

SETTINGS = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


@lru_cache(maxsize=None)
def mesh_for(kind: str):
    if kind == "r4":
        return build_regular_mesh(4, LX, LY)
    if kind == "r8":
        return build_regular_mesh(8, LX, LY)
    if kind == "p4":
        return perturbed_mesh(4, 0.08, 5)
    return perturbed_mesh(8, 0.08, 7)


meshes = st.sampled_from(["r4", "r8", "p4", "p8"])


def fields(mesh, seed):
    rng = np.random.default_rng(seed)
    return (rng.normal(0, 40, mesh.n_edges), rng.uniform(0.3, 1.2, mesh.n_cells),
            rng.normal(0, 2000, mesh.n_edges), rng)


# ---------------------------------------------------------------------------
# operators


@SETTINGS
@given(kind=meshes, seed=seeds)
def test_mass_compatibility(kind, seed):
    m = mesh_for(kind)
    V, D, _, _ = fields(m, seed)
    total = np.sum(m.cell_area * weighted_divergence(m, V, D))
    assert abs(total) <= 1e-12 * np.sum(m.edge_length * np.abs(V) * D.max())


@SETTINGS
@given(kind=meshes, seed=seeds)
def test_de_rham_identities(kind, seed):
    m = mesh_for(kind)
    rng = np.random.default_rng(seed)
    phi = rng.normal(size=m.n_cells)
    psi = rng.normal(size=m.n_nodes)
    assert np.max(np.abs(curl(m, grad_normal(m, phi)))) <= 1e-12 * np.abs(phi).max() / m.node_area.min()
    assert np.max(np.abs(divergence(m, grad_tangential(m, psi)))) <= 1e-12 * np.abs(psi).max() / m.cell_area.min()


@SETTINGS
@given(kind=meshes, seed=seeds)
def test_A_constraints(kind, seed):
    m = mesh_for(kind)
    V = fields(m, seed)[0]
    A = assemble_A(m, V)
    assert np.max(np.abs(A @ np.ones(m.n_cells))) <= 1e-15 * abs(A).max()
    i, j = m.edge_cells.T
    a_ij = np.asarray(A[i, j]).ravel()
    a_ji = np.asarray(A[j, i]).ravel()
    assert np.max(np.abs(m.cell_area[i] * a_ij + m.cell_area[j] * a_ji)) <= 1e-12 * np.max(np.abs(m.cell_area[i] * a_ij))


@settings(max_examples=20, deadline=None)
@given(kind=st.sampled_from(["r4", "p4", "r8", "p8"]), seed=seeds)
def test_stencil_matches_dense_oracle(kind, seed):
    m = mesh_for(kind)
    V, D, W, _ = fields(m, seed)
    ref = lie_derivative_oracle(m, V, D, W)
    got = lie_derivative_stencil(m, V, D, W)
    assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))


# ---------------------------------------------------------------------------
# relabelling cells flips edge orientations; edge outputs must follow


def relabelled(mesh, seed):
    rng = np.random.default_rng(seed)
    perm = rng.permutation(mesh.n_cells)
    tris = mesh.triangles[perm]
    shifts = rng.integers(0, 3, mesh.n_cells)
    tris = np.array([np.roll(t, -s) for t, s in zip(tris, shifts)])
    m2 = compute_dual_geometry(RawMesh(mesh.vertices, tris, mesh.Lx, mesh.Ly))
    key = {}
    for e, (i, j) in enumerate(mesh.edge_cells):
        a, b = mesh.edge_nodes[e]
        key[(i, j, a, b)] = (e, 1.0)
        key[(j, i, b, a)] = (e, -1.0)
    emap = np.empty(m2.n_edges, dtype=int)
    sign = np.empty(m2.n_edges)
    for e2, (i2, j2) in enumerate(m2.edge_cells):
        a2, b2 = m2.edge_nodes[e2]
        emap[e2], sign[e2] = key[(perm[i2], perm[j2], a2, b2)]
    return m2, perm, emap, sign


@settings(max_examples=10, deadline=None)
@given(kind=st.sampled_from(["r8", "p8"]), seed=seeds)
def test_orientation_covariance(kind, seed):
    m = mesh_for(kind)
    m2, perm, emap, sign = relabelled(m, seed)
    V, D, W, _ = fields(m, seed)
    V2, D2, W2 = sign * V[emap], D[perm], sign * W[emap]
    params = PhysParams(g=G_KM, f=F_COR, H0=1.0)

    def same_edges(a, b):
        assert np.allclose(b, sign * a[emap], rtol=1e-11, atol=1e-11 * np.abs(a).max())

    same_edges(grad_normal(m, D), grad_normal(m2, D2))
    same_edges(pressure_term(m, D, params), pressure_term(m2, D2, params))
    for k in (0, 1):
        same_edges(momentum_terms(m, V, D, F_COR)[k], momentum_terms(m2, V2, D2, F_COR)[k])
    same_edges(lie_derivative_stencil(m, V, D, W), lie_derivative_stencil(m2, V2, D2, W2))
    assert np.allclose(divergence(m2, V2), divergence(m, V)[perm])
    assert np.allclose(curl(m2, V2), curl(m, V))
    assert np.allclose(continuity_rhs(m2, V2, D2), continuity_rhs(m, V, D)[perm])


# ---------------------------------------------------------------------------
# dynamics and time stepping


@SETTINGS
@given(kind=meshes, seed=seeds, level=st.floats(0.5, 2.0))
def test_well_balanced_for_any_topography(kind, seed, level):
    m = mesh_for(kind)
    rng = np.random.default_rng(seed)
    B = rng.uniform(0.0, 0.4, m.n_cells)
    D = level - B
    params = PhysParams(g=G_KM, f=F_COR, H0=level, B=B)
    V = np.zeros(m.n_edges)
    G = pressure_term(m, D, params)
    assert np.max(np.abs(G)) <= 1e-12 * G_KM * level / m.dual_length.min()
    assert not continuity_rhs(m, V, D).any()
    assert np.max(np.abs(momentum_rhs(m, V, D, params))) == np.max(np.abs(G))


@settings(max_examples=10, deadline=None)
@given(kind=meshes, seed=seeds)
def test_step_conserves_mass_and_pv(kind, seed):
    m = mesh_for(kind)
    rng = np.random.default_rng(seed)
    V = rng.normal(0, 20, m.n_edges)
    D = rng.uniform(0.7, 0.8, m.n_cells)
    params = PhysParams(g=G_KM, f=F_COR, H0=0.75)
    s0 = State(0.0, V, D)
    s1 = step(m, s0, params, SolverParams(dt=20.0 / 86400.0))
    q0, q1 = quantities(m, s0, params), quantities(m, s1, params)
    assert abs(q1.mass - q0.mass) <= 1e-12 * q0.mass
    assert q1.PV == pytest.approx(F_COR * LX * LY, rel=1e-12)


@SETTINGS
@given(kind=meshes, seed=seeds)
def test_density_step_linear_in_D(kind, seed):
    m = mesh_for(kind)
    V, D, _, rng = fields(m, seed)
    D2 = rng.uniform(0.3, 1.2, m.n_cells)
    dt = 0.001
    a = density_step(m, V, D + 2.0 * D2, dt)
    b = density_step(m, V, D, dt) + 2.0 * density_step(m, V, D2, dt)
    assert np.allclose(a, b, rtol=1e-12)


# ---------------------------------------------------------------------------
# diagnostics


@SETTINGS
@given(kind=meshes, seed=seeds, f=st.floats(-10, 10))
def test_pv_identity(kind, seed, f):
    m = mesh_for(kind)
    V, D, _, _ = fields(m, seed)
    params = PhysParams(g=G_KM, f=f, H0=1.0)
    pv = quantities(m, State(0.0, V, D), params).PV
    scale = max(abs(f), 1.0) * LX * LY + np.sum(m.dual_length * np.abs(V))
    assert abs(pv - f * LX * LY) <= 1e-12 * scale


@SETTINGS
@given(scale=st.floats(1e-3, 1e3), seed=seeds)
def test_spectrum_peak_locations_invariant_under_scaling(scale, seed):
    rng = np.random.default_rng(seed)
    t = np.arange(1000) * 0.01
    w = rng.uniform(3, 40, 3)
    x = sum(np.cos(wk * t + rng.uniform(0, 6)) for wk in w)
    a, b = spectrum(x, 0.01), spectrum(scale * x, 0.01)
    assert np.array_equal(a.peaks, b.peaks)
    assert np.allclose(b.peak_magnitudes, scale * a.peak_magnitudes, rtol=1e-10)


@SETTINGS
@given(f=st.floats(0.1, 20), H0=st.floats(0.01, 20), n=st.integers(1, 5))
def test_predicted_frequencies_monotone(f, H0, n):
    w = predict_frequencies(f, G_KM, H0, LX, LY, n)
    for (nx, ny), v in w.items():
        if nx < n:
            assert w[(nx + 1, ny)] > v
        if ny < n:
            assert w[(nx, ny + 1)] > v
        assert v >= f


@SETTINGS
@given(f=st.floats(0.5, 20), H0=st.floats(0.01, 20), Hp=st.floats(1e-4, 0.5), d=st.floats(50, 5000))
def test_burger_number_routes_agree(f, H0, Hp, d):
    r = regime_numbers(G_KM, f, H0, Hp, d)
    assert r.Bu == pytest.approx(r.Bu_direct, rel=1e-12)

import numpy as np
import pytest

from conftest import F_COR, G_KM, LX, LY, perturbed_mesh
from vrsw.cases import CaseSpec, init_isolated_vortex, init_lake_at_rest
from vrsw.dynamics import (PhysParams, ShallowWaterEnergy, advection_term, continuity_rhs, kinetic_energy_density,
                           kinetic_term, momentum_rhs, pressure_term)
from vrsw.errors import ConfigError, StateError
from vrsw.kernels import momentum_terms
from vrsw.mesh import build_regular_mesh
from vrsw.operators import density_action, flat_edge
from vrsw.oracle import continuity_oracle, lie_derivative_oracle


def random_state(mesh, seed):
    rng = np.random.default_rng(seed)
    return rng.normal(0, 30, mesh.n_edges), rng.uniform(0.5, 1.0, mesh.n_cells)


def test_pressure_term_value(mesh32):
    e = 0
    i, j = mesh32.edge_cells[e]
    D = np.full(mesh32.n_cells, 0.75)
    D[j] += 0.01
    params = PhysParams(g=G_KM, f=F_COR, H0=0.75)
    G = pressure_term(mesh32, D, params)
    assert mesh32.dual_length[e] == pytest.approx(90.21, abs=0.01)
    assert G[e] == pytest.approx(8114, abs=1)


def test_pressure_term_zero_for_flat_surface(pmesh8):
    rng = np.random.default_rng(0)
    B = rng.uniform(0, 0.3, pmesh8.n_cells)
    params = PhysParams(g=G_KM, f=F_COR, H0=1.0, B=B)
    assert np.max(np.abs(pressure_term(pmesh8, 1.0 - B, params))) <= 1e-12 * G_KM / pmesh8.dx_min


def test_lake_at_rest_rhs_is_exactly_zero(mesh32):
    state, B = init_lake_at_rest(mesh32)
    params = PhysParams(g=G_KM, f=F_COR, H0=0.75, B=B)
    assert not momentum_rhs(mesh32, state.V, state.D, params).any()
    assert not continuity_rhs(mesh32, state.V, state.D).any()


def test_zero_velocity_gives_minus_pressure(pmesh8):
    rng = np.random.default_rng(2)
    D = rng.uniform(0.5, 1.0, pmesh8.n_cells)
    V = np.zeros(pmesh8.n_edges)
    params = PhysParams(g=G_KM, f=F_COR, H0=0.75)
    assert not advection_term(pmesh8, V, D, F_COR).any()
    assert not kinetic_term(pmesh8, V).any()
    assert np.array_equal(momentum_rhs(pmesh8, V, D, params), -pressure_term(pmesh8, D, params))


def test_kinetic_term_vanishes_for_uniform_speed(mesh16):
    signs = np.random.default_rng(4).choice([-1.0, 1.0], mesh16.n_edges)
    K = kinetic_term(mesh16, 25.0 * signs)
    assert np.max(np.abs(K)) <= 1e-12 * 25.0 ** 2 / mesh16.dx_min


def test_kinetic_term_is_gradient_of_cell_energy(pmesh8):
    V, _ = random_state(pmesh8, 5)
    ke = kinetic_energy_density(pmesh8, V)
    i, j = pmesh8.edge_cells.T
    ref = -(ke[j] - ke[i]) / pmesh8.dual_length
    assert np.allclose(kinetic_term(pmesh8, V), ref, rtol=1e-12, atol=1e-12 * np.abs(ref).max())


@pytest.mark.parametrize("kind", ["regular", "perturbed"])
def test_advection_matches_dense_assembly(kind):
    m = build_regular_mesh(4, LX, LY) if kind == "regular" else perturbed_mesh(4, 0.08, 9)
    V, D = random_state(m, 6)
    # with W = flat(V) the dense Lie derivative combines advection (f = 0) and kinetic terms
    L = lie_derivative_oracle(m, V, D, flat_edge(m, V))
    i, j = m.edge_cells.T
    Dbar = 0.5 * (D[i] + D[j])
    DA = density_action(m, V, D)
    h = m.dual_length
    ref = 2.0 * kinetic_term(m, V) - (L + h * 0.5 * (DA[i] + DA[j]) * V) / (Dbar * h)
    got = advection_term(m, V, D, 0.0)
    assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))


def test_advection_is_affine_in_coriolis(pmesh8):
    V, D = random_state(pmesh8, 7)
    a0 = advection_term(pmesh8, V, D, 0.0)
    a1 = advection_term(pmesh8, V, D, 1.0)
    a3 = advection_term(pmesh8, V, D, 3.0)
    assert np.allclose(a3 - a0, 3.0 * (a1 - a0), rtol=1e-11, atol=1e-11 * np.abs(a3).max())


def test_continuity_matches_dense_oracle():
    m = perturbed_mesh(4, 0.08, 3)
    V, D = random_state(m, 8)
    ref = continuity_oracle(m, V, D)
    assert np.max(np.abs(continuity_rhs(m, V, D) - ref)) <= 1e-12 * np.max(np.abs(ref))


def test_nonpositive_edge_depth_rejected(mesh4):
    V, D = random_state(mesh4, 9)
    i, j = mesh4.edge_cells[3]
    D[i] = D[j] = -0.1
    with pytest.raises(StateError, match="edge 3"):
        momentum_rhs(mesh4, V, D, PhysParams(g=G_KM, f=F_COR, H0=0.75))


def test_custom_energy_law(pmesh8):
    class Quartic:
        def value(self, D, B):
            return 0.25 * (D + B) ** 4

        def derivative(self, D, B):
            return (D + B) ** 3

    D = random_state(pmesh8, 10)[1]
    p = PhysParams(g=G_KM, f=F_COR, H0=0.75, energy=Quartic())
    i, j = pmesh8.edge_cells.T
    assert np.allclose(pressure_term(pmesh8, D, p), (D[j] ** 3 - D[i] ** 3) / pmesh8.dual_length)


def test_params_validation(mesh4):
    with pytest.raises(ConfigError):
        PhysParams(g=0.0, f=1.0, H0=1.0)
    with pytest.raises(ConfigError):
        PhysParams(g=1.0, f=np.nan, H0=1.0)
    with pytest.raises(ConfigError):
        PhysParams(g=1.0, f=1.0, H0=1.0, B=np.ones(3)).topography(mesh4)
    p = PhysParams(g=1.0, f=1.0, H0=1.0).with_(g=2.0)
    assert isinstance(p.energy, ShallowWaterEnergy) and p.energy.g == 2.0


# ---------------------------------------------------------------------------
# discretization residual of the exact steady vortex


def vortex_residuals(n1d):
    """Max-norm errors of the discrete terms against the continuum values at edge midpoints."""
    m = build_regular_mesh(n1d, LX, LY)
    params = PhysParams(g=G_KM, f=F_COR, H0=0.75)
    state, sol = init_isolated_vortex(m, CaseSpec("isolated_vortex"), params, "velocity")
    x, y = m.edge_midpoint.T
    dx, dy = sol._rel(x, y)
    r = np.hypot(dx, dy)
    rn = (dx * m.edge_normal[:, 0] + dy * m.edge_normal[:, 1]) / np.where(r > 0, r, 1.0)
    ux, uy = sol.velocity(x, y)
    speed = sol.speed(r)
    dspeed = sol.u0 / sol.r0 * (1.0 - (r / sol.r0) ** 2) * np.exp(-0.5 * (r / sol.r0) ** 2)
    adv_ex = (sol.vorticity_radial(r) + params.f) * (-uy * m.edge_normal[:, 0] + ux * m.edge_normal[:, 1])
    G_ex = params.g * sol.depth_slope(r) * rn
    K_ex = -speed * dspeed * rn
    adv, kin, _, _ = momentum_terms(m, state.V, state.D, params.f)
    G = pressure_term(m, state.D, params)
    rhs = momentum_rhs(m, state.V, state.D, params)
    # kinetic energy per cell against the exact 1/2 |u|^2 at the circumcenter
    cc = m.circumcenter
    cx, cy = sol.velocity(cc[:, 0], cc[:, 1])
    ke_err = np.max(np.abs(kinetic_energy_density(m, state.V) - 0.5 * (cx ** 2 + cy ** 2)))
    return dict(rhs=np.max(np.abs(rhs)), adv=np.max(np.abs(adv - adv_ex)), G=np.max(np.abs(G - G_ex)),
                K=np.max(np.abs(kin - K_ex)), ke=ke_err)


@pytest.fixture(scope="module")
def residual_table():
    return {n: vortex_residuals(n) for n in (16, 32, 64)}


def orders(table, key):
    r = np.array([table[n][key] for n in (16, 32, 64)])
    return np.log2(r[:-1] / r[1:])


@pytest.mark.parametrize("key", ["adv", "G", "ke"])
def test_vortex_term_errors_first_order(residual_table, key):
    assert np.all(orders(residual_table, key) >= 0.9)


def test_vortex_momentum_residual_decreases_under_refinement(residual_table):
    r = [residual_table[n]["rhs"] for n in (16, 32, 64)]
    print("max|rhs| on 2*16^2, 2*32^2, 2*64^2:", r)
    print("max K error:", [residual_table[n]["K"] for n in (16, 32, 64)])
    assert r[0] > r[1] > r[2]
    assert np.log2(r[1] / r[2]) >= 0.9

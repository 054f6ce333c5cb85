"""Time stepping: Cayley (Crank-Nicolson) density update, then a fixed-point
solve of the implicit-midpoint-in-tendency momentum equation.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dynamics import PhysParams, check_depth, pressure_term
from .errors import ConfigError, SolverError, StateError
from .kernels import momentum_terms
from .mesh import Mesh


@dataclass(frozen=True)
class State:
    """Prognostic fields at time ``t`` (days)."""

    t: float
    V: np.ndarray   # km/day, per edge (owner orientation)
    D: np.ndarray   # km, per cell
    iterations: int = 0

    def __post_init__(self):
        object.__setattr__(self, "V", np.asarray(self.V, dtype=float))
        object.__setattr__(self, "D", np.asarray(self.D, dtype=float))

    def check(self) -> None:
        if not np.all(np.isfinite(self.V)):
            raise StateError(f"non-finite velocity at t={self.t:g} days")
        if not np.all(np.isfinite(self.D)):
            raise StateError(f"non-finite depth at t={self.t:g} days")
        if np.any(self.D <= 0):
            i = int(np.argmin(self.D))
            raise StateError(f"non-positive depth {self.D[i]:.3e} km in cell {i} at t={self.t:g} days")


@dataclass(frozen=True)
class SolverParams:
    """Time step (days) and solver controls.

    The fixed-point loop stops when the max-norm change of ``V`` drops below
    ``max(fp_tol, fp_roundoff * max|V|)``; the second term keeps the test
    meaningful when ``fp_tol`` is below the rounding level of large
    velocities.
    """

    dt: float
    fp_tol: float = 1e-12
    max_fp_iterations: int = 50
    linear_solver: str = "direct"
    linear_tol: float = 1e-13
    fp_roundoff: float = 8 * np.finfo(float).eps

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError(f"time step must be positive, got {self.dt}")
        if not self.fp_tol > 0:
            raise ConfigError("fixed-point tolerance must be positive")
        if self.max_fp_iterations < 1:
            raise ConfigError("max_fp_iterations must be at least 1")
        if self.linear_solver not in ("direct", "iterative"):
            raise ConfigError("linear_solver must be 'direct' or 'iterative'")


SECONDS_PER_DAY = 86400.0


def courant_number(mesh_or_dx, H0: float, dt: float, g: float) -> float:
    """``sqrt(g H0) dt / dx_min`` with ``dx_min`` the smallest dual edge (or a number)."""
    dx = mesh_or_dx.dx_min if isinstance(mesh_or_dx, Mesh) else float(mesh_or_dx)
    if not dx > 0:
        raise ConfigError("dx_min must be positive")
    return float(np.sqrt(g * H0) * dt / dx)


# ---------------------------------------------------------------------------
# density


@lru_cache(maxsize=16)
def _density_pattern(mesh: Mesh):
    i, j = mesh.edge_cells[:, 0], mesh.edge_cells[:, 1]
    n = mesh.n_cells
    rows = np.concatenate([i, j, np.arange(n)])
    cols = np.concatenate([j, i, np.arange(n)])
    nnz = rows.size
    template = sp.csc_matrix((np.arange(1, nnz + 1, dtype=float), (rows, cols)), shape=(n, n))
    if template.nnz != nnz:
        raise ConfigError("mesh too small: two cells share more than one edge")
    order = template.data.astype(np.int64) - 1
    return template.indices.copy(), template.indptr.copy(), order


def density_matrix(mesh: Mesh, V) -> sp.csc_matrix:
    """Action matrix ``M = -Omega^-1 A^T Omega`` with ``dD/dt = M D``.

    ``M_ik = A_ik`` off the diagonal and ``M_ii = -A_ii``.
    """
    V = np.asarray(V, dtype=float)
    i, j = mesh.edge_cells[:, 0], mesh.edge_cells[:, 1]
    flux = 0.5 * mesh.edge_length * V
    m_ij = -flux / mesh.cell_area[i]
    m_ji = flux / mesh.cell_area[j]
    diag = np.bincount(i, m_ij, mesh.n_cells) + np.bincount(j, m_ji, mesh.n_cells)
    indices, indptr, order = _density_pattern(mesh)
    data = np.concatenate([m_ij, m_ji, diag])[order]
    n = mesh.n_cells
    return sp.csc_matrix((data, indices, indptr), shape=(n, n))


def density_step(mesh: Mesh, V, D, dt: float, solver: SolverParams | None = None) -> np.ndarray:
    """Solve ``(I - dt/2 M) D1 = (I + dt/2 M) D`` for the new depths."""
    D = np.asarray(D, dtype=float)
    M = density_matrix(mesh, V)
    half = 0.5 * dt * M
    rhs = D + half @ D
    if not half.count_nonzero():
        return rhs
    lhs = sp.identity(mesh.n_cells, format="csc") - half
    method = solver.linear_solver if solver else "direct"
    if method == "direct":
        try:
            # the pattern is structurally symmetric and the matrix diagonally
            # dominant, so a symmetric ordering with diagonal pivots is safe
            lu = spla.splu(lhs, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                           options=dict(SymmetricMode=True))
            D1 = lu.solve(rhs)
        except RuntimeError as exc:
            raise SolverError(f"density system is singular: {exc}") from None
    else:
        tol = solver.linear_tol
        D1, info = spla.bicgstab(lhs, rhs, x0=D, rtol=tol, atol=0.0, maxiter=200)
        if info != 0:
            res = float(np.linalg.norm(lhs @ D1 - rhs) / np.linalg.norm(rhs))
            raise SolverError(f"density solve did not converge (relative residual {res:.3e})", residual=res)
    res = float(np.max(np.abs(lhs @ D1 - rhs)))
    if not np.isfinite(res) or res > 1e-8 * np.max(np.abs(rhs)):
        raise SolverError(f"density solve residual {res:.3e} too large", residual=res)
    return D1


# ---------------------------------------------------------------------------
# momentum


def momentum_step(mesh: Mesh, V, D, D1, params: PhysParams, solver: SolverParams,
                  backend: str | None = None):
    """Fixed-point solve of the momentum update; returns ``(V1, iterations)``.

    Iterates ``V* <- V + dt * ( -(Adv(V*, D1) + Adv(V, D)) / 2
    + (K(V*) + K(V)) / 2 - G(D1) )`` starting from ``V* = V``.
    """
    V = np.asarray(V, dtype=float)
    check_depth(mesh, D1)
    dt = solver.dt
    adv0, kin0, _, _ = momentum_terms(mesh, V, D, params.f, backend)
    fixed = V + dt * (-0.5 * adv0 + 0.5 * kin0 - pressure_term(mesh, D1, params))
    Vk = V
    change = np.inf
    for it in range(1, solver.max_fp_iterations + 1):
        # blow-up is reported below as a SolverError, not as numpy warnings
        with np.errstate(over="ignore", invalid="ignore"):
            adv, kin, _, _ = momentum_terms(mesh, Vk, D1, params.f, backend)
            Vn = fixed + (0.5 * dt) * (kin - adv)
        change = float(np.max(np.abs(Vn - Vk))) if Vn.size else 0.0
        if not np.isfinite(change):
            raise SolverError("fixed-point iteration produced non-finite velocities",
                              residual=change, iterations=it)
        Vk = Vn
        tol = max(solver.fp_tol, solver.fp_roundoff * float(np.max(np.abs(Vk), initial=0.0)))
        if change < tol:
            return Vk, it
    raise SolverError(
        f"fixed-point iteration did not converge in {solver.max_fp_iterations} iterations "
        f"(last change {change:.3e} km/day)", residual=change, iterations=solver.max_fp_iterations)


def step(mesh: Mesh, state: State, params: PhysParams, solver: SolverParams,
         backend: str | None = None) -> State:
    """Advance one time step: density first, then momentum."""
    D1 = density_step(mesh, state.V, state.D, solver.dt, solver)
    if np.any(D1 <= 0) or not np.all(np.isfinite(D1)):
        raise StateError(f"density update produced non-positive depth at t={state.t + solver.dt:g} days")
    V1, iters = momentum_step(mesh, state.V, state.D, D1, params, solver, backend)
    return State(state.t + solver.dt, V1, D1, iters)


def integrate(mesh: Mesh, state: State, params: PhysParams, solver: SolverParams, n_steps: int,
              callback=None, backend: str | None = None) -> State:
    """Take ``n_steps`` steps, calling ``callback(k, state)`` after each (k from 1)."""
    for k in range(1, n_steps + 1):
        try:
            state = step(mesh, state, params, solver, backend)
        except SolverError as exc:
            raise SolverError(f"step {k} (t={state.t + solver.dt:.6g} days): {exc}",
                              residual=exc.residual, iterations=exc.iterations) from exc
        except StateError as exc:
            raise StateError(f"step {k} (t={state.t + solver.dt:.6g} days): {exc}") from exc
        if callback is not None:
            callback(k, state)
    return state

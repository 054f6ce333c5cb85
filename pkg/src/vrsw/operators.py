"""Discrete calculus on the primal/dual mesh.

Edge fields hold one value per edge for the owner orientation ``i -> j``;
cell fields one value per triangle; node fields one value per vertex.
All functions are pure and vectorised over the mesh.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh

# 3-point Gauss-Legendre on [0, 1]
_GL_T = 0.5 + 0.5 * np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
_GL_W = np.array([5.0, 8.0, 5.0]) / 18.0
# 3-point interior rule on a triangle (degree 2), barycentric coordinates
_TRI_B = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
_TRI_W = np.full(3, 1 / 3)


def oriented(mesh: Mesh, values: np.ndarray, edges: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """Gather edge values with orientation signs (``V_{c->c'} = sign * V[e]``)."""
    return signs * np.asarray(values)[edges]


def flip(values: np.ndarray) -> np.ndarray:
    """Value of an edge field seen from the other cell."""
    return -np.asarray(values)


# ---------------------------------------------------------------------------
# velocity <-> matrix


def assemble_A(mesh: Mesh, V: np.ndarray) -> sp.csr_matrix:
    """Sparse Lie-algebra matrix of the normal velocities.

    ``A_ij = -f_ij V_ij / (2 Omega_ii)`` for neighbours and
    ``A_ii = -sum_j A_ij``, so ``A 1 = 0`` and ``Omega A`` has antisymmetric
    off-diagonal part.
    """
    V = np.asarray(V, dtype=float)
    i, j = mesh.edge_cells[:, 0], mesh.edge_cells[:, 1]
    flux = 0.5 * mesh.edge_length * V
    a_ij = -flux / mesh.cell_area[i]
    a_ji = flux / mesh.cell_area[j]
    diag = -(np.bincount(i, a_ij, mesh.n_cells) + np.bincount(j, a_ji, mesh.n_cells))
    n = mesh.n_cells
    rows = np.concatenate([i, j, np.arange(n)])
    cols = np.concatenate([j, i, np.arange(n)])
    vals = np.concatenate([a_ij, a_ji, diag])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def flat_edge(mesh: Mesh, V: np.ndarray) -> np.ndarray:
    """Circulation one-form ``A_flat_ij = -h_ij V_ij`` (km^2/day)."""
    return -mesh.dual_length * np.asarray(V, dtype=float)


def divergence(mesh: Mesh, V: np.ndarray) -> np.ndarray:
    """Finite-volume divergence ``sum_k f_ik V_ik / Omega_ii`` (1/day)."""
    flux = mesh.edge_length * np.asarray(V, dtype=float)
    return (mesh.cell_edge_matrix @ flux) / mesh.cell_area


def face_average(mesh: Mesh, D: np.ndarray) -> np.ndarray:
    """Edge average ``(D_i + D_j) / 2``."""
    D = np.asarray(D, dtype=float)
    return 0.5 * (D[mesh.edge_cells[:, 0]] + D[mesh.edge_cells[:, 1]])


def weighted_divergence(mesh: Mesh, V: np.ndarray, D: np.ndarray) -> np.ndarray:
    """Mass-flux divergence ``sum_k f_ik V_ik Dbar_ik / Omega_ii``."""
    flux = mesh.edge_length * np.asarray(V, dtype=float) * face_average(mesh, D)
    return (mesh.cell_edge_matrix @ flux) / mesh.cell_area


def circulation(mesh: Mesh, W: np.ndarray) -> np.ndarray:
    """Counter-clockwise sum of an edge one-form around every dual cell."""
    return mesh.node_edge_matrix @ np.asarray(W, dtype=float)


def curl(mesh: Mesh, V: np.ndarray) -> np.ndarray:
    """Dual-cell vorticity ``sum h_mn V_mn / |zeta_e|`` (CCW loop, 1/day)."""
    return circulation(mesh, mesh.dual_length * np.asarray(V, dtype=float)) / mesh.node_area


def grad_normal(mesh: Mesh, phi: np.ndarray) -> np.ndarray:
    """``(phi_j - phi_i) / h_ij`` along the edge normal."""
    phi = np.asarray(phi, dtype=float)
    return (phi[mesh.edge_cells[:, 1]] - phi[mesh.edge_cells[:, 0]]) / mesh.dual_length


def grad_tangential(mesh: Mesh, psi: np.ndarray) -> np.ndarray:
    """``(psi_- - psi_+) / f_ij`` from the edge's node labels."""
    psi = np.asarray(psi, dtype=float)
    return (psi[mesh.edge_nodes[:, 1]] - psi[mesh.edge_nodes[:, 0]]) / mesh.edge_length


def node_average(mesh: Mesh, D: np.ndarray) -> np.ndarray:
    """Area-weighted node value ``D_e = sum_k K^e_k D_k``."""
    return mesh.node_cell_K @ np.asarray(D, dtype=float)


# ---------------------------------------------------------------------------
# discrete Lie derivative


def density_action(mesh: Mesh, V: np.ndarray, D: np.ndarray) -> np.ndarray:
    """``(D . A)_i = A_ii D_i - sum_k A_ik D_k``, i.e. ``Omega^-1 A^T Omega D``."""
    return weighted_divergence(mesh, V, D)


def lie_derivative_stencil(mesh: Mesh, V: np.ndarray, D: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Edge stencil of the discrete Lie derivative of ``D W`` along ``A(V)``.

    ``W`` is a circulation one-form (``B_flat``).  Returns one value per edge
    for the owner orientation.
    """
    V = np.asarray(V, dtype=float)
    D = np.asarray(D, dtype=float)
    W = np.asarray(W, dtype=float)
    i, j = mesh.edge_cells[:, 0], mesh.edge_cells[:, 1]
    area = mesh.cell_area
    f = mesh.edge_length
    fc, fe, fs, fk = mesh.flank_cells, mesh.flank_edges, mesh.flank_signs, mesh.flank_kites
    owner = np.stack([i, i, j, j], axis=1)
    other = np.stack([j, j, i, i], axis=1)
    # A between each flank pair, e.g. A_{i,i+} = -f V_{i->i+} / (2 Omega_i)
    A_fl = -f[fe] * fs * V[fe] / (2.0 * area[owner])
    Dx = 0.5 * (D[other] + D[fc])
    omega = circulation(mesh, W)
    zeta = mesh.node_area
    plus, minus = mesh.edge_nodes[:, 0], mesh.edge_nodes[:, 1]
    K = fk / np.stack([zeta[plus], zeta[minus], zeta[plus], zeta[minus]], axis=1)
    term_p = K[:, 0] * Dx[:, 0] * A_fl[:, 0] + K[:, 2] * Dx[:, 2] * A_fl[:, 2]
    term_m = K[:, 1] * Dx[:, 1] * A_fl[:, 1] + K[:, 3] * Dx[:, 3] * A_fl[:, 3]
    # sum_k A_ik B_ik per cell; orientation signs cancel in the product
    prod = -f * V * W / 2.0
    S = (np.bincount(i, prod, mesh.n_cells) + np.bincount(j, prod, mesh.n_cells)) / area
    DA = density_action(mesh, V, D)
    Dbar = 0.5 * (D[i] + D[j])
    return (omega[minus] * term_m - omega[plus] * term_p
            + Dbar * (S[i] - S[j]) + 0.5 * (DA[i] + DA[j]) * W)


# ---------------------------------------------------------------------------
# sampling a continuous velocity


@dataclass(frozen=True)
class SampledVelocity:
    V: np.ndarray               # mean normal velocity per edge
    A: sp.csr_matrix            # matrix with quadrature-based diagonal
    residual: float | None      # L-infinity consistency residual, if a test function was given


def _triangle_points(mesh: Mesh):
    """Quadrature points (nC, 3, 2) of the interior rule."""
    return np.einsum("qk,ckd->cqd", _TRI_B, mesh.tri_xy)


def cell_average(mesh: Mesh, fn) -> np.ndarray:
    """Cell averages of ``fn(x, y)`` by the 3-point interior rule."""
    pts = _triangle_points(mesh)
    vals = fn(pts[..., 0], pts[..., 1])
    return vals @ _TRI_W


def normal_component(mesh: Mesh, u) -> np.ndarray:
    """Mean of ``u . n`` over each edge by 3-point Gauss-Legendre."""
    eo, ko = mesh.edge_cells[:, 0], mesh.edge_local[:, 0]
    E = np.arange(mesh.n_edges)
    pa = mesh.tri_xy[eo, ko]
    pb = mesh.tri_xy[eo, (ko + 1) % 3]
    total = np.zeros(mesh.n_edges)
    for t, w in zip(_GL_T, _GL_W):
        x = pa + t * (pb - pa)
        ux, uy = u(x[:, 0], x[:, 1])
        total += w * (ux * mesh.edge_normal[E, 0] + uy * mesh.edge_normal[E, 1])
    return total


def sample_A_from_field(mesh: Mesh, u, div_u=None, test_fn=None, test_grad=None) -> SampledVelocity:
    """Matrix approximating a smooth velocity field ``u(x, y) -> (ux, uy)``.

    Off-diagonals use edge means of ``u . n``.  The diagonal is
    ``(1 / 2 Omega_ii) * integral of div u`` over the cell; ``div_u`` defaults
    to the flux sum (Gauss theorem).  When ``test_fn`` and its gradient
    ``test_grad`` are supplied, the L-infinity residual
    ``max |(A F)_i + grad f . u (x)|`` over sample points of each cell is
    returned, with ``F`` the cell averages of ``test_fn``.
    """
    V = normal_component(mesh, u)
    A = assemble_A(mesh, V)
    if div_u is not None:
        integral = cell_average(mesh, div_u) * mesh.cell_area
        A = A.tolil()
        A.setdiag(integral / (2.0 * mesh.cell_area))
        A = A.tocsr()
    residual = None
    if test_fn is not None:
        if test_grad is None:
            raise ValueError("test_grad is required with test_fn")
        F = cell_average(mesh, test_fn)
        AF = A @ F
        # sample each cell at its corners, edge midpoints, centroid and quadrature points
        P = mesh.tri_xy
        pts = np.concatenate([
            P,
            0.5 * (P + np.roll(P, -1, axis=1)),
            P.mean(axis=1, keepdims=True),
            _triangle_points(mesh),
        ], axis=1)
        gx, gy = test_grad(pts[..., 0], pts[..., 1])
        ux, uy = u(pts[..., 0], pts[..., 1])
        residual = float(np.max(np.abs(AF[:, None] + (gx * ux + gy * uy))))
    return SampledVelocity(V=V, A=A, residual=residual)


def project_velocity(mesh: Mesh, u, at: str = "gauss") -> np.ndarray:
    """Normal velocities of ``u``: edge means (``gauss``) or midpoint values."""
    if at == "gauss":
        return normal_component(mesh, u)
    if at == "midpoint":
        eo, ko = mesh.edge_cells[:, 0], mesh.edge_local[:, 0]
        x = 0.5 * (mesh.tri_xy[eo, ko] + mesh.tri_xy[eo, (ko + 1) % 3])
        ux, uy = u(x[:, 0], x[:, 1])
        return ux * mesh.edge_normal[:, 0] + uy * mesh.edge_normal[:, 1]
    raise ValueError(f"unknown sampling {at!r}")

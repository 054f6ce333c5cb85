"""Dense-matrix reference implementations for small meshes.

These follow the abstract matrix-group formulation literally (full N x N
matrices, commutators, projectors) and exist to cross-check the sparse
stencils.  They are slow by design.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, MeshError
from .mesh import Mesh
from .operators import assemble_A, circulation

MAX_DENSE_CELLS = 512


def _check_size(mesh: Mesh):
    if mesh.n_cells > MAX_DENSE_CELLS:
        raise ConfigError(f"dense oracle limited to {MAX_DENSE_CELLS} cells, mesh has {mesh.n_cells}")


def hat(L: np.ndarray) -> np.ndarray:
    """Matrix whose every row ``i`` is filled with ``L_ii``."""
    return np.repeat(np.diag(L)[:, None], L.shape[1], axis=1)


def Q(L: np.ndarray) -> np.ndarray:
    """Projection onto the dual of the Lie algebra: ``L - hat(L)``."""
    return L - hat(L)


def antisym(L: np.ndarray) -> np.ndarray:
    return 0.5 * (L - L.T)


def P(L: np.ndarray) -> np.ndarray:
    """Projection onto discrete one-forms: antisymmetric part of ``Q(L)``."""
    return antisym(Q(L))


def ad_star(A: np.ndarray, Omega: np.ndarray, L: np.ndarray) -> np.ndarray:
    """``Q(Omega^-1 [A^T, Omega L])`` with ``Omega`` the vector of cell areas."""
    OL = Omega[:, None] * L
    return Q((A.T @ OL - OL @ A.T) / Omega[:, None])


@dataclass(frozen=True)
class DenseOperators:
    A: np.ndarray
    A_flat: np.ndarray
    Omega: np.ndarray
    D: np.ndarray


def dense_A(mesh: Mesh, V) -> np.ndarray:
    _check_size(mesh)
    return assemble_A(mesh, V).toarray()


def dense_flat(mesh: Mesh, W) -> np.ndarray:
    """Full one-form matrix from edge circulations ``W``.

    Neighbour entries come straight from ``W``.  For cells ``i``, ``k`` that
    are both neighbours of ``j`` around a node ``e`` (fan order i, j, k
    counter-clockwise) the closure condition
    ``B_ij + B_jk + B_ki = K^e_j * omega_e`` fixes ``B_ik``.  All other
    entries are zero.
    """
    _check_size(mesh)
    W = np.asarray(W, dtype=float)
    n = mesh.n_cells
    B = np.zeros((n, n))
    i, j = mesh.edge_cells[:, 0], mesh.edge_cells[:, 1]
    B[i, j] = W
    B[j, i] = -W
    omega = circulation(mesh, W)
    defined = {}
    for e in range(mesh.n_nodes):
        cells, K, ledges, lsigns = mesh.node_fan(e)
        m = len(cells)
        for t in range(m):
            c0, c1, c2 = cells[t], cells[(t + 1) % m], cells[(t + 2) % m]
            b01 = lsigns[t] * W[ledges[t]]
            b12 = lsigns[(t + 1) % m] * W[ledges[(t + 1) % m]]
            val = b01 + b12 - K[(t + 1) % m] * omega[e]
            key = (int(c0), int(c2))
            if key in defined and not np.isclose(defined[key], val, rtol=1e-12, atol=1e-12 * np.abs(W).max()):
                raise MeshError(f"mesh too small: cells {key} are two fan steps apart around several nodes")
            defined[key] = val
            B[c0, c2] = val
            B[c2, c0] = -val
    return B


def dense_operators(mesh: Mesh, V, D, W) -> DenseOperators:
    return DenseOperators(A=dense_A(mesh, V), A_flat=dense_flat(mesh, W),
                          Omega=mesh.cell_area.copy(), D=np.asarray(D, dtype=float).copy())


def lie_derivative_oracle(mesh: Mesh, V, D, W) -> np.ndarray:
    """``P(Omega^-1 [A^T, Omega diag(D) B_flat])`` sampled on every edge ``i -> j``."""
    ops = dense_operators(mesh, V, D, W)
    DB = ops.D[:, None] * ops.A_flat
    X = P(ad_star(ops.A, ops.Omega, DB))
    return X[mesh.edge_cells[:, 0], mesh.edge_cells[:, 1]]


def continuity_oracle(mesh: Mesh, V, D) -> np.ndarray:
    """Density tendency ``-Omega^-1 A^T Omega D`` assembled densely."""
    A = dense_A(mesh, V)
    Om = mesh.cell_area
    return -(A.T @ (Om * np.asarray(D, dtype=float))) / Om

"""Hot per-edge kernels of the momentum tendency.

Two interchangeable back ends compute the advection and kinetic-gradient
terms: explicit loops compiled with numba, and vectorised numpy gathers.
``VRSW_DISABLE_NUMBA=1`` selects numpy.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _accel
from ._accel import njit
from .mesh import Mesh


@dataclass(frozen=True, eq=False)
class MomentumStencil:
    """Mesh constants folded for the momentum kernels."""

    cells: np.ndarray       # (nE, 2)
    nodes: np.ndarray       # (nE, 2) +, -
    h: np.ndarray           # (nE,)
    fl_cells: np.ndarray    # (nE, 4)
    fl_edges: np.ndarray    # (nE, 4)
    fl_coef: np.ndarray     # (nE, 4) kite / (2 Omega) * f * sign
    fl_depth: np.ndarray    # (nE, 4) the cell paired with each flank in the depth average
    node_ptr: np.ndarray
    loop_edges: np.ndarray
    loop_coef: np.ndarray   # sign * h / |zeta|
    cell_edges: np.ndarray  # (nC, 3)
    ke_coef: np.ndarray     # (nC, 3) h f / (4 Omega)


@lru_cache(maxsize=16)
def momentum_stencil(mesh: Mesh) -> MomentumStencil:
    i, j = mesh.edge_cells[:, 0], mesh.edge_cells[:, 1]
    owner = np.stack([i, i, j, j], axis=1)
    other = np.stack([j, j, i, i], axis=1)
    fe = mesh.flank_edges
    coef = mesh.flank_kites / (2.0 * mesh.cell_area[owner]) * mesh.edge_length[fe] * mesh.flank_signs
    fan_node = np.repeat(np.arange(mesh.n_nodes), np.diff(mesh.node_ptr))
    loop_coef = mesh.node_loop_signs * mesh.dual_length[mesh.node_loop_edges] / mesh.node_area[fan_node]
    ce = mesh.cell_edges
    ke = mesh.dual_length[ce] * mesh.edge_length[ce] / (4.0 * mesh.cell_area[:, None])
    c = np.ascontiguousarray
    return MomentumStencil(
        cells=c(mesh.edge_cells), nodes=c(mesh.edge_nodes), h=c(mesh.dual_length),
        fl_cells=c(mesh.flank_cells), fl_edges=c(fe), fl_coef=c(coef), fl_depth=c(other),
        node_ptr=c(mesh.node_ptr), loop_edges=c(mesh.node_loop_edges), loop_coef=c(loop_coef),
        cell_edges=c(ce), ke_coef=c(ke),
    )


# ---------------------------------------------------------------------------
# numpy back end


def _terms_numpy(st: MomentumStencil, V, D, fcor):
    nV = st.node_ptr.shape[0] - 1
    contrib = st.loop_coef * V[st.loop_edges]
    vort = np.add.reduceat(contrib, st.node_ptr[:-1]) + fcor if nV else contrib[:0]
    ke = np.sum(st.ke_coef * V[st.cell_edges] ** 2, axis=1)
    F = st.fl_coef * 0.5 * (D[st.fl_depth] + D[st.fl_cells]) * V[st.fl_edges]
    Fp = F[:, 0] + F[:, 2]
    Fm = F[:, 1] + F[:, 3]
    i, j = st.cells[:, 0], st.cells[:, 1]
    Dbar = 0.5 * (D[i] + D[j])
    adv = (vort[st.nodes[:, 0]] * Fp - vort[st.nodes[:, 1]] * Fm) / (Dbar * st.h)
    kin = -(ke[j] - ke[i]) / st.h
    return adv, kin, vort, ke


# ---------------------------------------------------------------------------
# numba back end


@njit
def _vorticity_nb(V, fcor, node_ptr, loop_edges, loop_coef):
    nV = node_ptr.shape[0] - 1
    out = np.empty(nV)
    for e in range(nV):
        s = 0.0
        for t in range(node_ptr[e], node_ptr[e + 1]):
            s += loop_coef[t] * V[loop_edges[t]]
        out[e] = s + fcor
    return out


@njit
def _kinetic_nb(V, cell_edges, ke_coef):
    nC = cell_edges.shape[0]
    out = np.empty(nC)
    for c in range(nC):
        s = 0.0
        for k in range(3):
            v = V[cell_edges[c, k]]
            s += ke_coef[c, k] * v * v
        out[c] = s
    return out


@njit
def _edge_terms_nb(V, D, vort, ke, cells, nodes, h, fl_cells, fl_edges, fl_coef, fl_depth, adv, kin):
    nE = cells.shape[0]
    for e in range(nE):
        i = cells[e, 0]
        j = cells[e, 1]
        Fp = 0.0
        Fm = 0.0
        for k in range(4):
            flux = fl_coef[e, k] * 0.5 * (D[fl_depth[e, k]] + D[fl_cells[e, k]]) * V[fl_edges[e, k]]
            if k % 2 == 0:
                Fp += flux
            else:
                Fm += flux
        Dbar = 0.5 * (D[i] + D[j])
        adv[e] = (vort[nodes[e, 0]] * Fp - vort[nodes[e, 1]] * Fm) / (Dbar * h[e])
        kin[e] = -(ke[j] - ke[i]) / h[e]


def _terms_numba(st: MomentumStencil, V, D, fcor):
    vort = _vorticity_nb(V, fcor, st.node_ptr, st.loop_edges, st.loop_coef)
    ke = _kinetic_nb(V, st.cell_edges, st.ke_coef)
    adv = np.empty_like(V)
    kin = np.empty_like(V)
    _edge_terms_nb(V, D, vort, ke, st.cells, st.nodes, st.h, st.fl_cells, st.fl_edges,
                   st.fl_coef, st.fl_depth, adv, kin)
    return adv, kin, vort, ke


def momentum_terms(mesh: Mesh, V, D, fcor: float, backend: str | None = None):
    """Return ``(Adv, K, absolute vorticity at nodes, kinetic energy per cell)``.

    ``backend`` is ``"numba"``, ``"numpy"`` or ``None`` for the default.
    """
    st = momentum_stencil(mesh)
    V = np.ascontiguousarray(V, dtype=float)
    D = np.ascontiguousarray(D, dtype=float)
    if backend is None:
        backend = "numba" if _accel.USE_NUMBA else "numpy"
    if backend == "numba":
        if not _accel.NUMBA_AVAILABLE:
            raise RuntimeError("numba back end requested but numba is not installed")
        return _terms_numba(st, V, D, float(fcor))
    if backend == "numpy":
        return _terms_numpy(st, V, D, float(fcor))
    raise ValueError(f"unknown backend {backend!r}")

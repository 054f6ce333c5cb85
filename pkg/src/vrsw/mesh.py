"""Doubly periodic triangular meshes and their circumcentric duals.

Conventions
-----------
* Triangles are stored counter-clockwise.  Local edge ``k`` of a cell runs
  from local vertex ``k`` to local vertex ``k+1``.
* Each undirected edge has an owner cell ``i`` (the first cell that
  references it) and another cell ``j``.  Edge fields are stored for the
  orientation ``i -> j``; the unit normal points from ``i`` into ``j``.
* With the owner's edge running ``a -> b``, node ``+`` is ``a`` (right of the
  normal) and node ``-`` is ``b`` (left of the normal).  Flank cells ``i+``,
  ``j+`` touch node ``+`` and ``i-``, ``j-`` touch node ``-``.
* Dual edge lengths ``h`` are signed: the distance between the two
  circumcenters, negative when they sit on the wrong side of the shared edge.
* Node fans are ordered counter-clockwise.  The dual area attached to a
  (node, cell) pair is the kite spanned by the node, the two adjacent edge
  midpoints and the circumcenter.  Kites partition both the triangles and the
  dual cells exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, MeshError, RefinementError

ASPECT_RTOL = 1e-4


def _cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _freeze(*arrays):
    for a in arrays:
        a.flags.writeable = False


@dataclass(frozen=True)
class RawMesh:
    """Vertex coordinates and triangle connectivity on the periodic box."""

    vertices: np.ndarray
    triangles: np.ndarray
    Lx: float
    Ly: float

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float).reshape(-1, 2))
        object.__setattr__(self, "triangles", np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3))
        object.__setattr__(self, "Lx", float(self.Lx))
        object.__setattr__(self, "Ly", float(self.Ly))


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable periodic triangulation with circumcentric dual geometry.

    All lengths are in km.  Arrays are read-only.
    """

    Lx: float
    Ly: float
    vertices: np.ndarray          # (nV, 2) wrapped into [0, Lx) x [0, Ly)
    triangles: np.ndarray         # (nC, 3) CCW vertex ids
    tri_xy: np.ndarray            # (nC, 3, 2) unwrapped corners, first corner wrapped
    cell_area: np.ndarray         # (nC,)
    barycenter: np.ndarray        # (nC, 2) wrapped
    circumcenter: np.ndarray      # (nC, 2) wrapped
    cell_edges: np.ndarray        # (nC, 3) local edge k -> global edge
    cell_edge_sign: np.ndarray    # (nC, 3) +1 where the cell owns the edge
    cell_neighbors: np.ndarray    # (nC, 3) cell across local edge k
    kite_area: np.ndarray         # (nC, 3) |zeta_e cap T_c| at local vertex k
    edge_cells: np.ndarray        # (nE, 2) owner i, other j
    edge_nodes: np.ndarray        # (nE, 2) node +, node -
    edge_length: np.ndarray       # (nE,) primal length f
    dual_length: np.ndarray       # (nE,) signed dual length h
    edge_normal: np.ndarray       # (nE, 2) unit normal i -> j
    edge_midpoint: np.ndarray     # (nE, 2) wrapped
    edge_local: np.ndarray        # (nE, 2) local edge index in owner, other
    flank_cells: np.ndarray       # (nE, 4) i+, i-, j+, j-
    flank_edges: np.ndarray       # (nE, 4) edges (i,i+), (i,i-), (j,j+), (j,j-)
    flank_signs: np.ndarray       # (nE, 4) V_{i->i+} = sign * V[edge]
    flank_kites: np.ndarray       # (nE, 4) |zeta_+ cap T_i|, |zeta_- cap T_i|, |zeta_+ cap T_j|, |zeta_- cap T_j|
    node_area: np.ndarray         # (nV,) dual cell area |zeta_e|
    node_ptr: np.ndarray          # (nV+1,) CSR offsets into the fan arrays
    node_cells: np.ndarray        # CCW fan of incident cells
    node_K: np.ndarray            # K^e_k for each fan entry
    node_loop_edges: np.ndarray   # edge between fan cells t and t+1
    node_loop_signs: np.ndarray   # +1 where fan cell t owns that edge

    # sizes -----------------------------------------------------------
    @property
    def n_cells(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edge_cells.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.vertices.shape[0]

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    @property
    def dx_min(self) -> float:
        """Smallest dual edge length, the length scale of the CFL bound."""
        return float(self.dual_length.min())

    def raw(self) -> RawMesh:
        return RawMesh(self.vertices.copy(), self.triangles.copy(), self.Lx, self.Ly)

    def node_fan(self, e: int):
        """Return (cells, K, loop_edges, loop_signs) for node ``e``."""
        s = slice(self.node_ptr[e], self.node_ptr[e + 1])
        return self.node_cells[s], self.node_K[s], self.node_loop_edges[s], self.node_loop_signs[s]

    def cell_centers(self, kind: str = "barycenter") -> np.ndarray:
        if kind == "barycenter":
            return self.barycenter
        if kind == "circumcenter":
            return self.circumcenter
        raise ConfigError(f"unknown cell center kind {kind!r}")

    def wrap(self, xy):
        xy = np.asarray(xy, dtype=float)
        return np.mod(xy, [self.Lx, self.Ly])

    def min_image(self, d):
        """Periodic minimum-image representative of displacement ``d``."""
        d = np.asarray(d, dtype=float)
        L = np.array([self.Lx, self.Ly])
        return d - L * np.round(d / L)

    # sparse incidence operators ---------------------------------------
    @cached_property
    def cell_edge_matrix(self) -> sp.csr_matrix:
        """Signed cell-edge incidence: +1 for the owner, -1 for the other cell."""
        rows = self.edge_cells.T.ravel()
        cols = np.tile(np.arange(self.n_edges), 2)
        vals = np.concatenate([np.ones(self.n_edges), -np.ones(self.n_edges)])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_cells, self.n_edges))

    @cached_property
    def node_edge_matrix(self) -> sp.csr_matrix:
        """Signed node-edge incidence of CCW dual loops."""
        rows = np.repeat(np.arange(self.n_nodes), np.diff(self.node_ptr))
        return sp.csr_matrix(
            (self.node_loop_signs.astype(float), (rows, self.node_loop_edges)),
            shape=(self.n_nodes, self.n_edges),
        )

    @cached_property
    def node_cell_K(self) -> sp.csr_matrix:
        """Rows of K^e_k: maps cell values to area-weighted node values."""
        rows = np.repeat(np.arange(self.n_nodes), np.diff(self.node_ptr))
        return sp.csr_matrix((self.node_K, (rows, self.node_cells)), shape=(self.n_nodes, self.n_cells))


# ---------------------------------------------------------------------------
# construction


def _edge_key(va, vb, shift):
    sx, sy = int(shift[0]), int(shift[1])
    if va < vb or (va == vb and (sx, sy) > (0, 0)):
        return (va, vb, sx, sy), True
    return (vb, va, -sx, -sy), False


def _unwrap_triangles(verts, tris, L):
    p0 = verts[tris[:, 0]]
    out = np.empty(tris.shape + (2,))
    out[:, 0] = p0
    for k in (1, 2):
        d = verts[tris[:, k]] - p0
        out[:, k] = p0 + d - L * np.round(d / L)
    return out


def _circumcenters(P):
    a, b, c = P[:, 0], P[:, 1], P[:, 2]
    bx, by = (b - a).T
    cx, cy = (c - a).T
    d = 2.0 * (bx * cy - by * cx)
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (cy * b2 - by * c2) / d
    uy = (bx * c2 - cx * b2) / d
    return a + np.stack([ux, uy], axis=1)


def build_edges(triangles, tri_xy, verts, L):
    """Discover undirected edges and check conformity.

    Returns ``(edge_cells, edge_local, cell_edges, cell_edge_sign, problems)``
    where ``problems`` lists topological defects as ``(kind, ids, message)``.
    """
    nC = triangles.shape[0]
    table = {}
    problems = []
    cell_edges = np.full((nC, 3), -1, dtype=np.int64)
    cell_sign = np.zeros((nC, 3), dtype=np.int64)
    owners, others, loc_o, loc_t = [], [], [], []
    for c in range(nC):
        for k in range(3):
            va, vb = int(triangles[c, k]), int(triangles[c, (k + 1) % 3])
            d = tri_xy[c, (k + 1) % 3] - tri_xy[c, k]
            shift = np.round((d - (verts[vb] - verts[va])) / L).astype(int)
            key, forward = _edge_key(va, vb, shift)
            if key not in table:
                e = len(owners)
                table[key] = (e, forward)
                owners.append(c)
                others.append(-1)
                loc_o.append(k)
                loc_t.append(-1)
                cell_edges[c, k] = e
                cell_sign[c, k] = 1
                continue
            e, fwd0 = table[key]
            if others[e] != -1:
                problems.append(("topology", (e, owners[e], others[e], c),
                                 f"edge {key[:2]} shared by more than two cells ({owners[e]}, {others[e]}, {c})"))
                continue
            if fwd0 == forward:
                problems.append(("orientation", (e, owners[e], c),
                                 f"edge {key[:2]} traversed in the same direction by cells {owners[e]} and {c}"))
            others[e] = c
            loc_t[e] = k
            cell_edges[c, k] = e
            cell_sign[c, k] = -1
    for e, o in enumerate(others):
        if o == -1:
            problems.append(("topology", (e, owners[e]), f"edge {e} of cell {owners[e]} has only one incident cell"))
    edge_cells = np.stack([np.array(owners, dtype=np.int64), np.array(others, dtype=np.int64)], axis=1)
    edge_local = np.stack([np.array(loc_o, dtype=np.int64), np.array(loc_t, dtype=np.int64)], axis=1)
    return edge_cells, edge_local, cell_edges, cell_sign, problems


def compute_dual_geometry(raw: RawMesh, orient: bool = True) -> Mesh:
    """Build the full mesh (edges, stencils, dual cells, K weights) from raw data.

    Clockwise triangles are reordered when ``orient`` is true; otherwise they
    raise.  Dual lengths are not checked here; see :func:`validate`.
    """
    Lx, Ly = raw.Lx, raw.Ly
    if not (Lx > 0 and Ly > 0):
        raise ConfigError(f"domain lengths must be positive, got Lx={Lx}, Ly={Ly}")
    L = np.array([Lx, Ly])
    verts = np.mod(raw.vertices, L)
    tris = raw.triangles.copy()
    nV = verts.shape[0]
    if tris.size == 0:
        raise MeshError("mesh has no cells")
    if tris.min() < 0 or tris.max() >= nV:
        raise MeshError("triangle references a vertex id outside the node list")

    P = _unwrap_triangles(verts, tris, L)
    area2 = _cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
    scale = max(Lx, Ly) ** 2
    degenerate = np.flatnonzero(np.abs(area2) <= 1e-14 * scale)
    if degenerate.size:
        raise MeshError(f"degenerate (zero-area) cells: {degenerate[:10].tolist()}")
    cw = area2 < 0
    if cw.any():
        if not orient:
            raise MeshError(f"inverted cells: {np.flatnonzero(cw)[:10].tolist()}")
        tris[cw] = tris[cw][:, [0, 2, 1]]
        P = _unwrap_triangles(verts, tris, L)
        area2 = np.abs(area2)
    area = 0.5 * area2

    edge_cells, edge_local, cell_edges, cell_sign, problems = build_edges(tris, P, verts, L)
    if problems:
        raise MeshError("; ".join(p[2] for p in problems[:5]))
    nE = edge_cells.shape[0]
    nC = tris.shape[0]

    cc = _circumcenters(P)
    bary = P.mean(axis=1)

    cell_nb = np.where(cell_sign > 0, edge_cells[cell_edges, 1], edge_cells[cell_edges, 0])

    # kites: |zeta_e cap T_c| at local vertex k
    kite = np.empty((nC, 3))
    for k in range(3):
        p = P[:, k]
        m_next = 0.5 * (P[:, k] + P[:, (k + 1) % 3])
        m_prev = 0.5 * (P[:, (k + 2) % 3] + P[:, k])
        kite[:, k] = 0.5 * (_cross(m_next - p, cc - p) + _cross(cc - p, m_prev - p))

    # edge geometry in the owner's frame
    eo, et = edge_cells[:, 0], edge_cells[:, 1]
    ko, kt = edge_local[:, 0], edge_local[:, 1]
    pa = P[eo, ko]
    pb = P[eo, (ko + 1) % 3]
    t = pb - pa
    f = np.hypot(t[:, 0], t[:, 1])
    n = np.stack([t[:, 1], -t[:, 0]], axis=1) / f[:, None]
    mid_o = 0.5 * (pa + pb)
    mid_t = 0.5 * (P[et, kt] + P[et, (kt + 1) % 3])
    s_o = np.einsum("ij,ij->i", mid_o - cc[eo], n)
    s_t = np.einsum("ij,ij->i", mid_t - cc[et], -n)
    h = s_o + s_t

    edge_nodes = np.stack([tris[eo, ko], tris[eo, (ko + 1) % 3]], axis=1)

    # flank stencils: owner (a, b, c) with the edge at local ko
    ip_loc = (ko + 2) % 3
    im_loc = (ko + 1) % 3
    # other cell (b, a, d) with the edge at local kt
    jp_loc = (kt + 1) % 3
    jm_loc = (kt + 2) % 3
    fl_edges = np.stack([cell_edges[eo, ip_loc], cell_edges[eo, im_loc],
                         cell_edges[et, jp_loc], cell_edges[et, jm_loc]], axis=1)
    fl_signs = np.stack([cell_sign[eo, ip_loc], cell_sign[eo, im_loc],
                         cell_sign[et, jp_loc], cell_sign[et, jm_loc]], axis=1).astype(float)
    fl_cells = np.stack([cell_nb[eo, ip_loc], cell_nb[eo, im_loc],
                         cell_nb[et, jp_loc], cell_nb[et, jm_loc]], axis=1)
    fl_kites = np.stack([kite[eo, ko], kite[eo, (ko + 1) % 3],
                         kite[et, (kt + 1) % 3], kite[et, kt]], axis=1)

    # node fans, CCW: from corner k of cell c the next cell lies across local edge k+2
    corner = {}
    for c in range(nC):
        for k in range(3):
            corner.setdefault(int(tris[c, k]), []).append((c, k))
    missing = [e for e in range(nV) if e not in corner]
    if missing:
        raise MeshError(f"nodes not referenced by any cell: {missing[:10]}")
    local_of = {}
    for c in range(nC):
        for k in range(3):
            local_of[(c, int(tris[c, k]))] = k
    ptr = np.zeros(nV + 1, dtype=np.int64)
    fan_cells, fan_K, fan_edges, fan_signs = [], [], [], []
    node_area = np.empty(nV)
    for e in range(nV):
        start_c, start_k = corner[e][0]
        c, k = start_c, start_k
        cells, kites_e, ledges, lsigns = [], [], [], []
        for _ in range(len(corner[e]) + 1):
            cells.append(c)
            kites_e.append(kite[c, k])
            le = cell_edges[c, (k + 2) % 3]
            ledges.append(le)
            lsigns.append(cell_sign[c, (k + 2) % 3])
            c = int(cell_nb[c, (k + 2) % 3])
            k = local_of.get((c, e), -1)
            if c == start_c:
                break
        if c != start_c or len(cells) != len(corner[e]):
            raise MeshError(f"node {e}: incident cells do not form a single closed fan")
        a = float(np.sum(kites_e))
        node_area[e] = a
        fan_cells.extend(cells)
        fan_K.extend(np.asarray(kites_e) / a)
        fan_edges.extend(ledges)
        fan_signs.extend(lsigns)
        ptr[e + 1] = ptr[e] + len(cells)

    mesh = Mesh(
        Lx=Lx, Ly=Ly, vertices=verts, triangles=tris, tri_xy=P, cell_area=area,
        barycenter=np.mod(bary, L), circumcenter=np.mod(cc, L),
        cell_edges=cell_edges, cell_edge_sign=cell_sign.astype(float), cell_neighbors=cell_nb,
        kite_area=kite, edge_cells=edge_cells, edge_nodes=edge_nodes,
        edge_length=f, dual_length=h, edge_normal=n, edge_midpoint=np.mod(mid_o, L),
        edge_local=edge_local, flank_cells=fl_cells, flank_edges=fl_edges,
        flank_signs=fl_signs, flank_kites=fl_kites, node_area=node_area, node_ptr=ptr,
        node_cells=np.asarray(fan_cells, dtype=np.int64), node_K=np.asarray(fan_K),
        node_loop_edges=np.asarray(fan_edges, dtype=np.int64),
        node_loop_signs=np.asarray(fan_signs, dtype=float),
    )
    _freeze(*(getattr(mesh, name) for name in mesh.__dataclass_fields__
              if isinstance(getattr(mesh, name), np.ndarray)))
    return mesh


def regular_raw(n1d: int, Lx: float, Ly: float) -> RawMesh:
    """Vertices and triangles of the equilateral tiling with ``2 n1d^2`` cells."""
    n = int(n1d)
    if n != n1d or n < 4 or n % 2:
        raise ConfigError(f"n1d must be an even integer >= 4, got {n1d}")
    if not (Lx > 0 and Ly > 0):
        raise ConfigError(f"domain lengths must be positive, got Lx={Lx}, Ly={Ly}")
    ratio = Ly / Lx
    if abs(ratio / (np.sqrt(3.0) / 2.0) - 1.0) > ASPECT_RTOL:
        raise ConfigError(
            f"Ly/Lx = {ratio:.8f} is not compatible with an equilateral tiling "
            f"(expected sqrt(3)/2 within {ASPECT_RTOL:g} relative)")
    dx, dy = Lx / n, Ly / n
    jj, ii = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    x = (ii + 0.5 * (jj % 2)) * dx
    y = jj * dy
    verts = np.stack([x.ravel(), y.ravel()], axis=1)

    def vid(i, j):
        return (j % n) * n + (i % n)

    tris = []
    for j in range(n):
        for i in range(n):
            if j % 2 == 0:
                tris.append((vid(i, j), vid(i + 1, j), vid(i, j + 1)))
                tris.append((vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)))
            else:
                tris.append((vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)))
                tris.append((vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)))
    return RawMesh(verts, np.array(tris, dtype=np.int64), Lx, Ly)


def build_regular_mesh(n1d: int, Lx: float, Ly: float) -> Mesh:
    """Regular mesh of ``2 n1d^2`` near-equilateral triangles with edge ``Lx/n1d``."""
    return compute_dual_geometry(regular_raw(n1d, Lx, Ly))


# ---------------------------------------------------------------------------
# r-adaptivity


@dataclass(frozen=True)
class Monitor:
    """Gaussian monitor ``1 + strength * exp(-d^2 / (2 width^2))``."""

    center: tuple[float, float]
    width: float
    strength: float

    def __call__(self, mesh_or_L, xy):
        Lx, Ly = (mesh_or_L.Lx, mesh_or_L.Ly) if hasattr(mesh_or_L, "Lx") else mesh_or_L
        L = np.array([Lx, Ly])
        d = np.asarray(xy) - np.asarray(self.center, dtype=float)
        d = d - L * np.round(d / L)
        r2 = np.einsum("...i,...i->...", d, d)
        return 1.0 + self.strength * np.exp(-0.5 * r2 / self.width ** 2)


def default_monitor(Lx: float, Ly: float) -> Monitor:
    """Monitor used for the refined test meshes: centered, ~2x finer core.

    On the 2x64^2 base with 2000 sweeps this yields an outer/central edge
    ratio of about 2.2 and a smallest dual edge of about 5.2 km.
    """
    return Monitor(center=(0.5 * Lx, 0.5 * Ly), width=0.1 * Lx, strength=3.48)


def build_refined_mesh(base: Mesh, monitor: Monitor, iterations: int = 2000,
                       relax: float = 0.8) -> Mesh:
    """Relax node positions toward the monitor density with fixed connectivity.

    Weighted-Laplacian (Winslow) relaxation: each Jacobi sweep moves every
    node a fraction ``relax`` of the way to the average of its neighbours,
    weighted by the monitor at the base-mesh edge midpoints.  Large monitor
    values pull nodes together.  Neighbour positions use the periodic image
    recorded in the base mesh, so the result stays doubly periodic.
    """
    if iterations < 0:
        raise ConfigError("iterations must be non-negative")
    if not 0.0 < relax <= 1.0:
        raise ConfigError("relax must lie in (0, 1]")
    if monitor.width <= 0:
        raise ConfigError("monitor width must be positive")
    if monitor.strength < 0:
        raise ConfigError("monitor strength must be non-negative")
    if monitor.strength == 0.0 or iterations == 0:
        return base

    L = np.array([base.Lx, base.Ly])
    a, b = base.edge_nodes[:, 0], base.edge_nodes[:, 1]
    E = np.arange(base.n_edges)
    ko = base.edge_local[:, 0]
    Po = base.tri_xy[base.edge_cells[:, 0]]
    d0 = Po[E, (ko + 1) % 3] - Po[E, ko]
    w = monitor(L, base.vertices[a] + 0.5 * d0)
    nV = base.n_nodes
    den = np.bincount(a, w, nV) + np.bincount(b, w, nV)
    u = np.zeros_like(base.vertices)
    for _ in range(iterations):
        wd = w[:, None] * (d0 + u[b] - u[a])
        num = np.stack([np.bincount(a, wd[:, k], nV) - np.bincount(b, wd[:, k], nV) for k in (0, 1)], axis=1)
        u += relax * num / den[:, None]
    raw = RawMesh(np.mod(base.vertices + u, L), base.triangles, base.Lx, base.Ly)
    P = _unwrap_triangles(raw.vertices, raw.triangles, L)
    area2 = _cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
    if (area2 <= 0).any():
        bad = int(np.flatnonzero(area2 <= 0)[0])
        raise RefinementError(f"relaxation inverted cell {bad}")
    mesh = compute_dual_geometry(raw, orient=False)
    bad = np.flatnonzero(mesh.dual_length <= 0)
    if bad.size:
        e = int(bad[0])
        i, j = (int(c) for c in mesh.edge_cells[e])
        raise RefinementError(
            f"relaxation produced non-positive dual length h={mesh.dual_length[e]:.3e} km "
            f"on edge {e} (cells {i}, {j})", edge=e)
    return mesh


def edge_length_ratio(mesh: Mesh, center, width: float) -> float:
    """Mean primal edge length beyond ``3 width`` over that within ``width/2``."""
    d = mesh.min_image(mesh.edge_midpoint - np.asarray(center, dtype=float))
    r = np.hypot(d[:, 0], d[:, 1])
    inner = mesh.edge_length[r <= 0.5 * width]
    outer = mesh.edge_length[r >= 3 * width]
    if inner.size == 0 or outer.size == 0:
        raise ConfigError("width leaves the inner or outer region empty")
    return float(outer.mean() / inner.mean())


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    kind: str
    ids: tuple
    message: str


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def kinds(self):
        return sorted({v.kind for v in self.violations})

    def __str__(self):
        if self.ok:
            return "mesh valid"
        return "\n".join(f"[{v.kind}] {v.message}" for v in self.violations)


def validate(mesh, rtol_area: float = 1e-12, tol_K: float = 1e-14) -> ValidationReport:
    """Check topology and geometric invariants; never raises on bad meshes.

    Accepts a :class:`Mesh` or a :class:`RawMesh` (the latter allows
    reporting topology defects that prevent building a Mesh).
    """
    report = ValidationReport()
    add = report.violations.append
    if isinstance(mesh, RawMesh):
        raw = mesh
        L = np.array([raw.Lx, raw.Ly])
        verts = np.mod(raw.vertices, L)
        P = _unwrap_triangles(verts, raw.triangles, L)
        area2 = _cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
        for c in np.flatnonzero(np.abs(area2) <= 1e-14 * max(raw.Lx, raw.Ly) ** 2):
            add(Violation("degenerate", (int(c),), f"cell {c} has zero area"))
        if report.violations:
            return report
        tris = raw.triangles.copy()
        cw = area2 < 0
        tris[cw] = tris[cw][:, [0, 2, 1]]
        P = _unwrap_triangles(verts, tris, L)
        _, _, _, _, problems = build_edges(tris, P, verts, L)
        for kind, ids, msg in problems:
            add(Violation(kind, tuple(int(i) for i in ids), msg))
        if report.violations:
            return report
        try:
            mesh = compute_dual_geometry(raw)
        except MeshError as exc:
            add(Violation("topology", (), str(exc)))
            return report

    A = mesh.area
    nC, nE, nV = mesh.n_cells, mesh.n_edges, mesh.n_nodes
    if nC - nE + nV != 0:
        add(Violation("euler", (nC, nE, nV), f"V - E + F = {nV - nE + nC}, torus requires 0"))
    if 2 * nE != 3 * nC:
        add(Violation("topology", (nE, nC), f"{nE} edges for {nC} cells (expected 3F/2)"))
    if (mesh.edge_cells[:, 1] < 0).any():
        add(Violation("topology", (), "edge with a single incident cell"))
    err = abs(mesh.cell_area.sum() - A)
    if err > rtol_area * A:
        add(Violation("cell-area", (), f"sum of cell areas differs from Lx*Ly by {err:.3e} km^2"))
    err = abs(mesh.node_area.sum() - A)
    if err > rtol_area * A:
        add(Violation("dual-area", (), f"sum of dual areas differs from Lx*Ly by {err:.3e} km^2"))
    for e in np.flatnonzero(mesh.dual_length <= 0):
        i, j = mesh.edge_cells[e]
        add(Violation("dual-length", (int(e),),
                      f"edge {e} (cells {i},{j}) has non-positive dual length {mesh.dual_length[e]:.4e} km"))
    Ksum = np.add.reduceat(mesh.node_K, mesh.node_ptr[:-1])
    for v in np.flatnonzero(np.abs(Ksum - 1.0) > tol_K):
        add(Violation("K-sum", (int(v),), f"node {v}: sum of K = {Ksum[v]!r}"))
    fan_node = np.repeat(np.arange(nV), np.diff(mesh.node_ptr))
    for t in np.flatnonzero((mesh.node_K <= 0) | (mesh.node_K >= 1)):
        add(Violation("K-range", (int(fan_node[t]), int(mesh.node_cells[t])),
                      f"node {fan_node[t]}, cell {mesh.node_cells[t]}: K = {mesh.node_K[t]:.4e} outside (0,1)"))
    return report


# ---------------------------------------------------------------------------
# file IO


def write_mesh(mesh, path) -> None:
    """Write ``PERIODIC``/``NODES``/``CELLS`` text format."""
    raw = mesh.raw() if isinstance(mesh, Mesh) else mesh
    lines = [f"PERIODIC {raw.Lx!r} {raw.Ly!r}", "NODES"]
    lines += [f"{i} {x!r} {y!r}" for i, (x, y) in enumerate(raw.vertices.tolist())]
    lines.append("CELLS")
    lines += [f"{i} {a} {b} {c}" for i, (a, b, c) in enumerate(raw.triangles.tolist())]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_raw_mesh(path) -> RawMesh:
    """Parse a mesh text file into a :class:`RawMesh` (ids remapped to 0..n-1)."""
    Lx = Ly = None
    section = None
    nodes, cells = [], []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        tok = line.split("#", 1)[0].split()
        if not tok:
            continue
        head = tok[0].upper()
        try:
            if head == "PERIODIC":
                Lx, Ly = float(tok[1]), float(tok[2])
            elif head in ("NODES", "CELLS"):
                section = head
            elif section == "NODES":
                nodes.append((tok[0], float(tok[1]), float(tok[2])))
            elif section == "CELLS":
                cells.append((tok[0], tok[1], tok[2], tok[3]))
            else:
                raise ValueError("data before a NODES or CELLS header")
        except (IndexError, ValueError) as exc:
            raise MeshError(f"{path}:{lineno}: cannot parse {line!r} ({exc})") from None
    if Lx is None:
        raise MeshError(f"{path}: missing PERIODIC header")
    if not nodes or not cells:
        raise MeshError(f"{path}: NODES and CELLS sections must be non-empty")
    index = {nid: k for k, (nid, _, _) in enumerate(nodes)}
    if len(index) != len(nodes):
        raise MeshError(f"{path}: duplicate node ids")
    try:
        tris = np.array([[index[v] for v in c[1:]] for c in cells], dtype=np.int64)
    except KeyError as exc:
        raise MeshError(f"{path}: cell references unknown node {exc.args[0]}") from None
    verts = np.array([(x, y) for _, x, y in nodes])
    return RawMesh(verts, tris, Lx, Ly)


def read_mesh(path) -> Mesh:
    return compute_dual_geometry(read_raw_mesh(path))

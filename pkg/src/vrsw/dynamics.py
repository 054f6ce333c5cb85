"""Semidiscrete tendencies of the rotating shallow water scheme.

Momentum:   dV/dt = -Adv(V, D) + K(V) - G(D)
Continuity: dD/dt = -div(V, D)
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, StateError
from .kernels import momentum_terms
from .mesh import Mesh
from .operators import weighted_divergence

DEPTH_FLOOR = 1e-10  # km


@dataclass(frozen=True)
class ShallowWaterEnergy:
    """Internal energy ``eps(D) = g (D + B)^2 / 2`` per unit area."""

    g: float

    def value(self, D, B):
        return 0.5 * self.g * (D + B) ** 2

    def derivative(self, D, B):
        return self.g * (D + B)


@dataclass(frozen=True)
class PhysParams:
    """Physical constants in km and days.

    ``B`` is the bottom topography per cell (``None`` means flat).  ``energy``
    is any object with ``value(D, B)`` and ``derivative(D, B)``; it defaults
    to the shallow water law with this ``g``.
    """

    g: float
    f: float
    H0: float
    B: np.ndarray | None = None
    energy: object = field(default=None)

    def __post_init__(self):
        if not self.g > 0:
            raise ConfigError(f"g must be positive, got {self.g}")
        if not np.isfinite(self.f):
            raise ConfigError("f must be finite")
        if self.energy is None:
            object.__setattr__(self, "energy", ShallowWaterEnergy(self.g))
        if self.B is not None:
            B = np.asarray(self.B, dtype=float).copy()
            if not np.all(np.isfinite(B)):
                raise ConfigError("topography must be finite")
            B.flags.writeable = False
            object.__setattr__(self, "B", B)

    def topography(self, mesh: Mesh) -> np.ndarray:
        if self.B is None:
            return np.zeros(mesh.n_cells)
        if self.B.shape != (mesh.n_cells,):
            raise ConfigError(f"topography has {self.B.shape} values, mesh has {mesh.n_cells} cells")
        return self.B

    def with_(self, **changes) -> "PhysParams":
        kw = dict(g=self.g, f=self.f, H0=self.H0, B=self.B, energy=self.energy)
        if "g" in changes and "energy" not in changes and isinstance(self.energy, ShallowWaterEnergy):
            kw["energy"] = None
        kw.update(changes)
        return PhysParams(**kw)


def check_depth(mesh: Mesh, D) -> None:
    D = np.asarray(D)
    if not np.all(np.isfinite(D)):
        raise StateError("depth field contains non-finite values")
    Dbar = 0.5 * (D[mesh.edge_cells[:, 0]] + D[mesh.edge_cells[:, 1]])
    bad = np.flatnonzero(Dbar <= DEPTH_FLOOR)
    if bad.size:
        raise StateError(f"non-positive edge depth {Dbar[bad[0]]:.3e} km on edge {bad[0]}")


def advection_term(mesh: Mesh, V, D, f: float, backend: str | None = None) -> np.ndarray:
    """Vorticity flux term ``Adv(V, D)`` (km/day^2) with absolute vorticity ``curl V + f``."""
    check_depth(mesh, D)
    return momentum_terms(mesh, V, D, f, backend)[0]


def kinetic_term(mesh: Mesh, V, backend: str | None = None) -> np.ndarray:
    """Kinetic-energy gradient ``K(V) = -(KE_j - KE_i) / h_ij``."""
    D = np.ones(mesh.n_cells)
    return momentum_terms(mesh, V, D, 0.0, backend)[1]


def kinetic_energy_density(mesh: Mesh, V) -> np.ndarray:
    """Per-cell ``sum_k h f V^2 / (4 Omega)`` (km^2/day^2)."""
    V = np.asarray(V, dtype=float)
    ce = mesh.cell_edges
    return np.sum(mesh.dual_length[ce] * mesh.edge_length[ce] * V[ce] ** 2, axis=1) / (4.0 * mesh.cell_area)


def pressure_term(mesh: Mesh, D, params: PhysParams) -> np.ndarray:
    """``(eps'(D_j) - eps'(D_i)) / h_ij``; equals ``g (D+B)_j - g (D+B)_i`` over ``h`` by default."""
    B = params.topography(mesh)
    dE = params.energy.derivative(np.asarray(D, dtype=float), B)
    i, j = mesh.edge_cells[:, 0], mesh.edge_cells[:, 1]
    return (dE[j] - dE[i]) / mesh.dual_length


def momentum_rhs(mesh: Mesh, V, D, params: PhysParams, backend: str | None = None) -> np.ndarray:
    """``-Adv(V, D) + K(V) - G(D)`` per edge."""
    check_depth(mesh, D)
    adv, kin, _, _ = momentum_terms(mesh, V, D, params.f, backend)
    return -adv + kin - pressure_term(mesh, D, params)


def continuity_rhs(mesh: Mesh, V, D) -> np.ndarray:
    """``-div(V, D)`` per cell."""
    return -weighted_divergence(mesh, V, D)

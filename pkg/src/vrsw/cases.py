"""Initial states for the standard test cases.

Every initializer samples analytic fields: depths and topography at cell
centers, streamfunction-like depths at nodes, velocities at edges.  All
lengths are km, velocities km/day.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dynamics import PhysParams
from .errors import ConfigError
from .integrator import State
from .mesh import Mesh
from .operators import grad_tangential, project_velocity

CASES = ("lake_at_rest", "disturbed_lake", "isolated_vortex", "vortex_pair", "shear_flow")

_DEFAULTS = {
    "lake_at_rest": dict(H0=0.75, Bp=0.1, offset=0.1),
    "disturbed_lake": dict(H0=0.75, Hp=0.0075),
    "isolated_vortex": dict(H0=0.75, Hp=0.075),
    "vortex_pair": dict(H0=10.0, Hp=0.075, offset=0.1),
    "shear_flow": dict(H0=1.076, Hp=0.03, kappa=0.1, lambda_x=0.5, sigma_y_rel=1.0 / 12.0),
}


@dataclass(frozen=True)
class CaseSpec:
    """Test-case parameters; ``None`` fields take the case default.

    ``sigma_x``/``sigma_y`` are Gaussian widths in km (default ``3 L / 40``);
    ``Hp`` and ``Bp`` are the depth and island amplitudes in km.
    """

    name: str
    H0: float | None = None
    Hp: float | None = None
    Bp: float | None = None
    sigma_x: float | None = None
    sigma_y: float | None = None
    offset: float | None = None
    kappa: float | None = None
    lambda_x: float | None = None
    sigma_y_rel: float | None = None
    velocity_mode: str = "velocity"
    center: str = "barycenter"

    def resolved(self, mesh: Mesh) -> "CaseSpec":
        if self.name not in CASES:
            raise ConfigError(f"unknown case {self.name!r}; expected one of {', '.join(CASES)}")
        vals = dict(_DEFAULTS[self.name])
        vals.setdefault("sigma_x", 3.0 * mesh.Lx / 40.0)
        vals.setdefault("sigma_y", 3.0 * mesh.Ly / 40.0)
        if self.name == "disturbed_lake":
            vals["sigma_x"] = vals["sigma_y"] = 3.0 * mesh.Ly / 40.0
        given = {k: v for k, v in self.__dict__.items() if v is not None}
        vals.update(given)
        out = replace(self, **{k: v for k, v in vals.items() if k in self.__dataclass_fields__})
        out._check()
        return out

    def _check(self):
        if self.H0 is not None and not self.H0 > 0:
            raise ConfigError("H0 must be positive")
        for name in ("sigma_x", "sigma_y"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive")
        if self.offset is not None and not 0.0 < self.offset < 0.5:
            raise ConfigError("offset must lie in (0, 1/2)")
        if self.Hp is not None and self.Hp >= self.H0:
            raise ConfigError("Hp must be smaller than H0")
        if self.velocity_mode not in ("velocity", "streamfunction"):
            raise ConfigError("velocity_mode must be 'velocity' or 'streamfunction'")
        if self.center not in ("barycenter", "circumcenter"):
            raise ConfigError("center must be 'barycenter' or 'circumcenter'")


@dataclass(frozen=True)
class Initial:
    """An initial state with its topography and optional exact fields."""

    state: State
    B: np.ndarray
    exact: "VortexSolution | None" = None


def _periodic_offset(x, xc, L, sigma):
    return L / (np.pi * sigma) * np.sin(np.pi / L * (x - xc))


def _periodic_offset2(x, xc, L, sigma):
    return L / (2.0 * np.pi * sigma) * np.sin(2.0 * np.pi / L * (x - xc))


def _nudge_to_level(D, B, level):
    """Adjust ``D`` by ulps until ``D + B == level`` exactly in floating point."""
    D = D.copy()
    for _ in range(8):
        s = D + B
        hi, lo = s > level, s < level
        if not (hi.any() or lo.any()):
            break
        D[hi] = np.nextafter(D[hi], -np.inf)
        D[lo] = np.nextafter(D[lo], np.inf)
    return D


# ---------------------------------------------------------------------------


def island(spec: CaseSpec, Lx: float, Ly: float):
    """Topography ``B(x, y)`` of the submerged Gaussian island."""
    xc = (0.5 - spec.offset) * Lx
    yc = (0.5 - spec.offset) * Ly

    def B(x, y):
        return spec.Bp * np.exp(-0.5 * ((x - xc) ** 2 / spec.sigma_x ** 2 + (y - yc) ** 2 / spec.sigma_y ** 2))

    return B


def init_lake_at_rest(mesh: Mesh, spec: CaseSpec | None = None):
    """Fluid at rest over an island; ``D + B == H0`` holds bitwise."""
    spec = (spec or CaseSpec("lake_at_rest")).resolved(mesh)
    xy = mesh.cell_centers(spec.center)
    B = island(spec, mesh.Lx, mesh.Ly)(xy[:, 0], xy[:, 1])
    if B.max() >= spec.H0:
        raise ConfigError("island reaches the surface (max B >= H0)")
    D = _nudge_to_level(spec.H0 - B, B, spec.H0)
    return State(0.0, np.zeros(mesh.n_edges), D), B


def disturbed_depth(spec: CaseSpec, Lx: float, Ly: float):
    xc, yc = 0.5 * Lx, 0.5 * Ly
    mean = 4.0 * np.pi * spec.sigma_x * spec.sigma_y / (Lx * Ly)

    def h(x, y):
        x1 = _periodic_offset(x, xc, Lx, spec.sigma_x)
        y1 = _periodic_offset(y, yc, Ly, spec.sigma_y)
        return spec.H0 - spec.Hp * (np.exp(-0.5 * (x1 ** 2 + y1 ** 2)) - mean)

    return h


def init_disturbed_lake(mesh: Mesh, spec: CaseSpec | None = None) -> State:
    """Lake at rest with a small Gaussian depression in the middle, no flow."""
    spec = (spec or CaseSpec("disturbed_lake")).resolved(mesh)
    xy = mesh.cell_centers(spec.center)
    D = disturbed_depth(spec, mesh.Lx, mesh.Ly)(xy[:, 0], xy[:, 1])
    return State(0.0, np.zeros(mesh.n_edges), D)


@dataclass(frozen=True)
class VortexSolution:
    """Steady isolated vortex in gradient-wind balance."""

    H0: float
    u0: float
    r0: float
    g: float
    f: float
    xc: float
    yc: float
    Lx: float
    Ly: float

    def _rel(self, x, y):
        dx = x - self.xc
        dy = y - self.yc
        dx = dx - self.Lx * np.round(dx / self.Lx)
        dy = dy - self.Ly * np.round(dy / self.Ly)
        return dx, dy

    def speed(self, r):
        return self.u0 * (r / self.r0) * np.exp(-0.5 * (r / self.r0) ** 2)

    def depth_radial(self, r):
        q = (r / self.r0) ** 2
        return (self.H0 - self.u0 ** 2 / (2 * self.g) * np.exp(-q)
                - self.f * self.u0 * self.r0 / self.g * np.exp(-0.5 * q))

    def depth_slope(self, r):
        q = (r / self.r0) ** 2
        return (self.u0 ** 2 / self.g * r / self.r0 ** 2 * np.exp(-q)
                + self.f * self.u0 / (self.g * self.r0) * r * np.exp(-0.5 * q))

    def streamfunction_radial(self, r):
        return -self.u0 * self.r0 * np.exp(-0.5 * (r / self.r0) ** 2)

    def vorticity_radial(self, r):
        q = (r / self.r0) ** 2
        return self.u0 / self.r0 * (2.0 - q) * np.exp(-0.5 * q)

    def velocity(self, x, y):
        dx, dy = self._rel(x, y)
        amp = self.u0 / self.r0 * np.exp(-0.5 * (dx * dx + dy * dy) / self.r0 ** 2)
        return -amp * dy, amp * dx

    def depth(self, x, y):
        dx, dy = self._rel(x, y)
        return self.depth_radial(np.hypot(dx, dy))

    def streamfunction(self, x, y):
        dx, dy = self._rel(x, y)
        return self.streamfunction_radial(np.hypot(dx, dy))

    def q_rel(self, x, y):
        dx, dy = self._rel(x, y)
        r = np.hypot(dx, dy)
        return self.vorticity_radial(r) / self.depth_radial(r)


def vortex_solution(mesh: Mesh, spec: CaseSpec, params: PhysParams) -> VortexSolution:
    spec = spec.resolved(mesh)
    r0 = 0.5 * (spec.sigma_x + spec.sigma_y)
    d = 4.0 * r0
    u0 = 2.0 * params.g * spec.Hp / (params.f * d)
    return VortexSolution(H0=spec.H0, u0=u0, r0=r0, g=params.g, f=params.f,
                          xc=0.5 * mesh.Lx, yc=0.5 * mesh.Ly, Lx=mesh.Lx, Ly=mesh.Ly)


def init_isolated_vortex(mesh: Mesh, spec: CaseSpec | None, params: PhysParams, mode: str | None = None):
    """Steady vortex: returns ``(State, VortexSolution)``.

    ``mode="velocity"`` projects the analytic velocity at edge midpoints;
    ``mode="streamfunction"`` takes ``-G_perp`` of the node-sampled
    streamfunction, which is ``k x G_perp(Psi)`` in scalar form.
    """
    spec = (spec or CaseSpec("isolated_vortex")).resolved(mesh)
    mode = mode or spec.velocity_mode
    sol = vortex_solution(mesh, spec, params)
    xy = mesh.cell_centers(spec.center)
    D = sol.depth(xy[:, 0], xy[:, 1])
    if mode == "velocity":
        V = project_velocity(mesh, sol.velocity, at="midpoint")
    elif mode == "streamfunction":
        psi = sol.streamfunction(mesh.vertices[:, 0], mesh.vertices[:, 1])
        V = -grad_tangential(mesh, psi)
    else:
        raise ConfigError(f"unknown velocity mode {mode!r}")
    return State(0.0, V, D), sol


def geostrophic_velocity(mesh: Mesh, h_nodes, params: PhysParams) -> np.ndarray:
    """Discrete geostrophic balance ``V = -(g / f) G_perp(h)``."""
    if params.f == 0:
        raise ConfigError("geostrophic initialization needs f != 0")
    return -(params.g / params.f) * grad_tangential(mesh, h_nodes)


def vortex_pair_depth(spec: CaseSpec, Lx: float, Ly: float):
    o = spec.offset
    centers = [((0.5 - o) * Lx, (0.5 - o) * Ly), ((0.5 + o) * Lx, (0.5 + o) * Ly)]
    mean = 4.0 * np.pi * spec.sigma_x * spec.sigma_y / (Lx * Ly)

    def h(x, y):
        s = 0.0
        for xc, yc in centers:
            x1 = _periodic_offset(x, xc, Lx, spec.sigma_x)
            y1 = _periodic_offset(y, yc, Ly, spec.sigma_y)
            s = s + np.exp(-0.5 * (x1 ** 2 + y1 ** 2))
        return spec.H0 - spec.Hp * (s - mean)

    return h, centers


def init_vortex_pair(mesh: Mesh, spec: CaseSpec | None, params: PhysParams) -> State:
    """Two co-rotating Gaussian depressions in discrete geostrophic balance."""
    spec = (spec or CaseSpec("vortex_pair")).resolved(mesh)
    h, _ = vortex_pair_depth(spec, mesh.Lx, mesh.Ly)
    xy = mesh.cell_centers(spec.center)
    D = h(xy[:, 0], xy[:, 1])
    V = geostrophic_velocity(mesh, h(mesh.vertices[:, 0], mesh.vertices[:, 1]), params)
    return State(0.0, V, D)


def shear_depth(spec: CaseSpec, Lx: float, Ly: float):
    sy = spec.sigma_y_rel

    def h(x, y):
        xp = x / Lx
        yp = np.sin(np.pi / Ly * (y - 0.5 * Ly)) / np.pi
        ypp = np.sin(2.0 * np.pi / Ly * (y - 0.5 * Ly)) / (2.0 * np.pi)
        env = (ypp / sy) * np.exp(-yp ** 2 / (2.0 * sy ** 2) + 0.5)
        return spec.H0 - spec.Hp * env * (1.0 + spec.kappa * np.sin(2.0 * np.pi * xp / spec.lambda_x))

    return h


def init_shear_flow(mesh: Mesh, spec: CaseSpec | None, params: PhysParams) -> State:
    """Perturbed zonal jet in discrete geostrophic balance."""
    spec = (spec or CaseSpec("shear_flow")).resolved(mesh)
    h = shear_depth(spec, mesh.Lx, mesh.Ly)
    xy = mesh.cell_centers(spec.center)
    D = h(xy[:, 0], xy[:, 1])
    V = geostrophic_velocity(mesh, h(mesh.vertices[:, 0], mesh.vertices[:, 1]), params)
    return State(0.0, V, D)


def initialize(mesh: Mesh, spec: CaseSpec, params: PhysParams) -> Initial:
    """Dispatch on ``spec.name``; always returns state, topography and exact solution."""
    spec = spec.resolved(mesh)
    zeros = np.zeros(mesh.n_cells)
    if spec.name == "lake_at_rest":
        state, B = init_lake_at_rest(mesh, spec)
        return Initial(state, B)
    if spec.name == "disturbed_lake":
        return Initial(init_disturbed_lake(mesh, spec), zeros)
    if spec.name == "isolated_vortex":
        state, sol = init_isolated_vortex(mesh, spec, params)
        return Initial(state, zeros, sol)
    if spec.name == "vortex_pair":
        return Initial(init_vortex_pair(mesh, spec, params), zeros)
    return Initial(init_shear_flow(mesh, spec, params), zeros)

"""Conserved quantities, error norms, wave spectra and regime numbers."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dynamics import PhysParams, kinetic_energy_density
from .errors import DiagnosticsError
from .mesh import Mesh
from .operators import curl, node_average


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Integral quantities of one state.

    The ``rel_*`` fields are relative deviations from a reference record and
    stay ``nan`` until :meth:`relative_to` fills them in.
    """

    t: float
    mass: float
    E_kin: float
    E_pot: float
    E_tot: float
    PV: float
    PE: float
    rel_mass: float = np.nan
    rel_E_tot: float = np.nan
    rel_PV: float = np.nan
    rel_PE: float = np.nan

    def relative_to(self, ref: "DiagnosticsRecord") -> "DiagnosticsRecord":
        def rel(a, b):
            return (a - b) / abs(b) if b != 0 else (0.0 if a == b else np.inf)

        return replace(self, rel_mass=rel(self.mass, ref.mass), rel_E_tot=rel(self.E_tot, ref.E_tot),
                       rel_PV=rel(self.PV, ref.PV), rel_PE=rel(self.PE, ref.PE))


def absolute_vorticity(mesh: Mesh, V, f: float) -> np.ndarray:
    return curl(mesh, V) + f


def node_depth(mesh: Mesh, D) -> np.ndarray:
    """``D_e = sum_i K^e_i D_i``; raises if any value is not positive."""
    De = node_average(mesh, D)
    bad = np.flatnonzero(~(De > 0))
    if bad.size:
        raise DiagnosticsError(f"non-positive node depth {De[bad[0]]:.3e} km at node {bad[0]}")
    return De


def relative_pv(mesh: Mesh, V, D) -> np.ndarray:
    """``curl(V) / D_e`` at every node (1/(km day))."""
    return curl(mesh, V) / node_depth(mesh, D)


def quantities(mesh: Mesh, state, params: PhysParams) -> DiagnosticsRecord:
    """Mass, kinetic/potential/total energy, PV and potential enstrophy of ``state``."""
    D = np.asarray(state.D, dtype=float)
    V = np.asarray(state.V, dtype=float)
    Om = mesh.cell_area
    B = params.topography(mesh)
    mass = float(np.sum(D * Om))
    e_kin = float(np.sum(D * Om * kinetic_energy_density(mesh, V)))
    e_pot = float(np.sum(params.energy.value(D, B) * Om))
    wa = absolute_vorticity(mesh, V, params.f)
    pv = float(np.sum(wa * mesh.node_area))
    pe = float(0.5 * np.sum(wa ** 2 / node_depth(mesh, D) * mesh.node_area))
    return DiagnosticsRecord(t=float(state.t), mass=mass, E_kin=e_kin, E_pot=e_pot,
                             E_tot=e_kin + e_pot, PV=pv, PE=pe)


@dataclass(frozen=True)
class ErrorNorms:
    L2: float
    Linf: float


def error_norms(mesh: Mesh, field_t, field_0) -> ErrorNorms:
    """Area-weighted relative L2 and max norms of ``field_t - field_0``."""
    a = np.asarray(field_t, dtype=float)
    b = np.asarray(field_0, dtype=float)
    if a.shape != (mesh.n_cells,) or b.shape != (mesh.n_cells,):
        raise DiagnosticsError(f"fields must have one value per cell ({mesh.n_cells})")
    wa, wb = a * mesh.cell_area, b * mesh.cell_area
    den2 = np.sqrt(np.sum(wb ** 2))
    deninf = np.max(np.abs(wb))
    if den2 == 0 or deninf == 0:
        raise DiagnosticsError("reference field is zero; relative norm undefined")
    return ErrorNorms(L2=float(np.sqrt(np.sum((wa - wb) ** 2)) / den2),
                      Linf=float(np.max(np.abs(wa - wb)) / deninf))


def observed_order(errors, sizes) -> np.ndarray:
    """Pairwise convergence orders ``log(e_k/e_{k+1}) / log(s_k/s_{k+1})``."""
    e = np.asarray(errors, dtype=float)
    s = np.asarray(sizes, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(s[:-1] / s[1:])


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class Spectrum:
    """One-sided amplitude spectrum with detected peaks (angular frequencies)."""

    omega: np.ndarray
    magnitude: np.ndarray
    peaks: np.ndarray
    peak_magnitudes: np.ndarray
    resolution: float

    def match(self, predicted, tol: float | None = None) -> dict:
        """Nearest detected peak for each predicted frequency within ``tol``.

        Unmatched predictions map to ``None``.
        """
        tol = self.resolution if tol is None else tol
        out = {}
        for w in np.atleast_1d(predicted):
            if self.peaks.size:
                k = int(np.argmin(np.abs(self.peaks - w)))
                out[float(w)] = float(self.peaks[k]) if abs(self.peaks[k] - w) <= tol else None
            else:
                out[float(w)] = None
        return out


def spectrum(series, sample_interval: float, *, threshold: float = 5.0, window: bool = False,
             lowest_frequency: float | None = None) -> Spectrum:
    """Fourier peaks of a uniformly sampled series.

    The mean is removed first.  A bin counts as a peak when it is a strict
    local maximum and exceeds ``threshold`` times the median magnitude.  With
    ``window=True`` a Hann taper is applied.  ``lowest_frequency`` (rad per
    time unit) enforces a record of at least two of its periods.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise DiagnosticsError("series must be one-dimensional")
    if not sample_interval > 0:
        raise DiagnosticsError("sample interval must be positive")
    n = x.size
    T = n * sample_interval
    if n < 8:
        raise DiagnosticsError(f"series too short for a spectrum ({n} samples)")
    if lowest_frequency is not None and T < 2 * (2 * np.pi / lowest_frequency):
        raise DiagnosticsError(
            f"record of {T:g} covers fewer than two periods of frequency {lowest_frequency:g}")
    if not np.all(np.isfinite(x)):
        raise DiagnosticsError("series contains non-finite values")
    x = x - x.mean()
    if window:
        x = x * np.hanning(n)
    mag = np.abs(np.fft.rfft(x)) / n
    omega = 2 * np.pi * np.fft.rfftfreq(n, sample_interval)
    floor = threshold * np.median(mag)
    inner = (mag[1:-1] > mag[:-2]) & (mag[1:-1] > mag[2:]) & (mag[1:-1] > floor)
    idx = np.flatnonzero(inner) + 1
    return Spectrum(omega=omega, magnitude=mag, peaks=omega[idx], peak_magnitudes=mag[idx],
                    resolution=2 * np.pi / T)


def predict_frequencies(f: float, g: float, H0: float, Lx: float, Ly: float, n_max: int) -> dict:
    """Inertia-gravity frequencies ``omega(nx, ny)`` on the doubly periodic box."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    c2 = g * H0
    out = {}
    for nx in range(n_max + 1):
        for ny in range(n_max + 1):
            k, l = 2 * np.pi * nx / Lx, 2 * np.pi * ny / Ly
            out[(nx, ny)] = float(np.sqrt(f * f + c2 * (k * k + l * l)))
    return out


@dataclass(frozen=True)
class RegimeNumbers:
    U: float
    Ro: float
    Fr: float
    Bu: float
    Bu_direct: float
    L_D: float


def regime_numbers(g: float, f: float, H0: float, Hp: float, d: float) -> RegimeNumbers:
    """Velocity scale and Rossby, Froude, Burger numbers of a vortex of size ``d``.

    ``Bu`` is ``(Ro / Fr)^2``; ``Bu_direct`` is ``g H0 / (f d)^2``.
    """
    for name, v in (("g", g), ("f", f), ("H0", H0), ("Hp", Hp), ("d", d)):
        if not v > 0:
            raise ValueError(f"{name} must be positive")
    U = 2 * g * Hp / (f * d)
    Ro = U / (f * d)
    Fr = U / np.sqrt(g * H0)
    return RegimeNumbers(U=U, Ro=Ro, Fr=Fr, Bu=(Ro / Fr) ** 2, Bu_direct=g * H0 / (f * d) ** 2,
                         L_D=float(np.sqrt(g * H0) / f))


def probe_cell(mesh: Mesh, point=None) -> int:
    """Cell whose barycenter is nearest ``point`` (default: the domain center)."""
    p = np.array([0.5 * mesh.Lx, 0.5 * mesh.Ly]) if point is None else np.asarray(point, dtype=float)
    d = mesh.min_image(mesh.barycenter - p)
    return int(np.argmin(np.einsum("ij,ij->i", d, d)))

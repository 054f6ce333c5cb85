"""Command line driver: configuration, run orchestration and file output.

Run configurations are INI files::

    [mesh]
    type = regular          ; regular | refined | file
    n1d = 32
    Lx_km = 5000
    Ly_km = 4330

    [case]
    name = isolated_vortex

    [physics]               ; SI units
    g = 9.80616             ; m/s^2
    f = 6.147e-5            ; 1/s
    H0_m = 750

    [time]
    dt_seconds = 48
    duration_days = 1

    [output]
    directory = out
    qoi_interval_steps = 10

Physical inputs are SI and converted to km and days on load.  Unknown
sections or keys are rejected.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import itertools
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .cases import CASES, CaseSpec, initialize
from .diagnostics import (DiagnosticsRecord, predict_frequencies, probe_cell, quantities,
                          relative_pv, spectrum)
from .dynamics import PhysParams
from .errors import ConfigError, SolverError, VRSWError
from .integrator import SECONDS_PER_DAY, SolverParams, State, courant_number, step
from .mesh import (Monitor, build_refined_mesh, build_regular_mesh, default_monitor, read_mesh,
                   validate, write_mesh)

COURANT_WARN = 3.0

# ---------------------------------------------------------------------------
# units

_FACTORS = {
    "m": 1e-3,
    "km": 1.0,
    "s": 1.0 / SECONDS_PER_DAY,
    "day": 1.0,
    "m/s": 1e-3 * SECONDS_PER_DAY,
    "m/s2": 1e-3 * SECONDS_PER_DAY ** 2,
    "1/s": SECONDS_PER_DAY,
}


def convert_units(value, unit: str):
    """Convert an SI quantity to km/day units.

    ``unit`` is one of ``m``, ``s``, ``m/s``, ``m/s2`` (acceleration) or
    ``1/s``; ``km`` and ``day`` pass through unchanged.
    """
    try:
        factor = _FACTORS[unit]
    except KeyError:
        raise ConfigError(f"unknown unit {unit!r}; expected one of {', '.join(_FACTORS)}") from None
    return np.asarray(value, dtype=float) * factor if np.ndim(value) else float(value) * factor


# ---------------------------------------------------------------------------
# configuration


@dataclass
class MeshConfig:
    type: str = "regular"
    n1d: int = 32
    Lx_km: float = 5000.0
    Ly_km: float = 4330.0
    path: str = ""
    monitor_x_km: float | None = None
    monitor_y_km: float | None = None
    monitor_width_km: float | None = None
    monitor_strength: float | None = None
    iterations: int = 2000


@dataclass
class CaseConfig:
    name: str = "lake_at_rest"
    sigma_x_km: float | None = None
    sigma_y_km: float | None = None
    offset: float | None = None
    kappa: float | None = None
    lambda_x: float | None = None
    sigma_y_rel: float | None = None
    velocity_mode: str = "velocity"
    center: str = "barycenter"


@dataclass
class PhysicsConfig:
    g: float = 9.80616          # m/s^2
    f: float = 6.147e-5         # 1/s
    H0_m: float | None = None
    Hp_m: float | None = None
    Bp_m: float | None = None


@dataclass
class TimeConfig:
    dt_seconds: float = 60.0
    duration_days: float = 1.0


@dataclass
class SolverConfig:
    fp_tol: float = 1e-12
    max_fp_iterations: int = 50
    linear_solver: str = "direct"
    linear_tol: float = 1e-13
    backend: str = "auto"


@dataclass
class OutputConfig:
    directory: str = "out"
    qoi_interval_steps: int = 1
    snapshot_interval_days: float = 0.0
    probe: bool = False
    sample_interval_days: float = 0.01
    probe_x_km: float | None = None
    probe_y_km: float | None = None
    spectrum_n_max: int = 2


@dataclass
class RunConfig:
    mesh: MeshConfig = field(default_factory=MeshConfig)
    case: CaseConfig = field(default_factory=CaseConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(raw: str, f, where: str):
    kind = f.type if isinstance(f.type, str) else f.type.__name__
    raw = raw.strip()
    if "None" in kind and raw.lower() in ("", "none"):
        return None
    try:
        if kind.startswith("bool"):
            if raw.lower() in _TRUE:
                return True
            if raw.lower() in _FALSE:
                return False
            raise ValueError("expected a boolean")
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} ({exc})") from None
    return raw


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse INI text into a :class:`RunConfig`; unknown sections/keys are errors."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    cfg = RunConfig()
    sections = {f.name: f for f in fields(RunConfig)}
    for name in cp.sections():
        if name not in sections:
            raise ConfigError(f"{source}: unknown section [{name}]; expected one of {', '.join(sections)}")
        block = getattr(cfg, name)
        known = {f.name: f for f in fields(block)}
        for key, raw in cp.items(name):
            if key not in known:
                raise ConfigError(f"{source}: unknown key {key!r} in [{name}]; "
                                  f"expected one of {', '.join(known)}")
            setattr(block, key, _coerce(raw, known[key], f"{source} [{name}] {key}"))
    return cfg


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    return parse_config(text, str(p))


def set_option(cfg: RunConfig, dotted: str, raw: str) -> RunConfig:
    """Return a copy of ``cfg`` with ``section.key`` set from a string."""
    try:
        sec, key = dotted.split(".")
    except ValueError:
        raise ConfigError(f"option {dotted!r} must look like section.key") from None
    if sec not in {f.name for f in fields(RunConfig)}:
        raise ConfigError(f"unknown section {sec!r}")
    block = getattr(cfg, sec)
    known = {f.name: f for f in fields(block)}
    if key not in known:
        raise ConfigError(f"unknown key {key!r} in [{sec}]")
    new_block = replace(block, **{key: _coerce(raw, known[key], dotted)})
    return replace(cfg, **{sec: new_block})


# ---------------------------------------------------------------------------
# resolution of a config into solver objects


@dataclass(frozen=True)
class Setup:
    mesh: object
    state: State
    params: PhysParams
    solver: SolverParams
    n_steps: int
    exact: object = None


def build_mesh(mc: MeshConfig):
    if mc.type == "file":
        if not mc.path:
            raise ConfigError("[mesh] type = file needs a path")
        return read_mesh(mc.path)
    if mc.type not in ("regular", "refined"):
        raise ConfigError(f"unknown mesh type {mc.type!r}; expected regular, refined or file")
    base = build_regular_mesh(mc.n1d, mc.Lx_km, mc.Ly_km)
    if mc.type == "regular":
        return base
    mon = default_monitor(mc.Lx_km, mc.Ly_km)
    mon = Monitor(
        center=(mon.center[0] if mc.monitor_x_km is None else mc.monitor_x_km,
                mon.center[1] if mc.monitor_y_km is None else mc.monitor_y_km),
        width=mon.width if mc.monitor_width_km is None else mc.monitor_width_km,
        strength=mon.strength if mc.monitor_strength is None else mc.monitor_strength)
    return build_refined_mesh(base, mon, iterations=mc.iterations)


def case_spec(cfg: RunConfig) -> CaseSpec:
    c, p = cfg.case, cfg.physics
    if c.name not in CASES:
        raise ConfigError(f"unknown case {c.name!r}; expected one of {', '.join(CASES)}")

    def km(v):
        return None if v is None else convert_units(v, "m")

    return CaseSpec(name=c.name, H0=km(p.H0_m), Hp=km(p.Hp_m), Bp=km(p.Bp_m),
                    sigma_x=c.sigma_x_km, sigma_y=c.sigma_y_km, offset=c.offset, kappa=c.kappa,
                    lambda_x=c.lambda_x, sigma_y_rel=c.sigma_y_rel,
                    velocity_mode=c.velocity_mode, center=c.center)


def steps_for(duration: float, dt: float, what: str) -> int:
    """Number of ``dt`` steps in ``duration``; both must agree to 1e-9 relative."""
    n = int(round(duration / dt))
    if n < 0 or abs(n * dt - duration) > 1e-9 * max(duration, dt):
        raise ConfigError(f"{what} ({duration:g} days) is not a whole number of time steps ({dt:g} days)")
    return n


def resolve(cfg: RunConfig) -> Setup:
    """Turn a configuration into mesh, initial state, parameters and solver controls."""
    t = cfg.time
    if not t.dt_seconds > 0:
        raise ConfigError("[time] dt_seconds must be positive")
    if t.duration_days < 0:
        raise ConfigError("[time] duration_days must be non-negative")
    mesh = build_mesh(cfg.mesh)
    spec = case_spec(cfg).resolved(mesh)
    g = convert_units(cfg.physics.g, "m/s2")
    f = convert_units(cfg.physics.f, "1/s")
    params = PhysParams(g=g, f=f, H0=spec.H0)
    init = initialize(mesh, spec, params)
    params = params.with_(B=init.B)
    s = cfg.solver
    solver = SolverParams(dt=convert_units(t.dt_seconds, "s"), fp_tol=s.fp_tol,
                          max_fp_iterations=s.max_fp_iterations, linear_solver=s.linear_solver,
                          linear_tol=s.linear_tol)
    if s.backend not in ("auto", "numba", "numpy"):
        raise ConfigError("[solver] backend must be auto, numba or numpy")
    n_steps = steps_for(t.duration_days, solver.dt, "duration")
    return Setup(mesh, init.state, params, solver, n_steps, init.exact)


# ---------------------------------------------------------------------------
# output


QOI_COLUMNS = ("t_days", "mass", "e_kin", "e_pot", "e_tot", "pv", "pe",
               "rel_err_mass", "rel_err_e_tot", "rel_err_pv", "rel_err_pe")


def _fmt(x) -> str:
    return repr(float(x))


def qoi_row(rec: DiagnosticsRecord) -> list[str]:
    return [_fmt(v) for v in (rec.t, rec.mass, rec.E_kin, rec.E_pot, rec.E_tot, rec.PV, rec.PE,
                              rec.rel_mass, rec.rel_E_tot, rec.rel_PV, rec.rel_PE)]


def write_snapshot(out: Path, index: int, mesh, state: State) -> None:
    """Cell depths and node relative PV as two plain CSV files."""
    xy = mesh.barycenter
    with open(out / f"cells_{index:04d}.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["cell_id", "x_km", "y_km", "D_km"])
        for i in range(mesh.n_cells):
            w.writerow([i, _fmt(xy[i, 0]), _fmt(xy[i, 1]), _fmt(state.D[i])])
    q = relative_pv(mesh, state.V, state.D)
    with open(out / f"nodes_{index:04d}.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "x_km", "y_km", "q_rel"])
        for e in range(mesh.n_nodes):
            w.writerow([e, _fmt(mesh.vertices[e, 0]), _fmt(mesh.vertices[e, 1]), _fmt(q[e])])


def write_peaks(path: Path, series, interval: float, params: PhysParams, mesh, n_max: int) -> list:
    spec = spectrum(series, interval)
    pred = predict_frequencies(params.f, params.g, params.H0, mesh.Lx, mesh.Ly, n_max)
    rows = []
    for w, mag in zip(spec.peaks, spec.peak_magnitudes):
        mode, wp = min(pred.items(), key=lambda kv: abs(kv[1] - w))
        matched = abs(wp - w) <= spec.resolution
        rows.append((w, mag, f"{mode[0]}:{mode[1]}" if matched else "", wp if matched else np.nan))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["omega_rad_per_day", "magnitude_km", "mode", "predicted_rad_per_day"])
        for r in rows:
            w.writerow([_fmt(r[0]), _fmt(r[1]), r[2], _fmt(r[3])])
    return rows


def _at_step(exc: VRSWError, k: int, t: float) -> VRSWError:
    msg = f"step {k} (t = {t:.6g} days): {exc}"
    if isinstance(exc, SolverError):
        return SolverError(msg, residual=exc.residual, iterations=exc.iterations)
    return type(exc)(msg)


def run(cfg: RunConfig, out: str | None = None, log=print, warn=None) -> int:
    """Execute one configured simulation and write its outputs; returns an exit status."""
    warn = warn or (lambda msg: print(msg, file=sys.stderr))
    setup = resolve(cfg)
    mesh, params, solver = setup.mesh, setup.params, setup.solver
    oc = cfg.output
    outdir = Path(out or oc.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    backend = None if cfg.solver.backend == "auto" else cfg.solver.backend

    C = courant_number(mesh, params.H0, solver.dt, params.g)
    log(f"mesh: {mesh.n_cells} cells, {mesh.n_edges} edges, dx_min = {mesh.dx_min:.4g} km")
    log(f"case {cfg.case.name}: {setup.n_steps} steps of {cfg.time.dt_seconds:g} s, Courant number C = {C:.3f}")
    if C > COURANT_WARN:
        warn(f"warning: Courant number {C:.2f} exceeds {COURANT_WARN:g}; the fixed-point iteration may diverge")

    if oc.qoi_interval_steps < 1:
        raise ConfigError("[output] qoi_interval_steps must be at least 1")
    snap_every = 0
    if oc.snapshot_interval_days > 0:
        snap_every = steps_for(oc.snapshot_interval_days, solver.dt, "snapshot interval")
    probe_every, probe_id, probe_series = 0, -1, []
    if oc.probe:
        probe_every = steps_for(oc.sample_interval_days, solver.dt, "sample interval")
        if probe_every < 1:
            raise ConfigError("[output] sample_interval_days must be at least one time step")
        point = None if oc.probe_x_km is None else (oc.probe_x_km, oc.probe_y_km)
        probe_id = probe_cell(mesh, point)

    state = setup.state
    ref = quantities(mesh, state, params)
    n_snap = 0
    with open(outdir / "qoi.csv", "w", newline="", encoding="utf-8") as qfh:
        qw = csv.writer(qfh)
        qw.writerow(QOI_COLUMNS)
        qw.writerow(qoi_row(ref.relative_to(ref)))
        if snap_every:
            write_snapshot(outdir, n_snap, mesh, state)
            n_snap += 1
        if probe_every:
            probe_series.append((state.t, state.D[probe_id]))
        for k in range(1, setup.n_steps + 1):
            try:
                state = step(mesh, state, params, solver, backend)
                state.check()
                rec = quantities(mesh, state, params).relative_to(ref) \
                    if k % oc.qoi_interval_steps == 0 or k == setup.n_steps else None
            except VRSWError as exc:
                qfh.flush()
                raise _at_step(exc, k, k * solver.dt) from exc
            if rec is not None:
                qw.writerow(qoi_row(rec))
            if snap_every and k % snap_every == 0:
                write_snapshot(outdir, n_snap, mesh, state)
                n_snap += 1
            if probe_every and k % probe_every == 0:
                probe_series.append((state.t, state.D[probe_id]))

    write_snapshot_final = not snap_every or setup.n_steps % snap_every
    if write_snapshot_final:
        write_snapshot(outdir, n_snap, mesh, state)
    if probe_every:
        with open(outdir / "probe.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t_days", "D_km"])
            for t, d in probe_series:
                w.writerow([_fmt(t), _fmt(d)])
        series = np.array([d for _, d in probe_series])
        try:
            rows = write_peaks(outdir / "peaks.csv", series, oc.sample_interval_days, params, mesh,
                               oc.spectrum_n_max)
            log("spectral peaks (rad/day): " + ", ".join(f"{r[0]:.2f}" for r in rows[:8]))
        except VRSWError as exc:
            warn(f"warning: no spectrum written: {exc}")
    log(f"done: t = {state.t:.6g} days, output in {outdir}")
    return 0


# ---------------------------------------------------------------------------
# sub-commands


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    return run(cfg, args.out)


def _cmd_mesh(args) -> int:
    base = build_regular_mesh(args.n1d, args.Lx, args.Ly)
    if args.make == "regular":
        mesh = base
    else:
        mon = default_monitor(args.Lx, args.Ly)
        mon = Monitor(center=mon.center, width=args.width or mon.width,
                      strength=mon.strength if args.strength is None else args.strength)
        mesh = build_refined_mesh(base, mon, iterations=args.iterations)
    write_mesh(mesh, args.out)
    print(f"wrote {args.out}: {mesh.n_cells} cells, {mesh.n_edges} edges, {mesh.n_nodes} nodes, "
          f"dx_min = {mesh.dx_min:.4g} km")
    return 0


def _cmd_validate(args) -> int:
    from .mesh import read_raw_mesh

    raw = read_raw_mesh(args.mesh)
    report = validate(raw)
    if report.ok:
        report = validate(read_mesh(args.mesh))
    print(report)
    return 0 if report.ok else 1


def _cmd_spectrum(args) -> int:
    with open(args.series, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    if args.column not in header:
        raise ConfigError(f"column {args.column!r} not in {args.series} (have {', '.join(header)})")
    col = header.index(args.column)
    try:
        x = np.array([float(r[col]) for r in data])
        t = np.array([float(r[0]) for r in data])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{args.series}: malformed row ({exc})") from None
    interval = args.interval
    if interval is None:
        dt = np.diff(t)
        if dt.size == 0 or not np.allclose(dt, dt[0], rtol=1e-6):
            raise ConfigError("time column is not uniformly sampled; pass --interval")
        interval = float(dt[0])
    spec = spectrum(x, interval, threshold=args.threshold, window=args.window)
    pred = None
    if args.H0 is not None:
        pred = predict_frequencies(convert_units(args.f, "1/s"), convert_units(args.g, "m/s2"),
                                   convert_units(args.H0, "m"), args.Lx, args.Ly, args.n_max)
    print(f"resolution {spec.resolution:.4f} rad/day")
    print("omega_rad_per_day,magnitude,mode,predicted")
    for w, m in zip(spec.peaks, spec.peak_magnitudes):
        mode, wp = "", ""
        if pred:
            (nx, ny), p = min(pred.items(), key=lambda kv: abs(kv[1] - w))
            if abs(p - w) <= spec.resolution:
                mode, wp = f"{nx}:{ny}", f"{p:.4f}"
        print(f"{w:.4f},{m:.6g},{mode},{wp}")
    return 0


def _sweep_one(job):
    cfg, out = job
    try:
        return out, run(cfg, out, log=lambda *_: None), ""
    except VRSWError as exc:
        return out, 1, str(exc)


def _cmd_sweep(args) -> int:
    base = load_config(args.config)
    grids = []
    for item in args.set:
        key, _, vals = item.partition("=")
        if not vals:
            raise ConfigError(f"--set {item!r} must look like section.key=v1,v2,...")
        grids.append([(key, v) for v in vals.split(",")])
    jobs = []
    root = Path(args.out or base.output.directory)
    for combo in itertools.product(*grids):
        cfg = base
        for key, v in combo:
            cfg = set_option(cfg, key, v)
        tag = "_".join(f"{k.split('.')[1]}-{v}" for k, v in combo) or "base"
        jobs.append((cfg, str(root / tag)))
    status = 0
    with ProcessPoolExecutor(max_workers=args.jobs) as ex:
        for out, code, msg in ex.map(_sweep_one, jobs):
            print(f"{out}: {'ok' if code == 0 else 'failed: ' + msg}")
            status = status or code
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vrsw", description="Variational rotating shallow water solver.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a configured simulation")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="output directory (overrides [output] directory)")
    r.set_defaults(func=_cmd_run)

    m = sub.add_parser("mesh", help="generate a doubly periodic triangular mesh")
    m.add_argument("--make", choices=("regular", "refined"), required=True)
    m.add_argument("--n1d", type=int, default=32)
    m.add_argument("--Lx", type=float, default=5000.0, help="km")
    m.add_argument("--Ly", type=float, default=4330.0, help="km")
    m.add_argument("--strength", type=float, help="monitor strength (refined only)")
    m.add_argument("--width", type=float, help="monitor width in km (refined only)")
    m.add_argument("--iterations", type=int, default=2000)
    m.add_argument("--out", required=True)
    m.set_defaults(func=_cmd_mesh)

    v = sub.add_parser("validate", help="check a mesh file")
    v.add_argument("--mesh", required=True)
    v.set_defaults(func=_cmd_validate)

    s = sub.add_parser("spectrum", help="frequency peaks of a sampled series")
    s.add_argument("--series", required=True, help="CSV with a time column first")
    s.add_argument("--column", default="D_km")
    s.add_argument("--interval", type=float, help="sample interval in days (default: from time column)")
    s.add_argument("--threshold", type=float, default=5.0)
    s.add_argument("--window", action="store_true", help="apply a Hann window")
    s.add_argument("--H0", type=float, help="mean depth in m, enables mode matching")
    s.add_argument("--f", type=float, default=6.147e-5, help="1/s")
    s.add_argument("--g", type=float, default=9.80616, help="m/s^2")
    s.add_argument("--Lx", type=float, default=5000.0)
    s.add_argument("--Ly", type=float, default=4330.0)
    s.add_argument("--n-max", dest="n_max", type=int, default=2)
    s.set_defaults(func=_cmd_spectrum)

    w = sub.add_parser("sweep", help="run a parameter grid, runs in parallel")
    w.add_argument("--config", required=True)
    w.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=V1,V2")
    w.add_argument("--jobs", type=int, default=None)
    w.add_argument("--out")
    w.set_defaults(func=_cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except VRSWError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

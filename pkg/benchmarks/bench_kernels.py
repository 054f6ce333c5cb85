"""Compare the numba and numpy back ends of the momentum kernels.

    python benchmarks/bench_kernels.py --sizes 32 64 128 --repeat 20

Prints the best-of-``repeat`` time per evaluation for each back end, the
speed-up, and the largest difference between the two results.
"""
import argparse
import timeit

import numpy as np

from vrsw import _accel
from vrsw.cases import init_isolated_vortex
from vrsw.dynamics import PhysParams
from vrsw.integrator import SolverParams, step
from vrsw.kernels import momentum_terms
from vrsw.mesh import build_regular_mesh


def bench(n1d: int, repeat: int, with_step: bool):
    mesh = build_regular_mesh(n1d, 5000.0, 4330.0)
    params = PhysParams(g=7.32e7, f=5.3108, H0=0.75)
    state, _ = init_isolated_vortex(mesh, None, params)
    V, D = state.V, state.D
    backends = ["numpy"] + (["numba"] if _accel.NUMBA_AVAILABLE else [])
    times, outs = {}, {}
    for b in backends:
        outs[b] = momentum_terms(mesh, V, D, params.f, b)  # warm-up / compile
        t = timeit.repeat(lambda: momentum_terms(mesh, V, D, params.f, b), number=1, repeat=repeat)
        times[b] = min(t)
    row = [f"2x{n1d}^2", f"{mesh.n_edges:7d}"] + [f"{times[b] * 1e3:9.3f}" for b in backends]
    if "numba" in times:
        diff = max(float(np.max(np.abs(a - c))) for a, c in zip(outs["numpy"], outs["numba"]))
        row += [f"{times['numpy'] / times['numba']:7.1f}x", f"{diff:9.2e}"]
    if with_step:
        solver = SolverParams(dt=48.0 / 86400.0)
        for b in backends:
            step(mesh, state, params, solver, b)
            t = timeit.repeat(lambda: step(mesh, state, params, solver, b), number=1, repeat=max(3, repeat // 5))
            row.append(f"{min(t) * 1e3:9.2f}")
    return "  ".join(row)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128])
    p.add_argument("--repeat", type=int, default=20)
    p.add_argument("--step", action="store_true", help="also time a full time step per back end")
    args = p.parse_args(argv)
    head = "mesh       edges  numpy[ms]  numba[ms]  speedup   max|diff|"
    if args.step:
        head += "  step-np[ms]  step-nb[ms]"
    if not _accel.NUMBA_AVAILABLE:
        head = "mesh       edges  numpy[ms]   (numba not installed)"
    print(head)
    for n in args.sizes:
        print(bench(n, args.repeat, args.step))


if __name__ == "__main__":
    main()

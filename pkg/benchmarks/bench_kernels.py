"""Time the compiled Newton-Raphson kernel against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 200] [--nodes 15 40] [--end-to-end]

``--end-to-end`` also times a 1000-step droop-only run under each backend.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from hybridvvc._kernels import _pf_py
from hybridvvc.powergrid import GridConfig, SetpointProposal, build_benchmark_grid

try:
    from hybridvvc._kernels import _pf_core
except ImportError:
    _pf_core = None


def case(nodes, seed=0):
    grid = build_benchmark_grid(GridConfig(node_count=nodes).validate())
    rng = np.random.default_rng(seed)
    dp = np.zeros(grid.n_buses)
    # drop grows with the square of the chain length; keep it comparable
    scale = (15.0 / nodes) ** 2
    dp[grid.node_bus_index] = rng.uniform(0.0, 0.05 * scale, nodes - 1)
    grid.set_demand(dp, 0.3 * dp)
    p, q = grid.injections(SetpointProposal.zeros(grid.n_actuators))
    order = tuple(range(grid.n_buses))
    G, B = grid._ybus(order)
    return G, B, p, q, grid.config


def bench(solve, G, B, P, Q, cfg, repeat):
    def once():
        vm = np.ones(len(P))
        va = np.zeros(len(P))
        ok = solve(G, B, P, Q, vm, va, cfg.tolerance, cfg.max_iter)[2]
        if not ok:
            raise RuntimeError("benchmark case did not converge")
        return vm

    vm = once()
    t = min(timeit.repeat(once, number=repeat, repeat=3)) / repeat
    return t, vm


_RUN = (
    "import time; from hybridvvc.harness import RunConfig, run; "
    "from hybridvvc._kernels import BACKEND; t = time.perf_counter(); "
    "run(RunConfig(mode='rules_only', steps=1000, seed=0)); "
    "print(BACKEND, time.perf_counter() - t)"
)


def end_to_end():
    for pure in ("1", "0"):
        env = dict(os.environ, HYBRIDVVC_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, "-c", _RUN], env=env, check=True,
                             capture_output=True, text=True).stdout.split()
        print(f"rules_only, 1000 steps, {out[0]:>6}: {float(out[1]):.2f} s")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--nodes", type=int, nargs="+", default=[15, 40])
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args()
    if _pf_core is None:
        print("compiled kernel not built; only the numpy fallback is timed")
    print(f"{'nodes':>6} {'numpy [us]':>12} {'cython [us]':>12} {'speedup':>8} {'max |dV|':>10}")
    for n in args.nodes:
        G, B, P, Q, cfg = case(n)
        t_py, v_py = bench(_pf_py.newton_solve, G, B, P, Q, cfg, args.repeat)
        if _pf_core is None:
            print(f"{n:>6} {t_py * 1e6:>12.1f} {'-':>12} {'-':>8} {'-':>10}")
            continue
        t_cy, v_cy = bench(_pf_core.newton_solve, G, B, P, Q, cfg, args.repeat)
        dv = np.max(np.abs(v_py - v_cy))
        print(f"{n:>6} {t_py * 1e6:>12.1f} {t_cy * 1e6:>12.1f} {t_py / t_cy:>8.1f} {dv:>10.1e}")
    if args.end_to_end:
        end_to_end()


if __name__ == "__main__":
    main()

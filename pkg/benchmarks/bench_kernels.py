"""Wall-clock comparison of the numba kernel and the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--users N] [--steps N] [--repeat K]

Both backends run the same configuration and seed. The script also checks
that they produce bit-identical popularity trajectories.
"""

import argparse
import time

import numpy as np

from asym_sim import backend_name, load_config
from asym_sim.engine import run

CASES = {
    "rho=0 (1-D)": ("appendixD", {}),
    "rho=0.3 (1-D)": ("appendixD", {"kernels.visibility.rho": 0.3}),
    "rho=1 (2-D)": ("default", {"kernels.visibility.rho": 1.0}),
}


def bench(cfg, steps, backend, repeat):
    run(cfg, n_iter=10, backend=backend)  # warm-up / compile
    best, traj = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        traj = run(cfg, n_iter=steps, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, traj


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--users", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=5000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if backend_name() != "numba":
        raise SystemExit("numba disabled (ASYM_SIM_NUMBA=0); nothing to compare")

    print(f"{'case':<16}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}  identical")
    for name, (base, ov) in CASES.items():
        cfg = load_config(base).with_overrides({**ov, "population.n_users": args.users})
        t_np, tr_np = bench(cfg, args.steps, "numpy", args.repeat)
        t_nb, tr_nb = bench(cfg, args.steps, "numba", args.repeat)
        same = np.array_equal(tr_np.pi, tr_nb.pi) and np.array_equal(tr_np.final.opinions, tr_nb.final.opinions)
        print(f"{name:<16}{t_np:>12.3f}{t_nb:>12.3f}{t_np / t_nb:>9.1f}x  {same}")


if __name__ == "__main__":
    main()

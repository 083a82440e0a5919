"""Compare the compiled kernels with the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--sizes 100 1000 5000] [--energies 1 256]
"""
import argparse
import sys
import time

import numpy as np

import treepoisson as tp
from treepoisson import _kernels_py
from treepoisson.green import _tail_sigma

try:
    from treepoisson import _kernels as compiled
except ImportError:
    sys.exit("compiled extension not built; run pip install -e . --no-build-isolation")


def random_model(n, seed=0):
    rng = np.random.default_rng(seed)
    parent = [-1] + [int(rng.integers(max(0, i - 50), i)) for i in range(1, n)]
    return tp.load_model({
        "origin": 0,
        "vertices": [{"id": i, "potential": float(rng.uniform(-1, 1))} for i in range(n)],
        "edges": [{"a": parent[i], "b": i} for i in range(1, n)],
        "degree_bound": n,
    })


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[100, 1000, 5000])
    p.add_argument("--energies", type=int, nargs="+", default=[1, 256])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    print("kernel,vertices,energies,compiled_s,python_s,speedup,max_rel_diff")
    for n in args.sizes:
        m = random_model(n)
        for ne in args.energies:
            gammas = np.linspace(-3, 3, ne) + 0.05j
            sigma, _ = _tail_sigma(m, gammas, False)
            sweep = (m.parent, m.child_ptr, m.child_idx, m.weight_up, m.diagonal,
                     m.frontier_mask, gammas, sigma)
            a = compiled.zeta_sweeps(*sweep)
            b = _kernels_py.zeta_sweeps(*sweep)
            diff = max(float(np.max(np.abs(x - y) / np.maximum(np.abs(y), 1e-300)))
                       for x, y in zip(a, b))
            tc = best_of(lambda: compiled.zeta_sweeps(*sweep), args.repeat)
            tpy = best_of(lambda: _kernels_py.zeta_sweeps(*sweep), args.repeat)
            print(f"zeta_sweeps,{n},{ne},{tc:.4g},{tpy:.4g},{tpy / tc:.1f},{diff:.1e}")

        # all-pairs Green matrix at one parameter; memory bound for large n
        gm = (m.parent, m.subtree_end, a[0][0].copy(), a[2][0].copy())
        x = compiled.green_matrix(*gm)
        y = _kernels_py.green_matrix(*gm)
        diff = float(np.max(np.abs(x - y) / np.maximum(np.abs(y), 1e-300)))
        tc = best_of(lambda: compiled.green_matrix(*gm), args.repeat)
        tpy = best_of(lambda: _kernels_py.green_matrix(*gm), args.repeat)
        print(f"green_matrix,{n},1,{tc:.4g},{tpy:.4g},{tpy / tc:.1f},{diff:.1e}")

if __name__ == "__main__":
    main()

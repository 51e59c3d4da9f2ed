"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Times the three axis kernels on representative shapes, then one smoother
application and one V-cycle, under each available backend.
"""
import argparse
import json
import sys
import timeit

import numpy as np

from igamg import kernels
from igamg.model_problem import assemble_rhs
from igamg.multigrid import SolverConfig, build_hierarchy, cycle
from igamg.smoother import apply_smoother_inverse
from igamg.spline_core import assemble_mass, make_space, prolongation


def _cases(rng):
    space = make_space(4, 256)
    M = assemble_mass(space)
    cb = np.ascontiguousarray(M.cholesky_band)
    n = space.n
    x = rng.standard_normal((64, n, 8))
    P = prolongation(make_space(4, 128), space).tocsr()
    xc = rng.standard_normal((64, P.shape[1], 8))
    ip, ix = P.indptr.astype(np.intc), P.indices.astype(np.intc)
    hier = build_hierarchy(2, 4, 7)
    f = assemble_rhs(hier.finest.space, 2)
    r = rng.standard_normal(f.size)
    sm = hier.finest.smoother
    cfg = SolverConfig()
    return {
        "band_matvec (p=4, n=260, 512 cols)": lambda: kernels.band_matvec(M.ab, x),
        "band_cho_solve (p=4, n=260, 512 cols)": lambda: kernels.band_cho_solve(cb, x),
        "csr_matvec (prolongation 256<-128)": lambda: kernels.csr_matvec(ip, ix, P.data, P.shape[0], xc),
        "smoother apply (d=2, p=4, l=7)": lambda: apply_smoother_inverse(sm, r),
        "V-cycle (d=2, p=4, l=7)": lambda: cycle(hier, hier.L, np.zeros_like(f), f, cfg),
    }


def run(repeat):
    rng = np.random.default_rng(0)
    results = {}
    for backend in kernels.available_backends():
        kernels.set_backend(backend)
        for name, fn in _cases(rng).items():
            fn()  # warm caches
            t = min(timeit.repeat(fn, number=1, repeat=repeat))
            results.setdefault(name, {})[backend] = t
    return results


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="write timings here")
    args = ap.parse_args(argv)
    res = run(args.repeat)
    backends = kernels.available_backends()
    print(f"{'case':42s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, t in res.items():
        row = f"{name:42s}" + "".join(f"{t[b] * 1e3:10.2f}ms" for b in backends)
        if len(backends) > 1:
            row += f"{t['python'] / t['cython']:11.2f}x"
        print(row)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(res, fh, indent=1)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--sizes 32768,262144] [--repeat 20]
"""
import argparse
import timeit

import numpy as np

from choquard_gap import kernels


def bench(name, fn, repeat):
    t = min(timeit.repeat(fn, number=1, repeat=repeat))
    return t


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="32768,262144")
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--p", type=float, default=2.0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    backends = ["python"]
    try:
        kernels.use_backend("cython")
        backends.append("cython")
    except ImportError:
        print("compiled backend not built; timing the fallback only")
    print(f"{'kernel':<16}{'n':>9}" + "".join(f"{b:>12}" for b in backends) + (f"{'speedup':>10}" if len(backends) == 2 else ""))
    for n in (int(s) for s in args.sizes.split(",")):
        u = rng.standard_normal(n)
        u[:: 17] = 0.0
        w = rng.random(n)
        c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        cases = {
            "nonlinear_terms": lambda: kernels.nonlinear_terms(u, args.p),
            "weighted_sumsq": lambda: kernels.weighted_sumsq(w, c),
        }
        for name, fn in cases.items():
            times = []
            ref = None
            for b in backends:
                kernels.use_backend(b)
                out = fn()
                if ref is None:
                    ref = out
                else:
                    np.testing.assert_allclose(np.ravel(out), np.ravel(ref), rtol=1e-12, atol=1e-300)
                times.append(bench(name, fn, args.repeat))
            line = f"{name:<16}{n:>9}" + "".join(f"{t * 1e3:>10.3f}ms" for t in times)
            if len(times) == 2:
                line += f"{times[0] / times[1]:>9.2f}x"
            print(line)


if __name__ == "__main__":
    main()

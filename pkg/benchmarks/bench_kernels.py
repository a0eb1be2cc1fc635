"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Each kernel is run on the same inputs with both backends; the script checks
that the results agree before reporting best-of-N wall times and speedups.
"""
import argparse
import sys
import timeit

import numpy as np

from hardylab import kernels


def _cases(rng):
    s = 10.0 ** rng.uniform(-3, 3, size=1 << 18)
    c = rng.uniform(-1, 1, size=s.size)
    s_nodes = np.concatenate(([0.0], np.geomspace(1e-4, 1e3, 511)))
    t_nodes = np.linspace(0.0, np.pi, 512)
    n = 1 << 14
    u = np.sin(np.linspace(0, np.pi, n)) ** 2
    dr = np.full(n - 1, 1.0 / n)
    w = np.linspace(0.5, 1.5, n - 1)
    k2 = np.linspace(0.1, 2.0, n - 1)
    return {
        "reduced_T (2^18 points, p=3)": lambda m: m.reduced_T(s, c, 3.0),
        "scan_extremum (512x512, p=4)": lambda m: m.scan_extremum(s_nodes, t_nodes, 4.0, 0.0, False),
        "first_below (2^18 points, no hit)": lambda m: m.first_below(s, c, 3.0, 0.0),
        "staggered_energy (2^14 nodes, grad)": lambda m: m.staggered_energy(u, dr, w, k2, 3.0, True),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if a is None or b is None:
        return a is b
    # gradients cancel between neighbouring cells, so compare against the scale
    return np.allclose(a, b, rtol=1e-12, atol=1e-12 * float(np.max(np.abs(a))))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    mods = kernels.backends()
    if "cython" not in mods:
        print("compiled extension not built; only the fallback is available")
    cases = _cases(np.random.default_rng(0))
    width = max(len(k) for k in cases)
    print(f"{'kernel':<{width}}  " + "  ".join(f"{m:>10}" for m in mods) + "   speedup")
    for name, fn in cases.items():
        outs = {m: fn(mod) for m, mod in mods.items()}
        if "cython" in outs and not _same(outs["python"], outs["cython"]):
            print(f"{name}: backends disagree", file=sys.stderr)
            return 1
        times = {m: min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)) for m, mod in mods.items()}
        speed = f"{times['python'] / times['cython']:8.1f}x" if "cython" in times else "       -"
        print(f"{name:<{width}}  " + "  ".join(f"{t * 1e3:8.2f}ms" for t in times.values()) + "  " + speed)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Compare the compiled and numpy atom-pair kernels.

    python benchmarks/bench_kernels.py [--repeat 5] [--sizes 50 200 800]

Times ``combine`` on random symbol pairs for each mode, then a full KAM
run with each backend patched in. Requires the compiled extension.
"""

import argparse
import statistics
import timeit

import numpy as np

from qbnf import _pykernels, kam, symbol
from qbnf.families import builtin_frequencies, default_family, generate_commuting_family
from qbnf.kernels import BRACKET, MEAN, PRODUCT

try:
    from qbnf._ckernels import combine as compiled_combine
except ImportError:
    compiled_combine = None

BACKENDS = {"python": _pykernels.combine}
if compiled_combine is not None:
    BACKENDS["compiled"] = compiled_combine


def random_pair(n, seed=0):
    rng = np.random.default_rng(seed)
    space = symbol.SymbolSpace(builtin_frequencies("golden_2x2"), [[0.5, 0.0], [0.0, 0.5]])

    def one():
        atoms = [(rng.integers(-4, 5, 2), rng.integers(-4, 5, 2), complex(*rng.normal(size=2)))
                 for _ in range(n)]
        return space.from_atoms(atoms)

    F, G = one(), one()
    kF, kG = F.keys, G.keys
    loF, loG = kF.min(axis=0), kG.min(axis=0)
    strides, _ = symbol._strides(kF.max(axis=0) + kG.max(axis=0) - loF - loG + 1)
    cF = np.ascontiguousarray((kF - loF) @ strides)
    cG = np.ascontiguousarray((kG - loG) @ strides)
    return (cF, F.a, F.qf, F.c, cG, G.a, G.qf, G.c), len(F) * len(G)


def best_of(fn, repeat):
    number = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-6)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def bench_combine(sizes, repeat):
    print(f"{'atoms':>6} {'pairs':>8} {'mode':>8} " + " ".join(f"{b:>12}" for b in BACKENDS) + "  speedup")
    for n in sizes:
        args, pairs = random_pair(n)
        for mode, label in ((PRODUCT, "product"), (BRACKET, "bracket"), (MEAN, "mean")):
            t = {b: best_of(lambda f=f: f(*args, 0.7, mode), repeat) for b, f in BACKENDS.items()}
            speed = t["python"] / t["compiled"] if "compiled" in t else float("nan")
            print(f"{n:>6} {pairs:>8} {label:>8} " + " ".join(f"{t[b] * 1e3:>10.3f}ms" for b in BACKENDS)
                  + f"  {speed:6.2f}x")


def bench_run(repeat):
    V, _ = generate_commuting_family(default_family(m=2))
    saved = symbol.kernels.combine
    times = {}
    try:
        for b, f in BACKENDS.items():
            symbol.kernels.combine = f
            times[b] = [timeit.timeit(lambda: kam.run(V, kam.KamConfig()), number=1) for _ in range(repeat)]
    finally:
        symbol.kernels.combine = saved
    for b, ts in times.items():
        print(f"kam.run m=2 {b:>9}: median {statistics.median(ts) * 1e3:8.1f} ms")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", type=int, nargs="+", default=[50, 200, 800])
    args = ap.parse_args()
    if compiled_combine is None:
        print("compiled extension not built; only the numpy kernel is available")
    bench_combine(args.sizes, args.repeat)
    bench_run(args.repeat)


if __name__ == "__main__":
    main()

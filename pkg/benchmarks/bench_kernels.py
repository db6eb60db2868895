"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Both backends are run on identical inputs; the script also checks that their
outputs agree bit for bit before reporting timings.
"""
import argparse
import timeit

import numpy as np

from dfr import kernels


def cases(rng):
    for n, d in ((64, 16), (64, 256), (256, 1000)):
        S = rng.normal(size=(n, d))
        T = rng.normal(size=(n, d)) + 1.0
        yield f"register_adam {n}x{d}, 200 steps", "register_adam", (S, T, T - S, 0.6, 0.1, 0.9, 0.999, 1e-8, 200, 0.0)
    for n in (640, 64_000):
        v = rng.normal(size=n)
        yield f"soft_histogram n={n}, 10 bins", "soft_histogram", (v, float(v.min()), float(v.max()), 10, True)
    F, S, T = (rng.normal(size=(256, 1000)) for _ in range(3))
    yield "l1_registration 256x1000", "l1_registration", (F, S, T, 0.6)


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.asarray(a).tobytes() == np.asarray(b).tobytes()


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = kernels.available_backends()
    print(f"active backend: {kernels.BACKEND}; available: {', '.join(sorted(backends))}")
    if len(backends) < 2:
        print("compiled extension not built; only the numpy fallback can be timed")
    names = sorted(backends)
    print(f"{'case':<38}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) == 2 else ""))
    for label, fn, fargs in cases(np.random.default_rng(0)):
        times, outs = {}, {}
        for name in names:
            f = getattr(backends[name], fn)
            outs[name] = f(*fargs)
            times[name] = min(timeit.repeat(lambda: f(*fargs), number=1, repeat=args.repeat))
        line = f"{label:<38}" + "".join(f"{times[n] * 1e3:>10.2f}ms" for n in names)
        if len(names) == 2:
            line += f"{times['python'] / times['cython']:>11.1f}x"
            if not same(outs["cython"], outs["python"]):
                line += "  MISMATCH"
        print(line)


if __name__ == "__main__":
    main()

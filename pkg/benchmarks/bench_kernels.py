"""Benchmark the compiled readout kernels against the pure-Python fallback.

Both implementations of dead_time_filter and pair_pulses are timed on the
same synthetic click streams, sized like real runs (tens of thousands of
clicks spread over sixteen pixels at microsecond windows).

    python3 benchmarks/bench_kernels.py [--sizes 1000,10000,100000] [--repeats 5]
"""

import argparse
import timeit

import numpy as np

from qgalton import _kernels_py

try:
    from qgalton import _fast_kernels
except ImportError:
    _fast_kernels = None


def click_stream(n, rate_hz=2e6, n_pixels=16, seed=0):
    rng = np.random.default_rng(seed)
    times = np.sort(rng.uniform(0.0, n / rate_hz, n))
    pixels = rng.integers(0, n_pixels, n).astype(np.int64)
    return pixels, times


def pulse_pools(n, seed=1):
    rng = np.random.default_rng(seed)
    trig = np.sort(rng.uniform(0.0, n * 5e-7, n))
    # most triggers have an exact partner, plus ten percent haze
    part = np.sort(np.concatenate([
        trig[rng.random(n) < 0.9],
        rng.uniform(0.0, n * 5e-7, n // 10),
    ]))
    return trig, part


def best_time(fn, repeats):
    return min(timeit.repeat(fn, number=1, repeat=repeats))


def run(sizes, repeats):
    impls = [("python", _kernels_py)]
    if _fast_kernels is not None:
        impls.append(("cython", _fast_kernels))
    else:
        print("compiled backend not importable; timing pure Python only")

    header = f"{'kernel':<18}{'n':>9}" + "".join(
        f"{name + ' (ms)':>15}" for name, _ in impls)
    if len(impls) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))

    for n in sizes:
        pixels, times = click_stream(n)
        row = [best_time(
            lambda m=mod: m.dead_time_filter(pixels, times, 16, 20e-9),
            repeats) for _, mod in impls]
        line = f"{'dead_time_filter':<18}{n:>9}" + "".join(
            f"{t * 1e3:>15.3f}" for t in row)
        if len(row) == 2:
            line += f"{row[0] / row[1]:>9.1f}x"
        print(line)

        trig, part = pulse_pools(n)
        row = [best_time(
            lambda m=mod: m.pair_pulses(trig, part, 1e-11),
            repeats) for _, mod in impls]
        line = f"{'pair_pulses':<18}{n:>9}" + "".join(
            f"{t * 1e3:>15.3f}" for t in row)
        if len(row) == 2:
            line += f"{row[0] / row[1]:>9.1f}x"
        print(line)

    # sanity: the two implementations must agree exactly
    if len(impls) == 2:
        pixels, times = click_stream(20_000)
        a = _kernels_py.dead_time_filter(pixels, times, 16, 20e-9)
        b = _fast_kernels.dead_time_filter(pixels, times, 16, 20e-9)
        trig, part = pulse_pools(20_000)
        c = _kernels_py.pair_pulses(trig, part, 1e-11)
        d = _fast_kernels.pair_pulses(trig, part, 1e-11)
        same = np.array_equal(np.asarray(a), np.asarray(b)) and np.array_equal(
            np.asarray(c), np.asarray(d))
        print(f"\nbackends agree on shared inputs: {same}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1000,10000,100000",
                    help="comma separated stream sizes")
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",") if s]
    run(sizes, args.repeats)


if __name__ == "__main__":
    main()

"""Benchmark the compiled kernels against the pure-numpy fallback.

Runs each hot kernel on representative inputs with both backends and prints
a speedup table. Invoke as ``python3 benchmarks/bench_kernels.py``.
"""

import time

import numpy as np

from deftemp.kernels import available_backends


def _bench(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _conv_inputs(rng, size):
    kernel = (rng.random((48, 48)) < 0.05).astype(np.float64)
    base = (rng.random((size, size)) < 0.02).astype(np.float64)
    return kernel, base


def _edt_inputs(rng, size):
    edges = rng.random((size, size)) < 0.01
    edges[size // 2, size // 2] = True
    return (edges,)


def _energy_inputs(rng, size):
    phi = -np.exp(-rng.random((size, size)) * 5.0)
    tangent = rng.random((size, size)) * np.pi
    n = 512
    xs = rng.uniform(2, size - 3, n)
    ys = rng.uniform(2, size - 3, n)
    tans = rng.uniform(0, np.pi, n)
    return xs, ys, tans, phi, tangent


CASES = [
    ("conv2_full", _conv_inputs, [128, 256]),
    ("edt", _edt_inputs, [128, 256]),
    ("chamfer_energy", _energy_inputs, [256, 512]),
]


def main():
    backends = available_backends()
    if "native" not in backends:
        print("native backend not built; showing python timings only")
    rng = np.random.default_rng(0)
    header = f"{'kernel':<16}{'size':>6}" + "".join(
        f"{name + ' (ms)':>16}" for name in backends) + f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, make_inputs, sizes in CASES:
        for size in sizes:
            args = make_inputs(rng, size)
            times = {}
            for bname, mod in backends.items():
                times[bname] = _bench(getattr(mod, name), *args)
            row = f"{name:<16}{size:>6}" + "".join(
                f"{times[b] * 1e3:>16.2f}" for b in backends)
            if "native" in times and "python" in times:
                row += f"{times['python'] / times['native']:>9.1f}x"
            print(row)


if __name__ == "__main__":
    main()

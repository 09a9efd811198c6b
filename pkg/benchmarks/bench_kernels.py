"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import math
import timeit

import numpy as np

from superfringe import _backend, _pykernels
from superfringe import binning as bn
from superfringe import mcsim as mc

try:
    from superfringe import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    backends = {"python": _pykernels}
    if _kernels is not None:
        backends["cython"] = _kernels
    else:
        print("compiled kernels not built; timing the fallback only")

    z = np.random.default_rng(0).standard_normal(1 << 20)
    mu = np.linspace(-6.0, 6.0, 20_000)
    scheme = bn.MultiScheme(0.5, 3.17, 5)
    config = mc.McConfig(100_000, 1, mc.phase_grid(-math.pi, math.pi, 64))

    cases = {
        "count_hits (2^20 samples, 5 bins)": lambda k: (lambda: k.count_hits(z, 1.3, 0.5, 0.5, 3.17, 2)),
        "interval_mass (20k phases, 5 bins)": lambda k: (lambda: k.interval_mass(mu, 0.5, 3.17, 2)),
        "simulate_scan (64 x 1e5 shots)": lambda k: (lambda: mc.simulate_scan(scheme, 139, config)),
    }
    original = _backend.count_hits
    print(f"{'kernel':40s}" + "".join(f"{name:>12s}" for name in backends) + "     speedup")
    for label, make in cases.items():
        times = {}
        for name, module in backends.items():
            _backend.count_hits = module.count_hits
            try:
                times[name] = best_of(make(module), args.repeat)
            finally:
                _backend.count_hits = original
        row = f"{label:40s}" + "".join(f"{times[n] * 1e3:10.2f}ms" for n in backends)
        if "cython" in times:
            row += f"  {times['python'] / times['cython']:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()

"""Time the compiled kernels against the NumPy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``. Inputs match
the sizes used in a full run: an ONI record of about 900 months with seven
regimes, a 1000-term AR filter and a 900-month simulation horizon.
"""
import argparse
import timeit

import numpy as np

from breachodds import _pykernels as py

try:
    from breachodds import _ckernels as cy
except ImportError:
    cy = None


def cases(seed=0, k=7, T=900, L=1000, H=900):
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(k), size=k)
    init = rng.dirichlet(np.ones(k))
    logdens = rng.normal(-1.0, 1.0, size=(T, k))
    filt, pred, _, _ = py.hamilton_forward(logdens, P, init)
    hist, phi, innov = rng.normal(size=L), rng.normal(0, 0.01, L), rng.normal(size=H)
    cum_init, cum_trans = np.cumsum(init), np.cumsum(P, axis=1)
    u = rng.random(H + 1)
    return {
        "hamilton_forward": lambda m: m.hamilton_forward(logdens, P, init),
        "kim_smoother": lambda m: m.kim_smoother(filt, pred, P),
        "ar_forecast": lambda m: m.ar_forecast(hist, phi, innov),
        "markov_states": lambda m: m.markov_states(cum_init, cum_trans, u),
    }


def best_time(fn, repeat):
    number = 5
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=7)
    args = ap.parse_args()
    print(f"{'kernel':<18}{'python ms':>12}{'cython ms':>12}{'speed-up':>10}")
    for name, call in cases().items():
        t_py = best_time(lambda: call(py), args.repeat)
        if cy is None:
            print(f"{name:<18}{t_py * 1e3:>12.3f}{'n/a':>12}{'':>10}")
            continue
        t_cy = best_time(lambda: call(cy), args.repeat)
        print(f"{name:<18}{t_py * 1e3:>12.3f}{t_cy * 1e3:>12.3f}{t_py / t_cy:>9.1f}x")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure NumPy fallback.

Times the three hot loops on representative workloads:

* ``filter``  -- covariance-estimating filter, bivariate local level, 500 steps
* ``sampler`` -- one forward-filter + backward-sample sweep, 500 steps
* ``tvvar``   -- discounted VAR(5) filter on a 4-series panel, 210 steps

Run:  python benchmarks/bench_backends.py [--repeat 20]
"""

import argparse
import time

import numpy as np

from covdlm._kernels import _pure

try:
    from covdlm._kernels import _fast
except ImportError:
    _fast = None


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def workloads():
    rng = np.random.default_rng(0)

    # bivariate local level
    y2 = rng.standard_normal((500, 2)).cumsum(axis=0)
    f2 = np.eye(2)
    omega2 = np.eye(2)
    m0_2, p0_2, s0_2 = np.zeros(2), 1000.0 * np.eye(2), np.eye(2)

    def filter_case(mod):
        return lambda: mod.filter_run(y2, f2, None, omega2, None,
                                      m0_2, p0_2, s0_2, 1.0, True)

    # one Gibbs sweep: forward filter then backward draw
    sigma = np.array([[2.0, 3.0], [3.0, 5.0]])
    z = rng.standard_normal((501, 2))

    def sweep_case(mod):
        def run():
            m, P, a, R, _, _, _, _ = mod.kalman_run(
                y2, f2, None, omega2, sigma, m0_2, p0_2)
            mod.backward_draw(m, P, a, R, None, z)
        return run

    # discounted VAR(5), 4 series: d = 80
    p, order = 4, 5
    y4 = 100.0 + rng.standard_normal((210, p)).cumsum(axis=0)
    d = p * p * order
    T = 210 - order
    designs = np.empty((T, d, p))
    for i in range(T):
        lags = y4[i : i + order][::-1].ravel()
        designs[i] = np.kron(lags.reshape(-1, 1), np.eye(p))
    m0_4, p0_4, s0_4 = np.zeros(d), 1000.0 * np.eye(d), np.eye(p)

    def tvvar_case(mod):
        return lambda: mod.filter_run(y4[order:], designs, None, None, 0.65,
                                      m0_4, p0_4, s0_4, 1.0, True)

    return [
        ("filter (LL, N=500)", filter_case),
        ("sampler sweep (N=500)", sweep_case),
        ("tvvar(5) p=4 (N=210)", tvvar_case),
    ]


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()

    if _fast is None:
        print("compiled backend not built; run pip install -e . first")

    print(f"{'workload':<24} {'pure':>10} {'compiled':>10} {'speedup':>8}")
    for name, make in workloads():
        t_pure = _time(make(_pure), args.repeat)
        if _fast is not None:
            t_fast = _time(make(_fast), args.repeat)
            print(f"{name:<24} {t_pure * 1e3:>8.2f}ms {t_fast * 1e3:>8.2f}ms "
                  f"{t_pure / t_fast:>7.1f}x")
        else:
            print(f"{name:<24} {t_pure * 1e3:>8.2f}ms {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()

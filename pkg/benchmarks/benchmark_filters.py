"""Compare the compiled filter engine against the pure-NumPy path.

Times bootstrap and bridge filters over a grid of particle counts on a
simulated OU unit and a simulated tumor unit, and reports the speedup.

Usage: python3 benchmarks/benchmark_filters.py [--repeats 20]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from sdemem import bootstrap_filter, bridge_filter, get_model, have_compiled, simulate_dataset
from sdemem.aux_random import PURPOSE_SIM, PURPOSE_TUNE, StreamSpec, init_stream, substream


def _best_of(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _bench_case(label, unit, spec, kappa, phi, xi, kinds, counts, repeats):
    print(f"\n{label} (n_obs={unit.n_obs}, d={spec.d})")
    print(f"{'filter':>10} {'N':>6} {'pure (ms)':>12} {'compiled (ms)':>14} {'speedup':>8}")
    for kind in kinds:
        for n in counts:
            stream = init_stream(
                StreamSpec(unit.n_obs, 1, n, spec.d, init_random=False),
                substream(0, 0, 0, PURPOSE_TUNE),
            )
            run = bootstrap_filter if kind == "bootstrap" else bridge_filter
            args = (unit, spec, kappa, phi, xi, n, stream)

            def pure():
                return run(*args, sort=True, backend="pure")

            def compiled():
                return run(*args, sort=True, backend="compiled")

            ref = pure().loglik
            got = compiled().loglik
            if not np.isclose(ref, got, rtol=1e-9, atol=1e-9):
                raise SystemExit(f"backend mismatch: {ref} vs {got}")
            tp = _best_of(pure, repeats) * 1e3
            tc = _best_of(compiled, repeats) * 1e3
            print(f"{kind:>10} {n:>6} {tp:>12.3f} {tc:>14.3f} {tp / tc:>8.1f}x")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    if not have_compiled():
        raise SystemExit("compiled engine unavailable; build the extension first")

    info = get_model("ou")
    data, truth = simulate_dataset(
        info.spec, eta=(np.array([-0.7, 2.3, -0.9]), np.array([4.0, 10.0, 4.0])),
        xi=(0.3,), n_units=1, n_obs=200, dt=0.05, t0=0.05,
        rng=substream(0, 0, 0, PURPOSE_SIM),
    )
    _bench_case(
        "OU unit", data.units[0], info.spec, truth.kappa, truth.phi[0], truth.xi,
        ("bootstrap", "bridge"), (10, 100, 1000), args.repeats,
    )

    tinfo = get_model("tumor")
    tdata, ttruth = simulate_dataset(
        tinfo.spec, eta=(np.log([0.29, 0.25, 0.09, 0.34]), np.full(4, 10.0)),
        xi=(np.sqrt(0.2),), n_units=1, n_obs=21, dt=1.0, t0=0.0,
        rng=substream(1, 0, 0, PURPOSE_SIM),
    )
    _bench_case(
        "tumor unit", tdata.units[0], tinfo.spec, ttruth.kappa, ttruth.phi[0],
        ttruth.xi, ("bootstrap",), (10, 100, 1000), args.repeats,
    )


if __name__ == "__main__":
    main()

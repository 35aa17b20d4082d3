#!/usr/bin/env python3
"""Benchmark the compiled trial kernel against the pure-Python fallback.

Runs the standard 8-counter Gaussian setup on every available kernel lane,
reports trials/second, and checks that the lanes agree bit for bit.

    python benchmarks/bench_kernel.py --events 200000
"""

import argparse
import time

import numpy as np

from detchain import (Charged, ChargedStopper, DetectorSpec,
                      DiscriminatorSpec, EntranceWindow, GasGain,
                      PulseShaping, SourceSpec, gaussian_packet)
from detchain.experiment import build_trial_params
from detchain.kernel import implementations, run_trials

EDGES = [-8.0, -1.5, -0.8, -0.35, 0.0, 0.35, 0.8, 1.5, 8.0]


def standard_params():
    psi = gaussian_packet(0.0, 1.0, -8.0, 8.0, 4001)
    detectors = [
        DetectorSpec(
            window=EntranceWindow((lo + hi) / 2, hi - lo, i + 1),
            material=ChargedStopper(25.0),
            threshold_energy_ev=1.0e4,
            amplifier=GasGain(25.0, 50.0))
        for i, (lo, hi) in enumerate(zip(EDGES[:-1], EDGES[1:]))
    ]
    source = SourceSpec(psi, Charged(1.0e5, 9.38272088e8, 1))
    shaping = PulseShaping(2.5e13, 5.0e-9, 5.0e-8)
    disc = DiscriminatorSpec(threshold_v=0.2)
    params, _ = build_trial_params(source, detectors, shaping, disc)
    return params


def bench(events: int, seed: int, repeat: int):
    params = standard_params()
    lanes = implementations()
    print(f"lanes: {', '.join(lanes)}   events: {events}   repeats: {repeat}")
    results = {}
    timings = {}
    for name in lanes:
        best = float("inf")
        for _ in range(repeat):
            t0 = time.perf_counter()
            chunk = run_trials(seed, 0, events, params, impl_name=name)
            best = min(best, time.perf_counter() - t0)
        results[name] = chunk
        timings[name] = best
        rate = events / best
        print(f"  {name:8s} {best * 1e3:10.1f} ms   {rate / 1e6:8.3f} M trials/s")
    if len(results) == 2:
        a, b = results["python"], results["cython"]
        same = (np.array_equal(a.counts, b.counts)
                and np.array_equal(a.start_ok, b.start_ok)
                and np.array_equal(a.tallies, b.tallies))
        speedup = timings["python"] / timings["cython"]
        print(f"  speedup: {speedup:.1f}x   bit-identical aggregates: {same}")
        if not same:
            raise SystemExit("lane mismatch: kernels are out of sync")
    print(f"  counts: {results[list(lanes)[-1]].counts.tolist()}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--events", type=int, default=200_000)
    parser.add_argument("--seed", type=int, default=1234)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    bench(args.events, args.seed, args.repeat)


if __name__ == "__main__":
    main()

"""Compare the compiled and pure-Python kernel backends.

Times the force kernel on its own and a full hybrid run for a few system
sizes, and checks that both backends produce the same collision times.

    python benchmarks/bench_backends.py [--repeats 5] [--json results.json]
"""
import argparse
import json
import time

import numpy as np

from annihilation import InteractionLaw, ParticleSystem, StepController, run_hybrid
from annihilation._backend import available_backends
from annihilation.config import random_positions
from annihilation.integrator import kernel_velocity


def best_of(repeats, fn):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def bench_velocity(kernels, n, repeats, calls=2000):
    x, b = random_positions(n, 0)
    system = ParticleSystem(x, b)
    law = InteractionLaw(1.0)

    def work():
        for _ in range(calls):
            kernel_velocity(law, system, kernels=kernels)

    wall, _ = best_of(repeats, work)
    return wall / calls


def bench_run(kernels, n, repeats):
    x, b = random_positions(n, 0)
    law = InteractionLaw(1.0)
    ctrl = StepController()
    wall, run = best_of(repeats, lambda: run_hybrid(law, ParticleSystem(x, b), 100.0, ctrl, kernels=kernels))
    steps = sum(int(seg.step.sum()) for seg in run.segments)
    return wall, steps, [e.tau_hat for e in run.events]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--sizes", default="2,8,32,128")
    parser.add_argument("--json", help="also write results to this file")
    args = parser.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]
    backends = available_backends()
    if "cython" not in backends:
        print("compiled backend not built; only the python backend is timed")

    results = []
    header = f"{'n':>5} {'backend':>8} {'velocity [us]':>14} {'run [s]':>9} {'steps':>7}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        taus = {}
        for name, kernels in sorted(backends.items()):
            per_call = bench_velocity(kernels, n, args.repeats)
            wall, steps, taus[name] = bench_run(kernels, n, args.repeats)
            results.append({"n": n, "backend": name, "velocity_s": per_call, "run_s": wall, "steps": steps})
            print(f"{n:>5} {name:>8} {per_call * 1e6:>14.2f} {wall:>9.4f} {steps:>7}")
        if len(taus) == 2:
            a, b = np.array(taus["cython"]), np.array(taus["python"])
            same = len(a) == len(b) and np.allclose(a, b, rtol=1e-9, atol=0)
            speed = [r for r in results if r["n"] == n]
            ratio = speed[1]["run_s"] / speed[0]["run_s"]
            print(f"{'':>5} speedup x{ratio:.1f}, collision times agree: {same}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()

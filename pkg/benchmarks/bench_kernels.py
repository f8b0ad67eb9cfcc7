"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat R] [--json]

Workloads:
  jumpdest   JUMPDEST analysis over random 24 KiB code blobs
  shadow     random write/read/slice mix on an IntervalMap, the shape of
             shadow-memory traffic from MSTORE, MLOAD and call-data copies
"""

from __future__ import annotations

import argparse
import json
import random
import sys
import timeit

from taintvm.kernels import available_backends


def _jumpdest_workload(mod, blobs):
    def run():
        for code in blobs:
            mod.scan_jumpdests(code)
    return run


def _shadow_workload(mod, ops):
    def run():
        m = mod.IntervalMap()
        for kind, a, b, v in ops:
            if kind == 0:
                m.assign(a, b, v)
            elif kind == 1:
                m.values_in(a, b)
            else:
                m.slice(a, b)
    return run


def build_inputs(seed: int = 7):
    rng = random.Random(seed)
    blobs = [bytes(rng.getrandbits(8) for _ in range(24 * 1024)) for _ in range(4)]
    labels = [None, frozenset({1}), frozenset({2}), frozenset({1, 2})]
    ops = []
    for _ in range(20_000):
        kind = rng.choices((0, 1, 2), weights=(5, 4, 1))[0]
        start = rng.randrange(0, 4096, 32) if rng.random() < 0.8 else rng.randrange(4096)
        length = rng.choice((1, 32, 32, 64, 96, 200))
        ops.append((kind, start, start + length, rng.choice(labels)))
    return blobs, ops


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--json", action="store_true")
    args = parser.parse_args(argv)

    backends = available_backends()
    blobs, ops = build_inputs()
    results = {}
    for name, mod in backends.items():
        results[name] = {
            "jumpdest_ms": min(timeit.repeat(_jumpdest_workload(mod, blobs), number=1,
                                             repeat=args.repeat)) * 1e3,
            "shadow_ms": min(timeit.repeat(_shadow_workload(mod, ops), number=1,
                                           repeat=args.repeat)) * 1e3,
        }
    if "cython" in results:
        py, cy = results["python"], results["cython"]
        results["speedup"] = {k: py[k] / cy[k] for k in py}

    if args.json:
        json.dump(results, sys.stdout, indent=2)
        print()
        return 0
    print(f"{'backend':<10}{'jumpdest ms':>14}{'shadow ms':>12}")
    for name in backends:
        r = results[name]
        print(f"{name:<10}{r['jumpdest_ms']:>14.2f}{r['shadow_ms']:>12.2f}")
    if "speedup" in results:
        s = results["speedup"]
        print(f"{'speedup':<10}{s['jumpdest_ms']:>13.1f}x{s['shadow_ms']:>11.1f}x")
    else:
        print("compiled backend not built; only the Python fallback was timed")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Compare the compiled kernels with the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import random
import timeit

from sleepytob import _kernels_py as pure
from sleepytob import kernels


def workloads(rng: random.Random):
    n, width = 64, 4000
    awake = [bytearray(1 if rng.random() > 0.1 else 0 for _ in range(width)) for _ in range(n)]
    corrupt_at = [rng.randint(0, width * 2) for _ in range(n)]
    last = {}  # each backend consumes its own last_asleep output
    paths = []
    for _ in range(400):
        path, node = [0], 0
        for _ in range(rng.randint(1, 30)):
            node = node * 3 + rng.randint(1, 3)
            path.append(node)
        paths.append(path)
    weights = [rng.randint(1, 5) for _ in paths]
    return {
        "last_asleep": lambda m: m.last_asleep(awake),
        "window_counts": lambda m: m.window_counts(
            last.setdefault(m.__name__, m.last_asleep(awake)), corrupt_at, 8, 20, 20, width - 20),
        "prefix_support": lambda m: m.prefix_support(paths, weights),
    }


def _plain(x):
    if isinstance(x, (list, tuple)):
        return [_plain(y) for y in x]
    if hasattr(x, "typecode"):
        return list(x)
    return x


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    compiled = kernels.compiled()
    if compiled is None:
        print("compiled kernels not built; only the fallback is available")
    print(f"{'kernel':<16}{'python (ms)':>14}{'cython (ms)':>14}{'speedup':>10}")
    for name, fn in workloads(random.Random(0)).items():
        t_py = min(timeit.repeat(lambda: fn(pure), number=1, repeat=args.repeat)) * 1e3
        if compiled is None:
            print(f"{name:<16}{t_py:>14.2f}{'-':>14}{'-':>10}")
            continue
        assert _plain(fn(pure)) == _plain(fn(compiled)), name
        t_c = min(timeit.repeat(lambda: fn(compiled), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<16}{t_py:>14.2f}{t_c:>14.2f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()

"""Time the compiled kernels against the numpy fallback.

Runs each hot loop over a batch of random score matrices and reports the
per-call median for both backends plus the speedup. The compiled module is
imported directly so the comparison works regardless of which backend the
package selected at import time.

Usage: python3 benchmarks/bench_kernels.py [--frames N] [--videos N]
"""

import argparse
import statistics
import time

import numpy as np

from oscloc import _kernels_py

try:
    from oscloc import _kernels_c
except ImportError:
    _kernels_c = None


def _time(fn, inputs, repeats=5):
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        for item in inputs:
            fn(item)
        samples.append((time.perf_counter() - start) / len(inputs))
    return statistics.median(samples)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--frames", type=int, default=2000,
                        help="frames per video (default 2000)")
    parser.add_argument("--videos", type=int, default=50,
                        help="videos per timing batch (default 50)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    scores = [rng.normal(size=(args.frames, 3)) for _ in range(args.videos)]
    labels = [_kernels_py.rule_labels(s, 0.0, 0.1) for s in scores]

    cases = [
        ("rule_labels", lambda m, s: m.rule_labels(s, 0.0, 0.1), scores),
        ("causal_order", lambda m, lab: m.causal_order(lab), labels),
        ("ordered_decode_path",
         lambda m, s: m.ordered_decode_path(np.hstack([s[:, :1], s])),
         scores),
    ]

    print(f"frames={args.frames} videos={args.videos}")
    header = f"{'kernel':<22}{'python':>12}{'compiled':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, call, inputs in cases:
        py = _time(lambda x: call(_kernels_py, x), inputs)
        if _kernels_c is None:
            print(f"{name:<22}{py * 1e3:>10.3f}ms{'n/a':>12}{'n/a':>10}")
            continue
        cy = _time(lambda x: call(_kernels_c, x), inputs)
        for a, b in zip(inputs[:3], inputs[:3]):
            got = np.asarray(call(_kernels_c, a))
            want = np.asarray(call(_kernels_py, b))
            assert np.array_equal(got, want), f"{name}: backends disagree"
        print(f"{name:<22}{py * 1e3:>10.3f}ms{cy * 1e3:>10.3f}ms"
              f"{py / cy:>9.1f}x")
    if _kernels_c is None:
        print("\ncompiled backend unavailable; build it with "
              "`pip install --no-build-isolation -e .`")


if __name__ == "__main__":
    main()

"""Compare the compiled rasterizer against the numpy fallback.

Run: python3 benchmarks/bench_kernels.py [n_renders]
"""

import sys
import time

import numpy as np

from axbench import synthdata as sd
from axbench import zoo


def bench(coverage_image, n: int) -> float:
    stream_styles = [zoo.style_from_seed(s) for s in range(17)]
    segsets = [sd._glyph_segments(d % 10, stream_styles[d % len(stream_styles)])
               for d in range(40)]
    radius = sd._stroke_radius(1.2)
    t0 = time.perf_counter()
    for i in range(n):
        coverage_image(segsets[i % len(segsets)], sd.GLYPH_SIZE, sd.GLYPH_SIZE,
                       radius, 1.0)
    return time.perf_counter() - t0


def main() -> int:
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 3000
    from axbench.kernels import _python
    backends = [("python", _python.coverage_image)]
    try:
        from axbench.kernels import _native
        backends.append(("native", _native.coverage_image))
    except ImportError:
        print("compiled kernel not built; benchmarking the fallback only")

    results = {}
    for name, fn in backends:
        fn(sd._glyph_segments(0, sd.DEFAULT_STYLE), 28, 28, 1.4, 1.0)  # warm up
        dt = bench(fn, n)
        results[name] = dt
        print(f"{name:>7}: {n} renders in {dt:.3f} s "
              f"({1e6 * dt / n:.1f} us/render)")

    if len(backends) == 2:
        a = backends[0][1](sd._glyph_segments(3, sd.DEFAULT_STYLE), 28, 28, 1.4, 1.0)
        b = backends[1][1](sd._glyph_segments(3, sd.DEFAULT_STYLE), 28, 28, 1.4, 1.0)
        print(f"bit-identical outputs: {np.array_equal(a, b)}")
        print(f"speedup: {results['python'] / results['native']:.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())

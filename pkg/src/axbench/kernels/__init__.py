"""Hot rasterization kernels with a compiled core and a numpy fallback.

The compiled extension is preferred when importable; set AXBENCH_KERNELS to
"python" or "native" to force a backend (forcing "native" raises if the
extension is missing). Both backends are bit-identical; see
benchmarks/bench_kernels.py for the speed comparison.
"""

import os

_requested = os.environ.get("AXBENCH_KERNELS", "auto").strip().lower()

if _requested in ("auto", ""):
    try:
        from ._native import coverage_image
        BACKEND = "native"
    except ImportError:
        from ._python import coverage_image
        BACKEND = "python"
elif _requested == "native":
    from ._native import coverage_image
    BACKEND = "native"
elif _requested in ("python", "py"):
    from ._python import coverage_image
    BACKEND = "python"
else:
    raise RuntimeError(
        f"AXBENCH_KERNELS={_requested!r} not understood (use auto|native|python)"
    )

__all__ = ["coverage_image", "BACKEND"]

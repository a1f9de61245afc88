"""Builds the optional compiled rasterizer kernel.

The package works without it (axbench.kernels falls back to the numpy
implementation), so a failed extension build is downgraded to a warning.
"""

import sys

from setuptools import Extension, setup


def extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"axbench: compiled kernels skipped ({exc})", file=sys.stderr)
        return []
    ext = Extension(
        "axbench.kernels._native",
        ["src/axbench/kernels/_native.pyx"],
        include_dirs=[numpy.get_include()],
        # -ffp-contract=off keeps the C arithmetic bit-identical to the
        # numpy fallback (no FMA fusion).
        extra_compile_args=["-O2", "-ffp-contract=off"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions())

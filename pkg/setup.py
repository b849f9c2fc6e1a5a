"""Build script: compiles the optional Cython kernel extension.

The extension is optional -- when Cython or a C compiler is unavailable the
package installs anyway and falls back to the NumPy kernel backend at import
time.  Set LCENGINE_NO_EXT=1 to skip the compiled kernels entirely, e.g. when
benchmarking the fallback.

-ffp-contract=off keeps the compiled kernels bit-identical to the NumPy
backend (no fused multiply-add contraction).
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("LCENGINE_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext = Extension(
            "lcengine.kernels._ckernels",
            sources=["src/lcengine/kernels/_ckernels.pyx"],
            extra_compile_args=["-O3", "-ffp-contract=off"],
            optional=True,
        )
        ext_modules = cythonize([ext], language_level="3")
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)

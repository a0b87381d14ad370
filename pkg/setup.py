"""Build script for the compiled kernel extension.

The package works without the extension (a numpy fallback is selected at
import time), so a missing Cython toolchain only costs speed.
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "genaug._kernels._core",
                sources=["src/genaug/_kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                # -ffp-contract=off keeps float results bit-identical to the
                # numpy fallback (no fused multiply-add).
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)

"""Build script for the optional Cython kernels.

Without Cython (or a C compiler) the package installs with the pure-Python
fallback only.
"""
import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "mecshare.kernels._ckernels",
                ["src/mecshare/kernels/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                # No FMA contraction: results must match the Python backend bit for bit.
                extra_compile_args=["-O2", "-ffp-contract=off"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)

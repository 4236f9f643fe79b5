"""Build hook for the compiled physics kernel.

The Cython extension is optional: if it fails to build (no compiler, no
Cython), the package falls back to the pure-numpy kernel at import time.
"""

import numpy as np
from setuptools import setup, Extension

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "animech.sim._kernel",
                ["src/animech/sim/_kernel.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)

"""Build the optional Cython extension holding the hot assembly kernels.

The package works without the extension (a pure-numpy fallback is selected
at import time); building it is strongly recommended for production runs:

    pip install -e . --no-build-isolation
"""

import os

import numpy
from setuptools import Extension, setup
from Cython.Build import cythonize

PYX = "src/davydov_nh/kernels/_core.pyx"

ext_modules = []
if os.path.exists(PYX):
    ext_modules = cythonize(
        [
            Extension(
                "davydov_nh.kernels._core",
                sources=[PYX],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            ),
        ],
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": "3",
        },
    )

setup(ext_modules=ext_modules)

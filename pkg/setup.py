"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a numpy fallback is selected at
import time); the extension makes training and gradient sweeps roughly an
order of magnitude faster on the small matrices this toolkit works with.
"""

import sys

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None and "--pure" not in sys.argv:
    ext_modules = cythonize(
        [
            Extension(
                "avparse.backend._core",
                ["src/avparse/backend/_core.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)

"""Build script: compiles the optional simplex extension.

The package works without the extension (a NumPy fallback is selected at
import time); build failures are therefore non-fatal.
"""
import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "stladapt._simplex_c",
                sources=["src/stladapt/_simplex_c.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    sys.stderr.write(f"stladapt: skipping compiled simplex kernel ({exc})\n")

setup(ext_modules=ext_modules)

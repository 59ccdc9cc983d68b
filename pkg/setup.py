"""Build script for the optional compiled simplex kernel.

The package works without the extension (a numpy fallback is selected at
import time); building it just makes the solver hot loop faster. Build
in place with:

    python setup.py build_ext --inplace
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "cemio.solver._kernel_c",
                ["src/cemio/solver/_kernel_c.pyx"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)

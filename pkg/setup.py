import os

import numpy
from setuptools import Extension, setup

# The sampling kernel is optional: qcond.eprmc falls back to the pure-Python
# implementation when the compiled module is absent.
try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None and os.path.exists("src/qcond/_ctmc.pyx"):
    ext_modules = cythonize(
        [
            Extension(
                "qcond._ctmc",
                ["src/qcond/_ctmc.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)

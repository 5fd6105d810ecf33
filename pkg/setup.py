"""Build script for the optional compiled kernel core.

The extension accelerates the hot ray/point loops; if it fails to build the
package still installs and falls back to the numpy implementation at import.

    pip install -e . --no-build-isolation
"""

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

ext = Extension(
    "artiscene.kernels._native",
    sources=["src/artiscene/kernels/_native.pyx"],
    include_dirs=[np.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    optional=True,
)

setup(ext_modules=cythonize([ext], language_level="3"))

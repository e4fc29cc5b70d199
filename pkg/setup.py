"""Build the optional compiled kernel.

The package works without the extension (pure-Python kernels are selected at
import time); the build therefore tolerates a missing compiler instead of
failing the whole install.
"""

import sys

from setuptools import Extension, setup


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"skipping compiled kernel build: {exc}", file=sys.stderr)
        return []
    ext = Extension(
        "kinex._ckernels",
        ["src/kinex/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions())

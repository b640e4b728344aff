"""Build script: compiles the optional Cython kernel extension.

The package is fully functional without the extension (a NumPy fallback is
selected at import time), so a failed compile only costs speed.
"""

import sys

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:
    np = None
    cythonize = None


def extension_modules():
    if cythonize is None:
        print("cython/numpy unavailable; building without the compiled kernels",
              file=sys.stderr)
        return []
    ext = Extension(
        "streammap._ckernels",
        ["src/streammap/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(ext_modules=extension_modules())

"""Build script: compiles the skip-gram training kernel when a C toolchain
is available.  Installation succeeds without it; the package then falls back
to the (much slower) NumPy kernel at import time."""

import sys

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:
    np = None
    cythonize = None


def extensions():
    if cythonize is None or np is None:
        return []
    ext = Extension(
        "walk2type.embed._sgns",
        sources=["src/walk2type/embed/_sgns.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
            "nonecheck": False,
            "cdivision": True,
        },
    )


try:
    setup(ext_modules=extensions())
except (SystemExit, Exception):  # noqa: BLE001 - compiler missing or broken
    sys.stderr.write(
        "warning: compiled training kernel unavailable, installing pure-Python "
        "fallback only\n"
    )
    setup(ext_modules=[])

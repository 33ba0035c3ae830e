"""Build the optional Cython kernels.

Set GRIDSHIELD_NO_EXT=1 to skip compilation; the package then runs on the
pure-Python kernels in ``gridshield._kernels_py``.
"""
import os

from setuptools import Extension, setup


def extensions():
    if os.environ.get("GRIDSHIELD_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "gridshield._kernels",
        ["src/gridshield/_kernels.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(ext_modules=extensions())

"""Build the optional compiled kernel core.

The package works without it (``annihilation._kernels_py`` is used instead);
set ``ANNIHILATION_NO_EXT=1`` to skip compilation.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("ANNIHILATION_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "annihilation._kernels",
                    ["src/annihilation/_kernels.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)

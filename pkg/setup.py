"""Build the optional compiled series-evaluation core.

The package is fully functional without the extension (a NumPy fallback is
selected at import time); the extension only accelerates the hot kernel-matrix
assembly loop.
"""
from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "kgflow._kernelcore._gegen",
                ["src/kgflow/_kernelcore/_gegen.pyx"],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)

"""Build script for the optional compiled metric kernels.

The package works without the extension: vid2dialog.evalharness.kernels
falls back to the pure-Python implementation when the compiled module is
missing or fails to build on the host toolchain.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/vid2dialog/evalharness/_kernels.pyx"],
        language_level="3",
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)

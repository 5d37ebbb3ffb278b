"""Build script for the optional compiled kernels.

The package works without the extension (a pure-Python fallback is selected
at import time); building it just makes the event-stream kernels fast.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "qgalton._fast_kernels",
                ["src/qgalton/_fast_kernels.pyx"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=extensions)

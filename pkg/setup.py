"""Build script for the optional compiled kernels.

The package is pure Python apart from one Cython extension holding the
per-vertex geometry kernels (quadric curvature fits).  The extension is
optional: if it fails to build, the package installs anyway and falls back
to the vectorized numpy implementation at import time.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "shrinker._kernels",
                ["src/shrinker/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)

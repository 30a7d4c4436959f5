"""Build script for the optional compiled kernel core.

The package works without the extension (a pure-numpy fallback is selected at
import time), so a failing C build downgrades to a warning instead of aborting
the install.
"""

import sys

import numpy as np
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the Cython core if possible; warn and continue otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - depends on toolchain
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover - depends on toolchain
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            f"WARNING: compiled kernels not built ({exc}); "
            "gridest will use the pure-python fallback",
            file=sys.stderr,
        )


extensions = [
    Extension(
        "gridest._accel._kernels",
        ["src/gridest/_accel/_kernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(extensions, language_level=3)
except ImportError:  # pragma: no cover - Cython is a build requirement
    ext_modules = []

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})

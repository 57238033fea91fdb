"""Builds the optional compiled kernels.

The package is fully functional without the extension: deepblr._native
falls back to the NumPy implementation when the import fails, so a broken
toolchain only costs speed.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"WARNING: compiled kernels not built ({exc}); "
                  f"falling back to the NumPy implementation")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"WARNING: {ext.name} failed to build ({exc}); skipping")


try:
    import os

    import numpy as np
    from Cython.Build import cythonize

    if os.path.exists("src/deepblr/_core.pyx"):
        extensions = cythonize(
            [
                Extension(
                    "deepblr._core",
                    sources=["src/deepblr/_core.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    else:
        extensions = []
except ImportError:
    extensions = []

setup(ext_modules=extensions, cmdclass={"build_ext": OptionalBuildExt})

"""Build script: compiles the optional Cython trial kernel.

The compiled kernel is a pure speed-up; if it cannot be built the package
falls back to the algorithmically identical pure-Python kernel at import
time. The build therefore never hard-fails on a missing compiler.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing or broken toolchain
            warnings.warn(f"building the compiled kernel failed ({exc}); "
                          "detchain will use the pure-Python kernel")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"building {ext.name} failed ({exc}); "
                          "detchain will use the pure-Python kernel")


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "detchain._kernel",
        ["src/detchain/_kernel.pyx"],
        # -ffp-contract=off: the pure-Python kernel must stay bit-identical,
        # so the compiler must not fuse multiply-adds.
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})

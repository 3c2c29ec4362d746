"""Build script.

The compiled kernel extension is optional: if Cython or a C compiler is
missing, the build falls back to a pure-Python install and the package
selects the numpy kernels at import time.
"""

import numpy as np
from setuptools import setup
from setuptools.command.build_ext import build_ext
from setuptools.errors import CCompilerError, ExecError, PlatformError
from setuptools.extension import Extension


class optional_build_ext(build_ext):
    """Never fail the install because the C extension would not compile."""

    def run(self):
        try:
            super().run()
        except (PlatformError, FileNotFoundError) as exc:
            print(f"warning: skipping compiled kernels ({exc})")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except (CCompilerError, ExecError, ValueError) as exc:
            print(f"warning: skipping compiled kernels ({exc})")


def extensions():
    try:
        from Cython.Build import cythonize

        import scipy  # noqa: F401  (cython_blas .pxd needed at build time)
    except ImportError as exc:
        print(f"warning: building without compiled kernels ({exc})")
        return []
    ext = Extension(
        "tscac._kernels._mlp_cy",
        ["src/tscac/_kernels/_mlp_cy.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level="3")


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})

import os

from setuptools import setup

# The compiled kernels are an optional speedup; the package runs on the numpy
# fallback when they are absent. SHIFTSCOPE_PURE_PYTHON=1 skips the build.
ext_modules = []
if os.environ.get("SHIFTSCOPE_PURE_PYTHON") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "shiftscope.kernels._ckern",
                    ["src/shiftscope/kernels/_ckern.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3", "-march=native",
                                        "-ffast-math"],
                    libraries=["mvec", "m"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

ext = Extension(
    "remlab.kernels._ckernels",
    ["src/remlab/kernels/_ckernels.pyx"],
    include_dirs=[numpy.get_include()],
    # keep IEEE semantics identical to the Python fallback
    extra_compile_args=["-O3", "-ffp-contract=off", "-fno-fast-math"],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

setup(ext_modules=cythonize([ext], compiler_directives={"language_level": "3"}))

from setuptools import Extension, setup

import numpy as np
from Cython.Build import cythonize

ext = Extension(
    "protopoint._kernels",
    ["src/protopoint/_kernels.pyx"],
    include_dirs=[np.get_include()],
    extra_compile_args=["-O3", "-fopenmp"],
    extra_link_args=["-fopenmp"],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

setup(ext_modules=cythonize([ext], language_level="3"))

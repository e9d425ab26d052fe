import os

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

# The sampler kernel calls numpy's C distribution functions (standard gamma),
# whose symbols live in the static npyrandom library shipped inside numpy.
_randlib = os.path.join(os.path.dirname(numpy.random.__file__), "lib")

extensions = [
    Extension(
        "mfm._kernel",
        ["src/mfm/_kernel.pyx"],
        include_dirs=[numpy.get_include()],
        library_dirs=[_randlib],
        libraries=["npyrandom"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}))

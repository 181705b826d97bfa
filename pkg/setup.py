import os

import numpy
from setuptools import setup
from setuptools.extension import Extension

ext_modules = []
if os.environ.get("GMHP_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:  # no Cython: the pure-Python core is used
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [Extension(
                "gmhp._core",
                sources=["src/gmhp/_core.pyx"],
                include_dirs=[numpy.get_include()],
                language="c++",
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )],
            compiler_directives={"language_level": 3},
        )

setup(ext_modules=ext_modules)

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    # Pure-Python install still works; scorelab falls back to the numpy
    # kernels at import time.
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "scorelab._core",
                ["src/scorelab/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

ext_modules = [
    Extension(
        "lsevo._kernels._compiled",
        ["src/lsevo/_kernels/_compiled.pyx"],
        include_dirs=[numpy.get_include()],
    ),
]

setup(
    ext_modules=cythonize(ext_modules, compiler_directives={"language_level": 3}),
)

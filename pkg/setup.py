from setuptools import Extension, setup

# The compiled recurrent-scan kernels are optional: if Cython (or a C
# compiler) is unavailable the package installs anyway and falls back to
# the pure-numpy kernels in grounder.kernels._pure.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("grounder.kernels._fast", ["src/grounder/kernels/_fast.pyx"])],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    ext_modules = None

setup(ext_modules=ext_modules)

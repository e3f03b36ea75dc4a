"""Build script: compiles the optional Cython matcher kernel.

The package is fully functional without the extension; kgmill.matcher
falls back to a numpy implementation when the compiled kernel is absent.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "kgmill.matcher._ckernels",
                ["src/kgmill/matcher/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)

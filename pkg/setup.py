"""Build the optional Cython kernels; the package falls back to numpy if this fails."""
import os

import numpy as np
from setuptools import setup, Extension

ext_modules = []
if not os.environ.get("QDEMON_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "qdemon._ckernels",
                    ["src/qdemon/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)

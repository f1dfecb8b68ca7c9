"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure NumPy backend is selected
at import time); building it just makes the per-step filter and sampler
loops much faster.
"""

import os

from setuptools import Extension, setup

PYX = "src/covdlm/_kernels/_fast.pyx"

ext_modules = []
if os.path.exists(PYX):
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext = Extension(
            "covdlm._kernels._fast",
            [PYX],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext.optional = True
        ext_modules = cythonize([ext], language_level="3")

setup(ext_modules=ext_modules)

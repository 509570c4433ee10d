import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# OCKM_PORTABLE=1 drops -march=native for redistributable builds
_arch = [] if os.environ.get("OCKM_PORTABLE") else ["-march=native"]

extensions = [
    Extension(
        "ockm._kernels._ext",
        ["src/ockm/_kernels/_ext.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # no FMA contraction: keeps results bit-identical to the numpy fallback
        extra_compile_args=["-O3", *_arch, "-fopenmp", "-ffp-contract=off"],
        extra_link_args=["-fopenmp"],
    )
]

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}),
)

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "lumisplat.raster._blend_cy",
        ["src/lumisplat/raster/_blend_cy.pyx"],
        include_dirs=[np.get_include()],
        # no FMA contraction: per-op rounding must match the numpy backends
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}))

"""Build hook for the optional compiled kernels.

The package is pure Python plus one Cython extension holding the per-frame
hot loops (threshold rule, ordering DP, decoding DP). The extension is
optional: if Cython or a C compiler is unavailable the install still
succeeds and the package falls back to the numpy implementations.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "oscloc._kernels_c",
                ["src/oscloc/_kernels_c.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        language_level="3",
    )
else:
    extensions = []

setup(ext_modules=extensions)

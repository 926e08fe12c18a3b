"""Build the optional compiled kernels.

The package works without them: ``repdel.kernels`` falls back to the
pure-Python implementation when ``repdel._ckernels`` cannot be imported.
Set ``REPDEL_NO_EXT=1`` to skip the extension build entirely.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("REPDEL_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:  # pragma: no cover - build without Cython
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "repdel._ckernels",
                    ["src/repdel/_ckernels.pyx"],
                    # no -ffast-math: results must match the Python fallback bit for bit
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)

"""Build script for the compiled solver core.

The package works without the extension (a pure NumPy twin of the kernels is
selected at import time), so a failed compile degrades to a slower install
instead of a broken one.
"""

import sys

from setuptools import Extension, setup


def extension_modules():
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("platoon-offload: Cython unavailable, installing pure-Python only",
              file=sys.stderr)
        return []
    ext = Extension(
        "platoon_offload._ccore",
        ["src/platoon_offload/_ccore.pyx"],
        extra_compile_args=["-O2"],
    )
    try:
        return cythonize(
            [ext],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "initializedcheck": False,
            },
        )
    except Exception as exc:  # compile trouble: fall back to pure Python
        print(f"platoon-offload: extension build skipped ({exc})", file=sys.stderr)
        return []


setup(ext_modules=extension_modules())

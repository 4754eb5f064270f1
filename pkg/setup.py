"""Build script: compiles the optional motion kernel extension.

The package works without the extension (a pure-Python fallback is selected
at import time), so a failed compile only costs speed, not functionality.
"""

import sys

from setuptools import setup


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension(
        "railbot._motionkernel",
        ["src/railbot/_motionkernel.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # bit-identical to the pure-Python kernel, so the backend choice
        # cannot change a run: no fused multiply-add, and no sincos()
        # fusion (CPython calls sin and cos separately)
        extra_compile_args=["-ffp-contract=off", "-fno-builtin-sin",
                            "-fno-builtin-cos"],
    )
    try:
        return cythonize([ext], language_level=3)
    except Exception as exc:  # pragma: no cover
        print(f"skipping compiled kernel ({exc})", file=sys.stderr)
        return []


setup(ext_modules=_extensions())

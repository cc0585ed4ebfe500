"""Build script: compiles the optional native kernel extension.

The package works without the extension (a pure-Python fallback is selected
at import time), so any Cython or compiler failure degrades to a pure build
instead of aborting the install. Set FORMLEN_SKIP_NATIVE=1 to force a pure
build.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("FORMLEN_SKIP_NATIVE") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("formlen._native", ["src/formlen/_native.pyx"])],
            language_level="3",
        )
    except Exception as exc:  # pragma: no cover - depends on build host
        print(f"formlen: native kernels disabled ({exc}); using pure-Python fallback")
        ext_modules = []

setup(ext_modules=ext_modules)

"""Kernel backend selection.

The compiled extension (formlen._native) is preferred when importable;
otherwise the pure-Python twin takes over. Both produce bit-identical
results, so selection only affects speed. Set FORMLEN_PURE=1 to force the
fallback (used by the benchmark and the parity tests).
"""

from __future__ import annotations

import os

from . import _pure

_native = None
if os.environ.get("FORMLEN_PURE") != "1":
    try:
        from . import _native as _native_mod

        _native = _native_mod
    except ImportError:
        _native = None

_impl = _native if _native is not None else _pure


def backend_name() -> str:
    return "native" if _impl is not _pure else "pure"


def native_module():
    """The compiled module, or None when unavailable or disabled."""
    return _native


def rollout_kernel(*args):
    return _impl.rollout_kernel(*args)


def repeated_substring_len(text: str) -> int:
    return _impl.repeated_substring_len(text)

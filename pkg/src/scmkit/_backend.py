"""Selects the SCM loop implementation.

The compiled core is used when it imports and the stack has a compiled
form; ``SCMKIT_BACKEND=python`` forces the fallback.
"""

from __future__ import annotations

import os

from . import _pykernels

try:
    from . import _kernels as _ckernels
except ImportError:  # extension not built
    _ckernels = None

HAVE_COMPILED = _ckernels is not None


def default_name() -> str:
    env = os.environ.get("SCMKIT_BACKEND", "").strip().lower()
    if env in ("python", "compiled"):
        return env
    return "compiled" if HAVE_COMPILED else "python"


def select(name: str | None, stack=None):
    name = default_name() if name is None else name
    if name == "python":
        return _pykernels
    if name != "compiled":
        raise ValueError(f"unknown backend {name!r}")
    if not HAVE_COMPILED:
        raise ImportError("compiled backend requested but scmkit._kernels is not built")
    if stack is not None and not stack.compiled:
        return _pykernels
    return _ckernels

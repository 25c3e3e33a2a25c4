"""Select the compiled core or the numpy fallback.

The compiled extension is used when it imports; setting the environment
variable ``BLOCKRBF_PURE_PYTHON=1`` forces the fallback. Callers look up
``_backend.impl`` at call time so :func:`set_backend` takes effect everywhere.
"""
from __future__ import annotations

import contextlib
import os

from . import _fallback

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

impl = _fallback if (_core is None or os.environ.get("BLOCKRBF_PURE_PYTHON")) else _core


def name() -> str:
    return "compiled" if impl is _core else "python"


def compiled_available() -> bool:
    return _core is not None


def set_backend(which: str):
    global impl
    if which == "compiled":
        if _core is None:
            raise RuntimeError("compiled core is not built; run `pip install -e .`")
        impl = _core
    elif which == "python":
        impl = _fallback
    else:
        raise ValueError(f"unknown backend {which!r}")


@contextlib.contextmanager
def use_backend(which: str):
    global impl
    saved = impl
    set_backend(which)
    try:
        yield
    finally:
        impl = saved

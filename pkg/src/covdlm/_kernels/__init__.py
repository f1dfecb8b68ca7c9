"""Kernel backend selection.

The hot per-step loops (filtering, forward filtering for the sampler,
backward sampling) exist twice: a Cython extension (``_fast``) and a pure
NumPy fallback (``_pure``).  The compiled one is used when importable;
set ``COVDLM_PURE=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _pure

STATUS_OK = _pure.STATUS_OK
STATUS_NONFINITE = _pure.STATUS_NONFINITE
STATUS_NOT_PSD = _pure.STATUS_NOT_PSD
STATUS_SINGULAR = _pure.STATUS_SINGULAR

_backend = _pure
_backend_name = "pure"

if not os.environ.get("COVDLM_PURE"):
    try:
        from . import _fast  # type: ignore[attr-defined]

        _backend = _fast
        _backend_name = "compiled"
    except ImportError:
        pass


def backend():
    """The active kernel module."""
    return _backend


def backend_name() -> str:
    """'compiled' when the extension loaded, else 'pure'."""
    return _backend_name

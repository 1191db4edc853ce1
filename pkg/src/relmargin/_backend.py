"""Kernel backend selection.

The compiled Cython extension is used when it imports; otherwise (or when
``RELMARGIN_PURE_PYTHON`` is set to a non-empty value other than ``0``) the
numpy implementation in ``_pykernels`` takes over with the same API.
"""

import logging
import os

from relmargin import _pykernels

log = logging.getLogger(__name__)


def _load_compiled():
    try:
        from relmargin import _kernels
    except ImportError:
        return None
    return _kernels


def available():
    """Names of the backends importable in this environment."""
    names = ["python"]
    if _load_compiled() is not None:
        names.insert(0, "cython")
    return names


def get(name):
    """Return the kernel module called ``name`` ("cython" or "python")."""
    if name == "python":
        return _pykernels
    if name == "cython":
        mod = _load_compiled()
        if mod is None:
            raise ImportError("compiled relmargin._kernels extension is not built")
        return mod
    raise ValueError(f"unknown backend {name!r}")


if os.environ.get("RELMARGIN_PURE_PYTHON", "") not in ("", "0"):
    kernels, NAME = _pykernels, "python"
else:
    _compiled = _load_compiled()
    if _compiled is None:
        log.debug("compiled kernels unavailable, using numpy fallback")
        kernels, NAME = _pykernels, "python"
    else:
        kernels, NAME = _compiled, "cython"

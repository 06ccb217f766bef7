"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy reference
implementation is the fallback.  Set AVPARSE_BACKEND=python or =compiled to
force one side (forcing the compiled backend raises if it was not built).
Both backends expose the same three entry points and agree numerically; the
active choice is recorded in every run manifest.
"""

from __future__ import annotations

import os

from .layout import NetDims, block_specs, offsets, total_params, views  # noqa: F401
from . import pure

_forced = os.environ.get("AVPARSE_BACKEND", "")
if _forced not in ("", "python", "compiled"):
    raise ValueError(f"AVPARSE_BACKEND must be 'python' or 'compiled', got {_forced!r}")

if _forced == "python":
    _impl, BACKEND = pure, "python"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        if _forced == "compiled":
            raise
        _impl, BACKEND = pure, "python"

forward = _impl.forward
loss_value = _impl.loss_value
loss_grad = _impl.loss_grad


def active_backend() -> str:
    return BACKEND

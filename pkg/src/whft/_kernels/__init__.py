"""Kernel backend selection.

The compiled extension is preferred; the pure-Python fallback is used
when the extension is missing or when the environment variable
WHFT_PURE=1 forces it (useful for debugging and benchmarking).
"""

from __future__ import annotations

import os

from . import pyfallback

if os.environ.get("WHFT_PURE") == "1":
    _impl = pyfallback
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = pyfallback

BACKEND: str = _impl.BACKEND
simulate_batch = _impl.simulate_batch
cost_scan = _impl.cost_scan

__all__ = ["BACKEND", "simulate_batch", "cost_scan", "pyfallback"]

"""Kernel backend selection.

The compiled extension (streammap._ckernels) is used when importable;
otherwise the NumPy fallback. Set STREAMMAP_PURE=1 to force the fallback.
Both backends share signatures and accept/stop semantics; floating-point
results may differ in the last bits, so cross-backend comparisons belong
in tests, not in frame golden files.
"""

from __future__ import annotations

import os

from streammap import _pykernels

if os.environ.get("STREAMMAP_PURE", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from streammap import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _pykernels

BACKEND: str = _impl.BACKEND
smacof = _impl.smacof
stress_value = _impl.stress_value
first_free = _impl.first_free

__all__ = ["BACKEND", "smacof", "stress_value", "first_free"]

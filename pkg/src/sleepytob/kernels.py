"""Hot-loop kernels, compiled when the extension is built.

``BACKEND`` names the implementation picked at import time. Setting
``SLEEPYTOB_PURE=1`` forces the pure-Python fallback.
"""

import os

from . import _kernels_py as pure

if os.environ.get("SLEEPYTOB_PURE"):
    _impl = pure
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = pure
        BACKEND = "python"

prefix_support = _impl.prefix_support
last_asleep = _impl.last_asleep
window_counts = _impl.window_counts


def compiled():
    """Return the compiled module, or None if it was not built."""
    try:
        from . import _ckernels  # type: ignore[attr-defined]
    except ImportError:
        return None
    return _ckernels

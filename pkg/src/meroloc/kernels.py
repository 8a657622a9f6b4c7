"""Kernel backend selection.

The compiled extension is preferred when importable; setting the
environment variable MEROLOC_PURE_PYTHON=1 forces the numpy fallback.
`BACKEND` records which implementation is active.
"""

import os

if os.environ.get("MEROLOC_PURE_PYTHON", "0").lower() not in ("0", "", "false"):
    from . import _kernels_py as _impl

    BACKEND = "pure-python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as _impl  # type: ignore[no-redef]

        BACKEND = "pure-python"

faddeeva_w = _impl.faddeeva_w
panel_moment_sums = _impl.panel_moment_sums

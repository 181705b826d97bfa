"""Select the compiled core when it is importable, else the Python twin.

Set ``GMHP_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pycore

if os.environ.get("GMHP_PURE_PYTHON") == "1":
    core = _pycore
else:
    try:
        from . import _core as core
    except ImportError:  # extension not built
        core = _pycore

COMPILED = core is not _pycore
NAME = "cython" if COMPILED else "python"

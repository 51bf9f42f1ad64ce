"""Backend selection for the pair-interaction kernel.

The compiled extension is used when it imports; setting the environment
variable ``FOCUSNLS_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os

from . import _pairkernel_py

BACKEND = "python"
apply_pair = _pairkernel_py.apply_pair

if not os.environ.get("FOCUSNLS_PURE_PYTHON"):
    try:
        from ._pairkernel import apply_pair  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass

"""Backend selection for the atom-pair kernels.

The compiled extension is preferred. Set ``QBNF_KERNEL=python`` to force the
numpy implementation.
"""

import os

from . import _pykernels
from ._pykernels import BRACKET, MEAN, PRODUCT, pair_factor, sinc

_forced = os.environ.get("QBNF_KERNEL", "").lower()

if _forced == "python":
    combine = _pykernels.combine
    BACKEND = "python"
else:
    try:
        from ._ckernels import combine
        BACKEND = "compiled"
    except ImportError:
        if _forced == "compiled":
            raise
        combine = _pykernels.combine
        BACKEND = "python"

__all__ = ["BACKEND", "BRACKET", "MEAN", "PRODUCT", "combine", "pair_factor", "sinc"]

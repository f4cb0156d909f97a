"""Kernel backend selection.

Prefers the compiled extension (`trunklm.kernels._fused`) and falls back to
the NumPy reference implementation when the extension is absent. Set
TRUNKLM_KERNELS=python to force the fallback, TRUNKLM_KERNELS=compiled to
require the extension.
"""

import os

from . import reference

_requested = os.environ.get("TRUNKLM_KERNELS", "auto").lower()

if _requested in ("python", "ref", "reference"):
    _impl = reference
    BACKEND = "python"
else:
    try:
        from . import _fused as _impl

        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = reference
        BACKEND = "python"

gelu_forward = _impl.gelu_forward
gelu_backward = _impl.gelu_backward
softmax_rows = _impl.softmax_rows
layernorm_forward = _impl.layernorm_forward
layernorm_backward = _impl.layernorm_backward
adam_update = _impl.adam_update

KERNEL_NAMES = (
    "gelu_forward",
    "gelu_backward",
    "softmax_rows",
    "layernorm_forward",
    "layernorm_backward",
    "adam_update",
)


def available_backends() -> list[str]:
    out = ["python"]
    try:
        from . import _fused  # noqa: F401

        out.append("compiled")
    except ImportError:
        pass
    return out

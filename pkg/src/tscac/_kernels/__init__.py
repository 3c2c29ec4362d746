"""Kernel backend selection.

The compiled Cython kernels are used when the extension built; otherwise the
numpy reference implementation takes over. ``TSCAC_KERNELS`` forces a choice:
``c`` (fail if unavailable), ``py``, or ``auto`` (default).

Both backends implement the same contract and agree to float rounding;
training trajectories are bit-reproducible within a backend, not across
backends.
"""

import os

from . import _mlp_np

_requested = os.environ.get("TSCAC_KERNELS", "auto").lower()
if _requested not in ("auto", "c", "py"):
    raise ValueError(f"TSCAC_KERNELS must be auto, c, or py, got {_requested!r}")

_impl = None
if _requested in ("auto", "c"):
    try:
        from . import _mlp_cy as _impl

        BACKEND = "c"
    except ImportError:
        if _requested == "c":
            raise
        _impl = None
if _impl is None:
    _impl = _mlp_np
    BACKEND = "py"

ACT_TANH = _mlp_np.ACT_TANH
ACT_RELU = _mlp_np.ACT_RELU
n_params = _impl.n_params
mlp_forward = _impl.mlp_forward
mlp_vjp = _impl.mlp_vjp

"""Backend selection for the assembly hot loop.

The compiled Cython module is preferred when it imported cleanly; the NumPy
fallback is always available.  ``CMCLAB_KERNELS=python`` (or ``cython``)
forces a backend, which the benchmark uses to compare the two.
"""

from __future__ import annotations

import os

from . import _kernels_ref

_forced = os.environ.get("CMCLAB_KERNELS", "").strip().lower()

if _forced in ("python", "ref", "numpy"):
    _impl = _kernels_ref
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        if _forced == "cython":
            raise ImportError(
                "CMCLAB_KERNELS=cython requested but cmclab._kernels did not build"
            ) from None
        _impl = _kernels_ref
        BACKEND = "python"

element_gradients = _impl.element_gradients
cmc_element_arrays = _impl.cmc_element_arrays


def backend_name() -> str:
    return BACKEND

"""NumPy fallback for the per-element assembly kernels.

Same contract as the compiled module ``cmclab._kernels``: given P1 geometry
arrays (node triples, basis coefficients b, c with grad(phi_a) =
(b_a, c_a)/(2A), and areas), produce per-element residual rows, 3x3 Jacobian
blocks, and squared gradient magnitudes.  Scatter to global vectors/matrices
happens in the caller so both backends share one deterministic reduction.
"""

from __future__ import annotations

import numpy as np


def element_gradients(tri, b, c, areas, values):
    """Per-element constant gradient of a P1 field, shape (m, 2)."""
    v = values[tri]
    inv2a = 0.5 / areas
    gx = np.sum(v * b, axis=1) * inv2a
    gy = np.sum(v * c, axis=1) * inv2a
    return np.stack([gx, gy], axis=1)


def cmc_element_arrays(tri, b, c, areas, values, t, H):
    """Residual rows (m,3), Jacobian blocks (m,3,3), |Dv|^2 (m,) for the flux
    Dv / sqrt(1 - t^2 |Dv|^2) with load 2H.  Caller must have verified the
    spacelike constraint t^2 |Dv|^2 < 1 on every element.
    """
    v = values[tri]
    inv2a = 0.5 / areas
    gx = np.sum(v * b, axis=1) * inv2a
    gy = np.sum(v * c, axis=1) * inv2a
    gsq = gx * gx + gy * gy
    w = 1.0 / np.sqrt(1.0 - t * t * gsq)
    w3 = t * t * w * w * w
    fx, fy = w * gx, w * gy

    relem = 0.5 * (fx[:, None] * b + fy[:, None] * c) + (2.0 * H / 3.0) * areas[:, None]

    mxx = w + w3 * gx * gx
    mxy = w3 * gx * gy
    myy = w + w3 * gy * gy
    inv4a = 0.25 / areas
    jelem = inv4a[:, None, None] * (
        mxx[:, None, None] * b[:, :, None] * b[:, None, :]
        + mxy[:, None, None] * (b[:, :, None] * c[:, None, :] + c[:, :, None] * b[:, None, :])
        + myy[:, None, None] * c[:, :, None] * c[:, None, :]
    )
    return relem, jelem, gsq

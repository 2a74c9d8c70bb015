"""Closed-form reference solutions used as ground truth everywhere else.

The radial family on a disc of radius R solves

    div( Dv / sqrt(1 - t^2 |Dv|^2) ) = 2H,   v = 0 on r = R,

with the scaled function u_t = t * v_t solving the same equation with right
side 2tH and unscaled flux.  At t = 1 the graph of u is the hyperbolic cap
sqrt(x^2 + y^2 + 1/H^2) - sqrt(R^2 + 1/H^2); at t = 0 the family degenerates
to the Poisson problem with the paraboloid solution H (r^2 - R^2) / 2.

The t in (0, 1) closed form is derived by radial reduction and must pass
:func:`radial_cap_residual` before being trusted; the test suite gates on it.
"""

from __future__ import annotations

import math

import numpy as np


def poisson_disc(R: float, H: float, r):
    """Paraboloid solving the t=0 problem: value H(r^2-R^2)/2, slope H r."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r > R):
        raise ValueError(f"radius outside [0, {R}]")
    return H * (r * r - R * R) / 2.0, H * r


def radial_cap(R: float, H: float, t: float, r):
    """Radial homotopy solution (value, radial slope) at radius r.

    Returns v_t(r) = (sqrt(1 + t^2 H^2 r^2) - sqrt(1 + t^2 H^2 R^2)) / (t^2 H)
    and v_t'(r) = H r / sqrt(1 + t^2 H^2 r^2).  At t = 0 delegates to
    :func:`poisson_disc`.  The spacelike margin t |v_t'| < 1 holds for all r
    by construction.
    """
    if H <= 0:
        raise ValueError("H must be positive")
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if t == 0.0:
        return poisson_disc(R, H, r)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r > R):
        raise ValueError(f"radius outside [0, {R}]")
    th = t * H
    value = (np.sqrt(1.0 + th * th * r * r) - math.sqrt(1.0 + th * th * R * R)) / (
        t * t * H
    )
    slope = H * r / np.sqrt(1.0 + th * th * r * r)
    return value, slope


def cap_minimum(R: float, H: float, t: float = 1.0) -> float:
    """Center value of the radial solution (its unique minimum)."""
    v, _ = radial_cap(R, H, t, 0.0)
    return float(v)


def radial_cap_on_mesh(mesh, R: float, H: float, t: float) -> np.ndarray:
    """Nodal interpolant of the radial solution on a disc mesh."""
    r = np.linalg.norm(mesh.nodes, axis=1)
    v, _ = radial_cap(R, H, t, np.minimum(r, R))
    return v


def radial_cap_residual(R: float, H: float, t: float, radii) -> np.ndarray:
    """|div(Dv / sqrt(1 - t^2 |Dv|^2)) - 2H| for the closed form, by exact
    symbolic differentiation (no finite-difference error, roundoff only).

    This is the gate that validates the derived t in (0,1) formula before it
    is used as an oracle.
    """
    import sympy as sp

    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 0):
        raise ValueError("residual check needs radii in (0, R]")
    r = sp.Symbol("r", positive=True)
    Rs, Hs, ts = sp.Float(R), sp.Float(H), sp.Float(t)
    if t == 0.0:
        v = Hs * (r * r - Rs * Rs) / 2
    else:
        v = (sp.sqrt(1 + ts**2 * Hs**2 * r**2) - sp.sqrt(1 + ts**2 * Hs**2 * Rs**2)) / (
            ts**2 * Hs
        )
    vp = sp.diff(v, r)
    flux = vp / sp.sqrt(1 - ts**2 * vp**2)
    resid = sp.diff(flux, r) + flux / r - 2 * Hs
    f = sp.lambdify(r, resid, "numpy")
    return np.abs(np.asarray(f(radii), dtype=float))


def validate_cap_family(R_list=(1.0, 2.0), H_list=(0.5, 1.0, 2.0),
                        t_list=(0.25, 0.5, 1.0), n_radii: int = 100) -> float:
    """Max residual of the radial family over a parameter grid (oracle gate)."""
    worst = 0.0
    for R in R_list:
        radii = np.linspace(R / n_radii, R, n_radii)
        for H in H_list:
            for t in t_list:
                worst = max(worst, float(radial_cap_residual(R, H, t, radii).max()))
    return worst


def hyperbolic_cylinder(r: float, axis, offset: float, points, center=(0.0, 0.0)):
    """Upper sheet of a hyperbolic cylinder as an entire graph.

    v(x, y) = sqrt(r^2 + d^2) + offset, with d the signed distance of (x, y)
    from the line through ``center`` along the unit vector ``axis``.  As a
    graph it has constant mean curvature 1/(2r) (future-oriented convention)
    and Gaussian curvature 0.
    """
    if r <= 0:
        raise ValueError("cylinder radius must be positive")
    axis = np.asarray(axis, dtype=float)
    if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
        raise ValueError("axis must be a unit vector")
    pts = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(center, float)
    d = pts[:, 0] * axis[1] - pts[:, 1] * axis[0]
    out = np.sqrt(r * r + d * d) + offset
    return out if out.size > 1 else float(out[0])


def harmonic_leading(n: int, lam: complex, points):
    """Re(lambda * (x + i y)^n), the leading harmonic normal form."""
    if n < 1:
        raise ValueError("degree must be >= 1")
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    z = pts[:, 0] + 1j * pts[:, 1]
    out = np.real(lam * z**n)
    return out if out.size > 1 else float(out[0])

"""Mesh-error calibration against the exactly solvable disc.

The unit disc with H = 1 has the closed-form radial solution, so one solve
at a given h measures every recovery error this package relies on.  Checks
whose continuum statements are exact (maximum principles, sharp bounds)
take their discrete slack from here instead of hard-coded numbers: the
verification tolerance is a small multiple of the observed calibration
error at the same h.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import fields, oracles, pfunction
from .domain import build_domain
from .mesh import triangulate
from .solver import newton_solve

#: multiplier turning an observed calibration error into a check tolerance
TOL_FACTOR = 3.0


@dataclass(frozen=True)
class Calibration:
    h: float
    u_err: float           # L_inf nodal solution error
    grad_err: float        # L_inf recovered node-gradient error (quadratic fit)
    un_err: float          # boundary u_n error of the flux recovery
    q2_err: float          # error of the measured boundary |Du|^2
    phi_range: float       # range of Phi(x;1), exactly constant in the continuum
    hess_err: float        # Hessian recovery error at the critical point


@lru_cache(maxsize=32)
def calibrate(
    h: float, H: float = 1.0, R: float = 1.0, newton_tol: float = 1e-10
) -> Calibration:
    """Solve the reference disc (radius R, curvature H) at mesh size h and
    measure all recovery errors against the closed form.

    Matching H (and R for disc runs) to the problem under verification keeps
    the calibration at the same graph steepness, which is what controls the
    error constants near the spacelike limit.
    """
    disc = build_domain("disc", [R])
    mesh = triangulate(disc, h)
    from .solver import SolverOptions

    sol = newton_solve(mesh, 1.0, H, opts=SolverOptions(newton_tol=newton_tol))

    r = np.linalg.norm(mesh.nodes, axis=1)
    exact = oracles.radial_cap_on_mesh(mesh, R, H, 1.0)
    u_err = float(np.abs(sol.values - exact).max())

    _, slope = oracles.radial_cap(R, H, 1.0, np.minimum(r, R))
    gexact = np.zeros((mesh.n_nodes, 2))
    nz = r > 1e-14
    gexact[nz] = (slope[nz] / r[nz])[:, None] * mesh.nodes[nz]
    fit = fields.graph_fit(sol)
    grad_err = float(np.linalg.norm(fit.grad - gexact, axis=1).max())

    un = fields.boundary_normal_slope(sol)
    un_exact = H * R / np.sqrt(1.0 + H * H * R * R)
    un_err = float(np.abs(un - un_exact).max())
    q2_err = float(np.abs(un * un - un_exact * un_exact).max())

    phi = pfunction.phi_field(sol, 1.0)
    ci = np.argmin(r)
    hess_err = float(
        max(
            np.abs(fit.uxx[ci] - H), np.abs(fit.uyy[ci] - H), np.abs(fit.uxy[ci])
        )
    )
    return Calibration(
        h=float(h), u_err=u_err, grad_err=grad_err, un_err=un_err,
        q2_err=q2_err, phi_range=phi.range, hess_err=hess_err,
    )


@dataclass(frozen=True)
class Tolerances:
    """Default check tolerances derived from a calibration run."""

    q2: float              # for |Du|^2-level assertions
    height: float          # for u_min-level assertions
    phi: float             # for Phi extremum principles and constancy
    un: float              # for boundary normal-derivative identities
    equality: float        # stricter band deciding the circle-equality flags


def default_tolerances(cal: Calibration) -> Tolerances:
    return Tolerances(
        q2=max(TOL_FACTOR * cal.q2_err, 1e-4),
        height=max(TOL_FACTOR * cal.u_err, 1e-6),
        phi=max(5.0 * cal.phi_range, TOL_FACTOR * cal.q2_err, 1e-4),
        un=max(10.0 * cal.un_err, 1e-3),
        equality=max(2.0 * TOL_FACTOR * cal.q2_err, 1e-4),
    )

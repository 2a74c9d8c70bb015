"""The gradient/height functional Phi and its extremum principles.

For a spacelike graph u with constant mean curvature H the functional

    Phi(x; alpha) = 2 ( 1/sqrt(1 - |Du|^2) - 1 - alpha * H * u )

satisfies a maximum principle (max on the boundary for alpha in [1, 2]) and,
for alpha = 1, a minimum dichotomy: the minimum sits on the boundary or at
the unique critical point of u, and in the latter case Phi is constant.
At any critical point of u the gradient term drops out and
Phi = -2 alpha H u > 0 for u < 0, H > 0.

Homotopy solutions are evaluated through u_t = t v_t with effective mean
curvature t H.  Boundary values of |Du| come from the superconvergent flux
recovery (u = 0 there, so |Du| = u_n); interior values from the 2-ring
quadratic fit, which is what makes extremum localization stable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import ConvexDomain
from .fields import ScalarField, boundary_normal_slope, graph_fit
from .solver import GraphSolution


@dataclass(frozen=True)
class PhiExtremum:
    node: int
    location: tuple[float, float]
    value: float
    on_boundary: bool


@dataclass(frozen=True, eq=False)
class PhiField:
    field: ScalarField
    alpha: float
    h_eff: float
    max_info: PhiExtremum
    min_info: PhiExtremum

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @property
    def range(self) -> float:
        return float(self.values.max() - self.values.min())


def phi_values(solution: GraphSolution, alpha: float) -> np.ndarray:
    """Node-based Phi(x; alpha) from the quadratic-fit node gradients.

    One recovery family for the whole field keeps the discrete range of an
    exactly-constant Phi small; boundary fits are one-sided but pinned by the
    exact zeros of u along the boundary (u itself vanishes there, so only the
    gradient term contributes).
    """
    u = solution.graph_values
    h_eff = solution.graph_H
    fit = graph_fit(solution)
    q2 = np.clip(np.sum(fit.grad**2, axis=1), 0.0, 1.0 - 1e-12)
    return 2.0 * (1.0 / np.sqrt(1.0 - q2) - 1.0 - alpha * h_eff * u)


def _refine_interior(mesh, phi, node, maximize):
    """Quadratic refinement of an interior extremum over the node's 2-ring."""
    nbrs = np.concatenate([[node], mesh.ring2[node]])
    d = mesh.nodes[nbrs] - mesh.nodes[node]
    rho = max(np.max(np.linalg.norm(d, axis=1)), 1e-300)
    d = d / rho
    cols = np.stack(
        [np.ones(len(nbrs)), d[:, 0], d[:, 1],
         0.5 * d[:, 0] ** 2, d[:, 0] * d[:, 1], 0.5 * d[:, 1] ** 2], axis=1
    )
    coef, *_ = np.linalg.lstsq(cols, phi[nbrs], rcond=None)
    g = coef[1:3]
    hess = np.array([[coef[3], coef[4]], [coef[4], coef[5]]])
    try:
        shift = np.linalg.solve(hess, -g)
    except np.linalg.LinAlgError:
        return tuple(mesh.nodes[node]), float(phi[node])
    eig = np.linalg.eigvalsh(hess)
    curv_ok = (eig < 0).all() if maximize else (eig > 0).all()
    if not curv_ok or np.linalg.norm(shift) > 1.0:
        return tuple(mesh.nodes[node]), float(phi[node])
    val = coef[0] + g @ shift + 0.5 * shift @ hess @ shift
    loc = mesh.nodes[node] + rho * shift
    return (float(loc[0]), float(loc[1])), float(val)


def _refine_boundary(mesh, phi, node, maximize):
    """1D parabola refinement along the boundary polyline."""
    bnodes = mesh.boundary_nodes
    pos = int(np.where(bnodes == node)[0][0])
    nb = len(bnodes)
    trip = [bnodes[(pos - 1) % nb], node, bnodes[(pos + 1) % nb]]
    pts = mesh.nodes[trip]
    tau = np.array([-np.linalg.norm(pts[1] - pts[0]), 0.0,
                    np.linalg.norm(pts[2] - pts[1])])
    vals = phi[trip]
    denom = (tau[0] - tau[1]) * (tau[0] - tau[2]) * (tau[1] - tau[2])
    a = (tau[2] * (vals[1] - vals[0]) + tau[1] * (vals[0] - vals[2])
         + tau[0] * (vals[2] - vals[1])) / denom
    b = (tau[2] ** 2 * (vals[0] - vals[1]) + tau[1] ** 2 * (vals[2] - vals[0])
         + tau[0] ** 2 * (vals[1] - vals[2])) / denom
    if a == 0 or (a > 0) == maximize:
        return tuple(mesh.nodes[node]), float(phi[node])
    tstar = -b / (2 * a)
    if not (tau[0] < tstar < tau[2]):
        return tuple(mesh.nodes[node]), float(phi[node])
    c = vals[1]
    val = a * tstar**2 + b * tstar + c
    direction = (pts[2] - pts[0]) / np.linalg.norm(pts[2] - pts[0])
    loc = pts[1] + tstar * direction
    return (float(loc[0]), float(loc[1])), float(val)


def _extremum(mesh, phi, maximize: bool) -> PhiExtremum:
    node = int(np.argmax(phi) if maximize else np.argmin(phi))
    on_b = bool(mesh.is_boundary[node])
    if on_b:
        loc, val = _refine_boundary(mesh, phi, node, maximize)
    else:
        loc, val = _refine_interior(mesh, phi, node, maximize)
    return PhiExtremum(node=node, location=loc, value=val, on_boundary=on_b)


def phi_field(solution: GraphSolution, alpha: float) -> PhiField:
    """Evaluate Phi(x; alpha) and locate its extrema (quadratic-refined)."""
    phi = phi_values(solution, alpha)
    mesh = solution.mesh
    return PhiField(
        field=ScalarField(mesh, "node", phi, name=f"phi_alpha_{alpha:g}"),
        alpha=float(alpha),
        h_eff=solution.graph_H,
        max_info=_extremum(mesh, phi, True),
        min_info=_extremum(mesh, phi, False),
    )


@dataclass(frozen=True)
class PhiMaxReport:
    location: tuple[float, float]
    value: float
    on_boundary: bool
    interior_excess: float    # max over interior - max over boundary
    tol: float
    ok: bool


def phi_max_location(phi: PhiField, tol: float) -> PhiMaxReport:
    """Arg-max with the boundary-maximum principle asserted within ``tol``.

    The maximum principle is an alpha = 1 statement; for alpha > 1 the height
    term -alpha*H*u can dominate and push the maximum to the interior
    critical point (on a unit disc at alpha = 2 the center value is twice the
    boundary value), so the ``ok`` flag is only meaningful at alpha = 1.
    A violation is reported, not raised.
    """
    mesh = phi.field.mesh
    vals = phi.values
    bmax = float(vals[mesh.boundary_nodes].max())
    imax = float(vals[mesh.interior_nodes].max()) if mesh.interior_nodes.size else bmax
    excess = imax - bmax
    info = phi.max_info
    return PhiMaxReport(
        location=info.location, value=info.value,
        on_boundary=info.on_boundary or excess <= tol,
        interior_excess=excess, tol=tol, ok=excess <= tol,
    )


@dataclass(frozen=True)
class PhiMinReport:
    location: tuple[float, float]
    value: float
    classification: str       # "boundary" | "critical-point" | "violation"
    constant: bool            # near-constancy of the whole field
    field_range: float
    tol: float
    ok: bool


def phi_min_location(
    phi: PhiField,
    tol: float,
    critical_point: tuple[float, float] | None = None,
    merge_radius: float | None = None,
) -> PhiMinReport:
    """Classify the minimum per the dichotomy: boundary or the unique
    critical point (with near-constancy when the critical point wins at
    alpha = 1).  Anything else is a reported violation."""
    mesh = phi.field.mesh
    vals = phi.values
    rng = float(vals.max() - vals.min())
    constant = rng <= tol
    info = phi.min_info
    bmin = float(vals[mesh.boundary_nodes].min())
    imin = float(vals[mesh.interior_nodes].min()) if mesh.interior_nodes.size else bmin

    if merge_radius is None:
        merge_radius = 2.0 * mesh.h

    if info.on_boundary or bmin <= imin + tol:
        cls = "boundary"
        ok = True
    elif critical_point is not None and (
        np.hypot(info.location[0] - critical_point[0],
                 info.location[1] - critical_point[1]) <= merge_radius
    ):
        cls = "critical-point"
        ok = True if phi.alpha != 1.0 else constant
    elif constant:
        cls = "critical-point"   # constant field: the dichotomy is degenerate
        ok = True
    else:
        cls = "violation"
        ok = False
    return PhiMinReport(
        location=info.location, value=info.value, classification=cls,
        constant=constant, field_range=rng, tol=tol, ok=ok,
    )


def phi_boundary_normal_derivative(
    solution: GraphSolution, domain: ConvexDomain, alpha: float
) -> np.ndarray:
    """The boundary identity d(Phi)/dn = -(2 K g u_n^2 + f u_n) per boundary
    node, with g = (1 - q^2)^{-1/2}, f = -2H and |Du| = |u_n| on the boundary
    (u vanishes there).  Outward normal convention; for the radial solution
    on a disc this is identically zero.
    """
    mesh = solution.mesh
    h_eff = solution.graph_H
    un = boundary_normal_slope(solution)
    kappa = domain.curvature(mesh.boundary_param)
    g = 1.0 / np.sqrt(np.clip(1.0 - un * un, 1e-12, None))
    del alpha  # the identity is alpha-independent once u = 0 on the boundary
    return -(2.0 * kappa * g * un * un - 2.0 * h_eff * un)


@dataclass(frozen=True)
class SignChainReport:
    q_at_max: float
    q_max: float
    lhs: float                # q_max / sqrt(1 - q_max^2)
    rhs_local: float          # H / K(p) at the arg-max boundary point
    rhs_global: float         # H / K_min
    ok: bool


def phi_max_sign_chain(
    solution: GraphSolution, domain: ConvexDomain, phi: PhiField, tol: float
) -> SignChainReport:
    """The inequality chain behind the sharp gradient bound: at the boundary
    arg-max p of Phi, q(p) = q_max and q_max/sqrt(1-q_max^2) <= H/K(p) <= H/K_min."""
    mesh = solution.mesh
    un = boundary_normal_slope(solution)
    q_max = float(un.max())
    bvals = phi.values[mesh.boundary_nodes]
    pos = int(np.argmax(bvals))
    q_at_max = float(un[pos])
    kappa_p = float(domain.curvature(mesh.boundary_param[pos]))
    h_eff = solution.graph_H
    lhs = q_max / np.sqrt(1.0 - q_max * q_max)
    rhs_local = h_eff / kappa_p
    rhs_global = h_eff / domain.k_min
    ok = (abs(q_at_max - q_max) <= tol) and (lhs <= rhs_local + tol) and (
        rhs_local <= rhs_global + 1e-12
    )
    return SignChainReport(
        q_at_max=q_at_max, q_max=q_max, lhs=float(lhs),
        rhs_local=float(rhs_local), rhs_global=float(rhs_global), ok=bool(ok),
    )

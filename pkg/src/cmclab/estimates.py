"""Both sides of the sharp C0/C1 bounds, slacks, and the circle-equality cases.

For a solution with mean curvature H over a strictly convex domain whose
boundary curvature ranges over [K_min, K_max]:

    gradient bound:  max |Du|^2 (attained on the boundary) <= H^2/(H^2 + K_min^2)
    q_min bound:     min_boundary |Du|^2 >= H^2/(H^2 + K_max^2)
    height sandwich: -(sqrt(H^2+K_min^2)/K_min - 1)/H <= min u
                                    <= -(sqrt(H^2+K_max^2)/K_max - 1)/H

with equality exactly on discs, where the radial solution attains all three
simultaneously.  Measurements use the conservative direction: the larger of
flux-recovered and element-based boundary gradients for the upper bound, the
smaller for the lower bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .domain import ConvexDomain
from .fields import boundary_normal_slope, graph_fit, _graph_scale
from .pfunction import phi_values
from .solver import GraphSolution


# -- pure bound arithmetic -----------------------------------------------------

def gradient_bound(H: float, k_min: float) -> float:
    return H * H / (H * H + k_min * k_min)


def q_min_bound(H: float, k_max: float) -> float:
    return H * H / (H * H + k_max * k_max)


def height_lower(H: float, k_min: float) -> float:
    return -(math.sqrt(H * H + k_min * k_min) / k_min - 1.0) / H


def height_upper(H: float, k_max: float) -> float:
    return -(math.sqrt(H * H + k_max * k_max) / k_max - 1.0) / H


# -- measurements ----------------------------------------------------------------

def _boundary_adjacent_elements(mesh) -> np.ndarray:
    return np.where(mesh.is_boundary[mesh.triangles].any(axis=1))[0]


def measured_q_extremes(solution: GraphSolution):
    """(q_max, q_min) over the boundary, conservative in both directions.

    q_max: larger of flux-recovered u_n and the element-gradient maximum over
    boundary-adjacent triangles.  q_min: smaller of the two boundary-node
    recoveries (flux and quadratic fit); element gradients live strictly
    inside, where |Du| has already dropped below its boundary trace, so they
    would bias the lower measurement.
    """
    mesh = solution.mesh
    un = boundary_normal_slope(solution)
    scale = _graph_scale(solution)
    eg = scale * solution.element_gradients
    adj = _boundary_adjacent_elements(mesh)
    enorm = np.linalg.norm(eg[adj], axis=1)
    fit_bnd = np.linalg.norm(graph_fit(solution).grad[mesh.boundary_nodes], axis=1)
    q_max = max(float(un.max()), float(enorm.max()))
    q_min = min(float(un.min()), float(fit_bnd.min()))
    return q_max, q_min


def refined_minimum(solution: GraphSolution):
    """(location, value) of min u, sharpened by the local quadratic model."""
    mesh = solution.mesh
    w = solution.graph_values
    i = int(np.argmin(w))
    fit = graph_fit(solution)
    hess = np.array([[fit.uxx[i], fit.uxy[i]], [fit.uxy[i], fit.uyy[i]]])
    grad = fit.grad[i]
    loc = mesh.nodes[i].astype(float)
    val = float(w[i])
    try:
        shift = np.linalg.solve(hess, -grad)
        if np.linalg.norm(shift) <= mesh.h and np.all(np.linalg.eigvalsh(hess) > 0):
            val = float(w[i] + grad @ shift + 0.5 * shift @ hess @ shift)
            loc = loc + shift
    except np.linalg.LinAlgError:
        pass
    return (float(loc[0]), float(loc[1])), val


# -- check fragments --------------------------------------------------------------

@dataclass(frozen=True)
class GradientBoundCheck:
    q_max2: float
    bound: float
    slack: float               # bound - q_max2
    interior_excess: float     # max interior |Du| - boundary q_max
    tol: float
    ok: bool
    boundary_max_ok: bool


def gradient_bound_check(
    solution: GraphSolution, domain: ConvexDomain, tol: float
) -> GradientBoundCheck:
    q_max, _ = measured_q_extremes(solution)
    fit = graph_fit(solution)
    mesh = solution.mesh
    interior_max = float(
        np.linalg.norm(fit.grad[mesh.interior_nodes], axis=1).max()
    )
    bound = gradient_bound(solution.graph_H, domain.k_min)
    q2 = q_max * q_max
    excess = interior_max - q_max
    return GradientBoundCheck(
        q_max2=q2, bound=bound, slack=bound - q2, interior_excess=excess, tol=tol,
        ok=q2 <= bound + tol, boundary_max_ok=excess <= tol,
    )


@dataclass(frozen=True)
class HeightBoundCheck:
    u_min: float
    lower: float
    upper: float
    slack_lower: float         # u_min - lower
    slack_upper: float         # upper - u_min
    tol: float
    ok: bool
    equality_lower: bool
    equality_upper: bool


def height_bound_check(
    solution: GraphSolution, domain: ConvexDomain, tol: float,
    equality_tol: float | None = None,
) -> HeightBoundCheck:
    _, u_min = refined_minimum(solution)
    lo = height_lower(solution.graph_H, domain.k_min)
    hi = height_upper(solution.graph_H, domain.k_max)
    eq_tol = tol if equality_tol is None else equality_tol
    return HeightBoundCheck(
        u_min=u_min, lower=lo, upper=hi,
        slack_lower=u_min - lo, slack_upper=hi - u_min, tol=tol,
        ok=(u_min >= lo - tol) and (u_min <= hi + tol),
        equality_lower=abs(u_min - lo) <= eq_tol,
        equality_upper=abs(hi - u_min) <= eq_tol,
    )


@dataclass(frozen=True)
class QMinCheck:
    q_min2: float
    bound: float
    slack: float               # q_min2 - bound
    tol: float
    ok: bool


def q_min_check(solution: GraphSolution, domain: ConvexDomain, tol: float) -> QMinCheck:
    _, q_min = measured_q_extremes(solution)
    bound = q_min_bound(solution.graph_H, domain.k_max)
    q2 = q_min * q_min
    return QMinCheck(q_min2=q2, bound=bound, slack=q2 - bound, tol=tol,
                     ok=q2 >= bound - tol)


@dataclass(frozen=True)
class EqualityChainCheck:
    osc_un: float
    osc_phi: float
    tol: float
    is_circle: bool            # the domain has constant boundary curvature
    consistent: bool           # oscillations match the circle/non-circle expectation


def equality_chain_check(
    solution: GraphSolution, domain: ConvexDomain, tol: float
) -> EqualityChainCheck:
    """Numerical form of: equality in the sharp bounds <=> Phi constant on the
    boundary <=> u_n constant on the boundary <=> the boundary is a circle.
    On discs both oscillations vanish to tolerance; on anything else both are
    bounded away from zero."""
    mesh = solution.mesh
    un = boundary_normal_slope(solution)
    phi = phi_values(solution, 1.0)[mesh.boundary_nodes]
    osc_un = float(un.max() - un.min())
    osc_phi = float(phi.max() - phi.min())
    is_circle = (domain.k_max - domain.k_min) <= 1e-10 * domain.k_max
    if is_circle:
        consistent = osc_un <= tol and osc_phi <= tol
    else:
        consistent = osc_un > tol or osc_phi > tol
    return EqualityChainCheck(
        osc_un=osc_un, osc_phi=osc_phi, tol=tol,
        is_circle=is_circle, consistent=consistent,
    )


# -- the full report ----------------------------------------------------------------

@dataclass(frozen=True)
class EstimateReport:
    domain_kind: str
    domain_params: tuple[float, ...]
    H: float
    h: float
    k_min: float
    k_max: float
    gradient: GradientBoundCheck
    height: HeightBoundCheck
    q_min: QMinCheck
    equality_chain: EqualityChainCheck
    circle_equality: bool
    ok: bool

    def to_dict(self) -> dict:
        return asdict(self)


def full_report(
    solution: GraphSolution,
    domain: ConvexDomain,
    tol_q2: float,
    tol_height: float,
    tol_equality: float,
) -> EstimateReport:
    grad = gradient_bound_check(solution, domain, tol_q2)
    height = height_bound_check(solution, domain, tol_height, tol_equality)
    qmin = q_min_check(solution, domain, tol_q2)
    chain = equality_chain_check(solution, domain, tol_equality)
    circle_eq = bool(
        chain.is_circle
        and abs(grad.slack) <= tol_equality
        and abs(qmin.slack) <= tol_equality
        and height.equality_lower
        and height.equality_upper
    )
    return EstimateReport(
        domain_kind=domain.kind,
        domain_params=domain.params,
        H=solution.graph_H,
        h=solution.mesh.h,
        k_min=domain.k_min,
        k_max=domain.k_max,
        gradient=grad,
        height=height,
        q_min=qmin,
        equality_chain=chain,
        circle_equality=circle_eq,
        ok=bool(grad.ok and grad.boundary_max_ok and height.ok and qmin.ok
                and chain.consistent),
    )

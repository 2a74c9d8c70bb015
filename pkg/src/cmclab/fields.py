"""Differential-geometric fields of a solution graph.

Sign conventions (fixed once, future-oriented normal throughout): the graph
of u is spacelike with |Du| < 1, the normal is N = (Du, 1)/sqrt(1 - |Du|^2),
the mean curvature satisfies div(Du / sqrt(1 - |Du|^2)) = 2H, and the
Gaussian curvature is

    K = - (u_xx u_yy - u_xy^2) / (1 - |Du|^2)^2,

so K is negative at a nondegenerate minimum of u.  All full-field quantities
refer to the graph function ``solution.graph_values`` (u_t = t v_t for t>0,
v itself at t=0, where the statements are the Euclidean surrogates).

Second derivatives are never taken by differentiating P1 twice: each node
gets a least-squares quadratic fit over its 2-ring, which also provides the
recovered node gradient used for extremum localization.  Boundary nodes get
one-sided fits and are flagged; interior claims exclude flagged nodes.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from .mesh import TriMesh
from .solver import GraphSolution, assemble


@dataclass(frozen=True, eq=False)
class ScalarField:
    mesh: TriMesh
    kind: str                # "node" or "element"
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        expect = self.mesh.n_nodes if self.kind == "node" else self.mesh.n_triangles
        if self.values.shape != (expect,):
            raise ValueError(
                f"{self.kind} field {self.name!r} has {self.values.shape}, "
                f"expected ({expect},)"
            )


@dataclass(frozen=True, eq=False)
class HessianField:
    """Per-node symmetric Hessian (u_xx, u_xy, u_yy); symmetric by storage."""

    mesh: TriMesh
    uxx: np.ndarray
    uxy: np.ndarray
    uyy: np.ndarray
    flags: np.ndarray        # True where the fit is one-sided or ill-conditioned

    def determinant(self) -> np.ndarray:
        return self.uxx * self.uyy - self.uxy * self.uxy


@dataclass(frozen=True, eq=False)
class FitResult:
    """Gradient and Hessian of a nodal field from 2-ring quadratic fits."""

    grad: np.ndarray         # (n, 2)
    uxx: np.ndarray
    uxy: np.ndarray
    uyy: np.ndarray
    flags: np.ndarray

    def scaled(self, factor: float) -> "FitResult":
        return FitResult(
            grad=factor * self.grad, uxx=factor * self.uxx,
            uxy=factor * self.uxy, uyy=factor * self.uyy, flags=self.flags,
        )


def quadratic_fit(mesh: TriMesh, values: np.ndarray) -> FitResult:
    """Least-squares quadratic fit of a nodal field over 2-ring stencils.

    Reproduces exact quadratics on interior nodes; the fit is linear in the
    data, so fits of scaled fields scale accordingly.
    """
    n = mesh.n_nodes
    rings = mesh.ring2
    kmax = max(len(r) for r in rings) + 1
    idx = np.zeros((n, kmax), dtype=np.int64)
    wgt = np.zeros((n, kmax))
    for i, r in enumerate(rings):
        idx[i, 0] = i
        idx[i, 1 : 1 + len(r)] = r
        wgt[i, : 1 + len(r)] = 1.0

    d = mesh.nodes[idx] - mesh.nodes[:, None, :]          # (n, k, 2)
    rho = np.maximum(np.max(np.linalg.norm(d, axis=2), axis=1), 1e-300)
    d = d / rho[:, None, None]
    dx, dy = d[..., 0], d[..., 1]
    cols = np.stack(
        [np.ones_like(dx), dx, dy, 0.5 * dx * dx, dx * dy, 0.5 * dy * dy], axis=2
    )
    cols = cols * wgt[:, :, None]
    rhs = values[idx] * wgt

    ata = np.einsum("nki,nkj->nij", cols, cols)
    atb = np.einsum("nki,nk->ni", cols, rhs)

    flags = mesh.is_boundary.copy()
    sizes = wgt.sum(axis=1)
    flags |= sizes < 6
    # guard the batched solve against rank-deficient stencils
    sing = np.linalg.cond(ata) > 1e12
    flags |= sing
    ata[sing] += np.eye(6) * 1e-8
    coef = np.linalg.solve(ata, atb[:, :, None])[:, :, 0]

    grad = coef[:, 1:3] / rho[:, None]
    return FitResult(
        grad=grad,
        uxx=coef[:, 3] / rho**2,
        uxy=coef[:, 4] / rho**2,
        uyy=coef[:, 5] / rho**2,
        flags=flags,
    )


def averaged_node_gradients(mesh: TriMesh, elem_grads: np.ndarray) -> np.ndarray:
    """Area-weighted average of adjacent element gradients per node."""
    n = mesh.n_nodes
    acc = np.zeros((n, 2))
    w = np.zeros(n)
    tri = mesh.triangles
    for a in range(3):
        np.add.at(acc, tri[:, a], elem_grads * mesh.areas[:, None])
        np.add.at(w, tri[:, a], mesh.areas)
    return acc / w[:, None]


# -- per-solution caches ----------------------------------------------------

_fit_cache: "weakref.WeakKeyDictionary[GraphSolution, FitResult]" = (
    weakref.WeakKeyDictionary()
)


def _graph_scale(solution: GraphSolution) -> float:
    return solution.t if solution.t > 0 else 1.0


def solution_fit(solution: GraphSolution) -> FitResult:
    """Quadratic-fit recovery of v (cached per solution)."""
    fit = _fit_cache.get(solution)
    if fit is None:
        fit = quadratic_fit(solution.mesh, solution.values)
        _fit_cache[solution] = fit
    return fit


def graph_fit(solution: GraphSolution) -> FitResult:
    """Quadratic-fit recovery of the graph function (u_t, or v at t=0)."""
    return solution_fit(solution).scaled(_graph_scale(solution))


# -- spec surface ------------------------------------------------------------

def gradient(solution: GraphSolution):
    """Element gradients (exact P1) and recovered node gradients of the graph
    function, the latter by area-weighted averaging of adjacent elements."""
    scale = _graph_scale(solution)
    elem = scale * solution.element_gradients
    node = averaged_node_gradients(solution.mesh, elem)
    return elem, node


def hessian_recovery(solution: GraphSolution) -> HessianField:
    """Recovered per-node Hessian of the graph function."""
    fit = graph_fit(solution)
    return HessianField(
        mesh=solution.mesh, uxx=fit.uxx, uxy=fit.uxy, uyy=fit.uyy, flags=fit.flags
    )


def gaussian_curvature(solution: GraphSolution) -> ScalarField:
    """Node-based K = -(u_xx u_yy - u_xy^2)/(1 - |Du|^2)^2 of the graph."""
    fit = graph_fit(solution)
    q2 = np.sum(fit.grad**2, axis=1)
    denom = np.maximum(1.0 - q2, 1e-12) ** 2
    k = -(fit.uxx * fit.uyy - fit.uxy**2) / denom
    return ScalarField(solution.mesh, "node", k, name="gaussian_curvature")


def mean_curvature_residual(solution: GraphSolution) -> ScalarField:
    """Interior equation residual |div(Dw/sqrt(1-|Dw|^2)) - 2tH| in the lumped
    discrete sense; boundary entries are set to zero (their weak rows carry
    the flux, not a residual)."""
    w = solution.graph_values
    t_eff = 1.0 if solution.t > 0 else 0.0
    res, _ = assemble(solution.mesh, w, t_eff, solution.graph_H)
    out = res / solution.mesh.lumped_mass
    out[solution.mesh.boundary_nodes] = 0.0
    return ScalarField(solution.mesh, "node", np.abs(out), name="mc_residual")


@dataclass(frozen=True, eq=False)
class NormalForms:
    normal: np.ndarray       # (n, 3) future-directed, <N,N>_L = -1
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray


def normal_and_forms(solution: GraphSolution) -> NormalForms:
    """Future-directed normal and first-fundamental-form coefficients
    E = 1 - u_x^2, F = -u_x u_y, G = 1 - u_y^2 (so EG - F^2 = 1 - |Du|^2)."""
    fit = graph_fit(solution)
    ux, uy = fit.grad[:, 0], fit.grad[:, 1]
    q2 = ux * ux + uy * uy
    root = np.sqrt(np.maximum(1.0 - q2, 1e-12))
    normal = np.stack([ux / root, uy / root, 1.0 / root], axis=1)
    return NormalForms(normal=normal, E=1.0 - ux * ux, F=-ux * uy, G=1.0 - uy * uy)


def boundary_normal_slope(solution: GraphSolution) -> np.ndarray:
    """Outward normal derivative of the graph function at boundary nodes by
    equilibrated-flux recovery.

    The assembled weak rows at boundary nodes equal the boundary integral of
    the flux against the hat functions, so sigma = row / (adjacent half edge
    length) recovers v_n / sqrt(1 - t^2 v_n^2); inverting gives v_n.  This is
    one-sided by nature and superconvergent compared to patch averaging.
    """
    mesh = solution.mesh
    res, _ = assemble(mesh, solution.values, solution.t, solution.H)
    sigma = res[mesh.boundary_nodes] / mesh.boundary_edge_weights
    t = solution.t
    v_n = sigma / np.sqrt(1.0 + t * t * sigma * sigma)
    return _graph_scale(solution) * v_n


def graph_curvatures_fd(func, points, delta: float = 1e-2):
    """Mean and Gaussian curvature of a graph given by a callable, using
    fourth-order central differences.  Cross-validates closed-form surfaces.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))

    def d1(fvals):
        return (-fvals[4] + 8 * fvals[3] - 8 * fvals[1] + fvals[0]) / (12 * delta)

    def d2(fvals):
        return (
            -fvals[4] + 16 * fvals[3] - 30 * fvals[2] + 16 * fvals[1] - fvals[0]
        ) / (12 * delta**2)

    offs = np.array([-2.0, -1.0, 0.0, 1.0, 2.0]) * delta
    fx = np.array([func(pts + [o, 0.0]) for o in offs])
    fy = np.array([func(pts + [0.0, o]) for o in offs])
    ux, uy = d1(fx), d1(fy)
    uxx, uyy = d2(fx), d2(fy)
    cross = np.array(
        [[func(pts + [ox, oy]) for ox in offs] for oy in offs]
    )  # (5y, 5x, npts)
    uxy = d1(np.array([d1(cross[j]) for j in range(5)]))

    q2 = ux * ux + uy * uy
    s = 1.0 - q2
    h = ((1 - uy * uy) * uxx + 2 * ux * uy * uxy + (1 - ux * ux) * uyy) / (
        2.0 * s**1.5
    )
    k = -(uxx * uyy - uxy * uxy) / s**2
    return h, k

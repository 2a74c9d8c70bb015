"""Damped Newton solver for the spacelike CMC Dirichlet problem.

Discretization is piecewise-linear conforming elements with the one-point
(exact for P1) quadrature, so the flux depends only on the constant
per-element gradient and the spacelike safeguard is exact per element.  The
homotopy family

    div( Dv / sqrt(1 - t^2 |Dv|^2) ) = 2H,  v = 0 on the boundary,

is solved by warm-started continuation in t from the linear Poisson problem
at t = 0 up to the CMC problem at t = 1 (the scaled u_t = t * v_t stays O(1)
in v as t -> 0, which is why the continuation runs in v).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .mesh import TriMesh


class SolverError(RuntimeError):
    """Solver failure with diagnostic payload."""

    def __init__(self, message: str, residual_norm: float | None = None, t: float | None = None):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.t = t


class NonSpacelikeError(SolverError):
    """A state with element-wise t|Dv| >= 1 was passed where the flux is undefined."""

    def __init__(self, element: int, tgrad: float):
        super().__init__(
            f"element {element} is not spacelike: t|Dv| = {tgrad:.6f} >= 1"
        )
        self.element = element
        self.tgrad = tgrad


@dataclass(frozen=True)
class SolverOptions:
    newton_tol: float = 1e-10
    max_iters: int = 40
    backtrack_factor: float = 0.5
    max_backtracks: int = 40
    sufficient_decrease: float = 1e-4
    spacelike_cap: float = 1.0 - 1e-6
    safeguard_warn_limit: int = 10

    def __post_init__(self):
        if self.newton_tol <= 0 or not (0 < self.spacelike_cap < 1):
            raise ValueError("tolerances must be positive and spacelike_cap < 1")


@dataclass(frozen=True, eq=False)
class GraphSolution:
    """Converged discrete solution v_t of the homotopy problem (u_t = t v_t)."""

    mesh: TriMesh
    values: np.ndarray      # v_t at nodes
    t: float
    H: float
    residual_norm: float
    theta: float            # spacelike margin 1 - max_e t|Dv_t|
    iters: int
    safeguard_hits: int

    @property
    def graph_values(self) -> np.ndarray:
        """Nodal values of the graph function: u_t = t v_t, or v itself at t=0
        (the Euclidean surrogate the t=0 statements are phrased in)."""
        return self.t * self.values if self.t > 0 else self.values

    @property
    def graph_H(self) -> float:
        """Mean curvature of the graph of :attr:`graph_values` (t H, or H at t=0)."""
        return self.t * self.H if self.t > 0 else self.H

    @cached_property
    def element_gradients(self) -> np.ndarray:
        """Exact P1 gradients of v per element, shape (m, 2)."""
        b, c = self.mesh.grad_coeffs
        return kernels.element_gradients(
            self.mesh.triangles, b, c, self.mesh.areas, self.values
        )

    @cached_property
    def max_tgrad(self) -> float:
        g = np.linalg.norm(self.element_gradients, axis=1)
        return float(self.t * g.max())


def assemble(mesh: TriMesh, values: np.ndarray, t: float, H: float):
    """Full residual vector and exact Jacobian (CSR) of the discrete system.

    residual_i = sum_e area_e * (Dv . grad phi_i) / sqrt(1 - t^2 |Dv|^2)
                 + 2 H area_e / 3  for every node i (boundary rows included;
    the Newton loop restricts to interior test functions, the boundary rows
    carry the equilibrated flux used for superconvergent u_n recovery).
    """
    b, c = mesh.grad_coeffs
    tri = mesh.triangles
    grads = kernels.element_gradients(tri, b, c, mesh.areas, values)
    tgrad2 = t * t * np.sum(grads * grads, axis=1)
    if tgrad2.size and tgrad2.max() >= 1.0:
        e = int(np.argmax(tgrad2))
        raise NonSpacelikeError(e, float(np.sqrt(tgrad2[e])))

    relem, jelem, _ = kernels.cmc_element_arrays(tri, b, c, mesh.areas, values, t, H)
    n = mesh.n_nodes
    residual = np.bincount(tri.ravel(), weights=relem.ravel(), minlength=n)
    m = tri.shape[0]
    rows = np.broadcast_to(tri[:, :, None], (m, 3, 3)).ravel()
    cols = np.broadcast_to(tri[:, None, :], (m, 3, 3)).ravel()
    jac = sp.coo_matrix((jelem.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return residual, jac


def residual_only(mesh: TriMesh, values: np.ndarray, t: float, H: float) -> np.ndarray:
    """Residual vector without the Jacobian (used in line searches)."""
    b, c = mesh.grad_coeffs
    tri = mesh.triangles
    relem, _, gsq = kernels.cmc_element_arrays(tri, b, c, mesh.areas, values, t, H)
    if gsq.size and t * t * gsq.max() >= 1.0:
        e = int(np.argmax(gsq))
        raise NonSpacelikeError(e, float(t * np.sqrt(gsq[e])))
    return np.bincount(tri.ravel(), weights=relem.ravel(), minlength=mesh.n_nodes)


def _max_tgrad(mesh: TriMesh, values: np.ndarray, t: float) -> float:
    b, c = mesh.grad_coeffs
    g = kernels.element_gradients(mesh.triangles, b, c, mesh.areas, values)
    return float(t * np.sqrt(np.max(np.sum(g * g, axis=1)))) if g.size else 0.0


def newton_solve(
    mesh: TriMesh,
    t: float,
    H: float,
    init: np.ndarray | None = None,
    opts: SolverOptions | None = None,
) -> GraphSolution:
    """Solve the t-problem by damped Newton iteration with a spacelike safeguard.

    Every damped step keeps element-wise t|Dv| <= spacelike_cap (the step is
    halved on violation); convergence is ||residual||_inf <= newton_tol on
    interior rows.  Raises :class:`SolverError` on non-convergence.
    """
    opts = opts or SolverOptions()
    n = mesh.n_nodes
    interior = mesh.interior_nodes

    if init is None:
        v = np.zeros(n)
    else:
        v = np.asarray(init, dtype=float).copy()
        if v.shape != (n,):
            raise ValueError(f"init has shape {v.shape}, expected ({n},)")
        if np.any(v[mesh.boundary_nodes] != 0.0):
            raise SolverError("init violates the homogeneous boundary condition")
        if _max_tgrad(mesh, v, t) > opts.spacelike_cap:
            raise NonSpacelikeError(-1, _max_tgrad(mesh, v, t))

    safeguard_hits = 0
    rnorm = np.inf
    for it in range(opts.max_iters + 1):
        residual, jac = assemble(mesh, v, t, H)
        rnorm = float(np.max(np.abs(residual[interior]))) if interior.size else 0.0
        if rnorm <= opts.newton_tol:
            theta = 1.0 - _max_tgrad(mesh, v, t)
            sol = GraphSolution(
                mesh=mesh, values=v, t=float(t), H=float(H),
                residual_norm=rnorm, theta=theta, iters=it,
                safeguard_hits=safeguard_hits,
            )
            return sol
        if it == opts.max_iters:
            break

        jac_ii = jac[interior][:, interior].tocsc()
        step = spla.spsolve(jac_ii, -residual[interior])
        lam = 1.0
        accepted = False
        for _ in range(opts.max_backtracks):
            trial = v.copy()
            trial[interior] += lam * step
            if _max_tgrad(mesh, trial, t) > opts.spacelike_cap:
                safeguard_hits += 1
                lam *= opts.backtrack_factor
                continue
            new_rnorm = float(
                np.max(np.abs(residual_only(mesh, trial, t, H)[interior]))
            )
            if new_rnorm <= (1.0 - opts.sufficient_decrease * lam) * rnorm:
                v = trial
                accepted = True
                break
            lam *= opts.backtrack_factor
        if not accepted:
            raise SolverError(
                f"line search stalled at iteration {it} (residual {rnorm:.3e})",
                residual_norm=rnorm, t=t,
            )

    raise SolverError(
        f"Newton did not reach tol {opts.newton_tol:.1e} in {opts.max_iters} "
        f"iterations (last residual {rnorm:.3e})",
        residual_norm=rnorm, t=t,
    )


def uniform_schedule(n_steps: int = 11) -> np.ndarray:
    """The default homotopy schedule: n_steps values from 0 to 1 inclusive."""
    if n_steps < 2:
        raise ValueError("schedule needs at least the endpoints 0 and 1")
    return np.linspace(0.0, 1.0, n_steps)


def continuation(
    mesh: TriMesh,
    H: float,
    t_schedule=None,
    opts: SolverOptions | None = None,
    max_bisect_depth: int = 4,
) -> list[GraphSolution]:
    """Warm-started continuation along the homotopy schedule.

    Solves t=0 first (a linear problem), then each subsequent t from the
    previous v.  A failing step is retried through up to ``max_bisect_depth``
    rounds of step bisection before the error (naming the failing t)
    propagates.  Returns one solution per scheduled t.
    """
    ts = uniform_schedule() if t_schedule is None else np.asarray(t_schedule, float)
    if ts[0] != 0.0 or ts[-1] != 1.0 or np.any(np.diff(ts) <= 0):
        raise ValueError("t schedule must increase strictly from 0 to 1")
    opts = opts or SolverOptions()

    out: list[GraphSolution] = []
    v = None
    t_prev = 0.0
    for t in ts:
        sol = _solve_with_bisection(mesh, H, t_prev, float(t), v, opts, max_bisect_depth)
        out.append(sol)
        v = sol.values
        t_prev = float(t)
    return out


def _solve_with_bisection(mesh, H, t_lo, t_hi, v_lo, opts, depth):
    try:
        return newton_solve(mesh, t_hi, H, init=v_lo, opts=opts)
    except SolverError:
        if depth <= 0:
            raise SolverError(
                f"continuation failed at t = {t_hi}", t=t_hi
            ) from None
        t_mid = 0.5 * (t_lo + t_hi)
        mid = _solve_with_bisection(mesh, H, t_lo, t_mid, v_lo, opts, depth - 1)
        return _solve_with_bisection(mesh, H, t_mid, t_hi, mid.values, opts, depth - 1)

"""Critical points, sub-level topology, nodal sectors, and Taylor identities.

The headline facts this module verifies numerically: a solution of the CMC
problem over a convex domain has exactly one critical point, that point is a
nondegenerate minimum with negative Gaussian curvature, every sub-level set
{v < m} is connected, and a saddle (critical point with K > 0) exists exactly
when there are two or more minima.  Critical-point work happens on the
continuation variable v (the classification is scale-invariant and v stays
O(1) down to t = 0); the spacelike factor uses t |Dv|.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .fields import FitResult, quadratic_fit, solution_fit
from .mesh import TriMesh
from .solver import GraphSolution

_TIE_EPS = 1e-14


# -- critical points ---------------------------------------------------------

@dataclass(frozen=True)
class CriticalPoint:
    location: tuple[float, float]
    node: int
    value: float
    eigenvalues: tuple[float, float]
    gaussian_curvature: float
    classification: str       # minimum | saddle | maximum | degenerate


@dataclass(frozen=True)
class CriticalPointReport:
    points: list[CriticalPoint]
    count: int
    unique: bool
    degenerate_present: bool


def find_critical_points(
    mesh: TriMesh,
    values: np.ndarray,
    eps_grad: float,
    degenerate_tol: float,
    spacelike_t: float = 0.0,
    fit: FitResult | None = None,
) -> CriticalPointReport:
    """Locate and classify interior critical points of a nodal field.

    Candidates are interior nodes whose recovered |grad| is below ``eps_grad``
    and locally minimal over the 1-ring; each is refined by one Newton step in
    its local quadratic model and classified by the Hessian eigenvalues.
    Candidates closer than one mesh cell merge (critical points of these
    solutions are isolated).
    """
    if fit is None:
        fit = quadratic_fit(mesh, values)
    gnorm = np.linalg.norm(fit.grad, axis=1)

    cand = []
    for i in mesh.interior_nodes:
        if gnorm[i] >= eps_grad:
            continue
        if gnorm[i] <= gnorm[mesh.ring1[i]].min() + 1e-300:
            cand.append(i)

    # refine, then merge within one cell (keep the smallest-gradient member)
    cand.sort(key=lambda i: (gnorm[i], i))
    points: list[CriticalPoint] = []
    taken: list[np.ndarray] = []
    for i in cand:
        hess = np.array([[fit.uxx[i], fit.uxy[i]], [fit.uxy[i], fit.uyy[i]]])
        grad = fit.grad[i]
        loc = mesh.nodes[i].astype(float)
        val = float(values[i])
        try:
            shift = np.linalg.solve(hess, -grad)
            if np.linalg.norm(shift) <= mesh.h:
                loc = loc + shift
                val = float(
                    values[i] + grad @ shift + 0.5 * shift @ hess @ shift
                )
        except np.linalg.LinAlgError:
            pass
        if any(np.linalg.norm(loc - p) < mesh.h for p in taken):
            continue
        taken.append(loc)

        eig = np.linalg.eigvalsh(hess)
        tg = spacelike_t * np.linalg.norm(grad)
        k = -float(np.linalg.det(hess)) / (1.0 - min(tg * tg, 0.5)) ** 2
        if np.min(np.abs(eig)) <= degenerate_tol:
            cls = "degenerate"
        elif eig[0] > 0:
            cls = "minimum"
        elif eig[1] < 0:
            cls = "maximum"
        else:
            cls = "saddle"
        points.append(
            CriticalPoint(
                location=(float(loc[0]), float(loc[1])), node=int(i), value=val,
                eigenvalues=(float(eig[0]), float(eig[1])),
                gaussian_curvature=k, classification=cls,
            )
        )

    return CriticalPointReport(
        points=points,
        count=len(points),
        unique=len(points) == 1,
        degenerate_present=any(p.classification == "degenerate" for p in points),
    )


def critical_points(
    solution: GraphSolution,
    eps_grad: float | None = None,
    degenerate_tol: float | None = None,
) -> CriticalPointReport:
    """Critical points of a solved problem (on v; see module docstring).

    Defaults are mesh-aware: ``eps_grad`` is 3x the calibrated gradient
    recovery error at this h (scaled to the field) plus 0.8 * h * H for the
    mid-cell offset (the nearest node to a critical point sits up to ~h/2
    away, where the true gradient is already ~h/2 * |D^2 v| = h/2 * H);
    ``degenerate_tol`` is 1e-3 * H (nondegeneracy holds in the continuum, so
    smaller eigenvalues mean under-resolution and are reported as such).
    """
    fit = solution_fit(solution)
    if eps_grad is None:
        from .calibration import calibrate

        cal = calibrate(solution.mesh.h)
        scale = max(1.0, float(np.linalg.norm(fit.grad, axis=1).max()) / 0.7)
        eps_grad = 3.0 * cal.grad_err * scale + 0.8 * solution.mesh.h * abs(solution.H)
    if degenerate_tol is None:
        degenerate_tol = 1e-3 * abs(solution.H)
    return find_critical_points(
        solution.mesh, solution.values, eps_grad, degenerate_tol,
        spacelike_t=solution.t, fit=fit,
    )


# -- sub-level topology --------------------------------------------------------

def sublevel_components(source, m: float) -> int:
    """Number of connected components of {v < m} (exact for P1 interpolation).

    Two edge-adjacent triangles communicate iff their shared edge dips below
    the level, i.e. min of the two endpoint values < m.  Nodal ties with the
    level are perturbed upward by 1e-14 * scale for deterministic topology.
    """
    if isinstance(source, GraphSolution):
        mesh, values = source.mesh, source.values
    else:
        mesh, values = source

    vmin = float(values.min())
    if not (vmin < m < 0.0):
        raise ValueError(f"level m={m} outside ({vmin}, 0)")

    scale = max(abs(vmin), float(np.abs(values).max()), 1e-300)
    vals = values.copy()
    ties = np.abs(vals - m) < _TIE_EPS * scale
    vals[ties] = m + _TIE_EPS * scale

    tri = mesh.triangles
    active = np.min(vals[tri], axis=1) < m
    idx_of = -np.ones(mesh.n_triangles, dtype=np.int64)
    idx_of[active] = np.arange(int(active.sum()))
    if not active.any():
        return 0

    nbr = mesh.tri_neighbors
    rows, cols = [], []
    for a in range(3):
        j = nbr[:, a]
        own = np.arange(mesh.n_triangles)
        mask = (j >= 0) & active & (j > own)
        mask &= active[np.clip(j, 0, None)]
        # shared edge is opposite local vertex a
        e1 = tri[own, (a + 1) % 3]
        e2 = tri[own, (a + 2) % 3]
        mask &= np.minimum(vals[e1], vals[e2]) < m
        rows.append(idx_of[own[mask]])
        cols.append(idx_of[j[mask]])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    n_active = int(active.sum())
    graph = sp.coo_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(n_active, n_active)
    )
    ncomp, _ = connected_components(graph, directed=False)
    return int(ncomp)


def level_topology(source, n_levels: int = 50):
    """Component counts over uniformly spaced levels in (v_min, 0)."""
    if isinstance(source, GraphSolution):
        values = source.values
    else:
        _, values = source
    vmin = float(values.min())
    levels = vmin + (np.arange(n_levels) + 1.0) / (n_levels + 1.0) * (0.0 - vmin)
    return levels, np.array([sublevel_components(source, m) for m in levels])


# -- nodal sectors and the leading harmonic ------------------------------------

@dataclass(frozen=True)
class SectorCount:
    sectors: int | None        # None when indeterminate
    indeterminate: bool
    n_signed: int              # samples outside the hysteresis band


def _circle_samples(w, center, radius, n_samples, mesh=None):
    ang = (np.arange(n_samples) + 0.5) * (2.0 * np.pi / n_samples)
    pts = np.stack(
        [center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang)], axis=1
    )
    if callable(w):
        vals = np.asarray(w(pts), dtype=float)
    else:
        mesh_, values = (w.mesh, w.values) if hasattr(w, "mesh") else w
        vals = mesh_.interpolate(values, pts)
    return ang, vals


def nodal_sectors(
    w,
    center,
    radius: float,
    n_samples: int = 2048,
    eps_sign: float | None = None,
    ) -> SectorCount:
    """Count sign-alternating sectors of w around a circle about ``center``.

    ``w`` is a callable on (n,2) points, a node ScalarField, or a
    (mesh, values) pair.  Samples inside the hysteresis band |w| <= eps_sign
    carry no sign; if fewer than two samples carry a sign the result is
    indeterminate.  A leading harmonic Re(lambda z^n) yields 2n sectors.
    """
    _, vals = _circle_samples(w, center, radius, n_samples)
    if eps_sign is None:
        eps_sign = 1e-9 * float(np.max(np.abs(vals)))
    signs = np.zeros(len(vals), dtype=np.int64)
    signs[vals > eps_sign] = 1
    signs[vals < -eps_sign] = -1
    signed = signs[signs != 0]
    if signed.size < 2 or np.all(signed == signed[0]):
        return SectorCount(sectors=None, indeterminate=True, n_signed=int(signed.size))
    flips = int(np.sum(signed != np.roll(signed, 1)))
    return SectorCount(sectors=flips, indeterminate=False, n_signed=int(signed.size))


@dataclass(frozen=True)
class HarmonicFit:
    degree: int | None          # None: no harmonic leading term
    coefficient: complex | None
    rel_residual: float
    per_radius_residual: tuple[float, ...]


def fit_leading_harmonic(
    w,
    center,
    radii,
    n_max: int = 8,
    n_samples: int = 512,
) -> HarmonicFit:
    """Fit Re(lambda z^n) over circles of the given radii for n = 3..n_max.

    Returns the degree with the smallest joint relative residual; if no
    degree fits to relative residual < 0.1 the field has no harmonic leading
    term (e.g. radial profiles).  residual/radius^n stability per radius is
    reported as a diagnostic.
    """
    radii = np.asarray(radii, dtype=float)
    angs, vals = [], []
    for r in radii:
        a, v = _circle_samples(w, center, r, n_samples)
        angs.append(a)
        vals.append(v)
    wall = np.concatenate(vals)
    norm = np.linalg.norm(wall)
    if norm == 0:
        return HarmonicFit(None, None, 1.0, tuple(0.0 for _ in radii))

    best = None
    for n in range(3, n_max + 1):
        acol = np.concatenate([r**n * np.cos(n * a) for r, a in zip(radii, angs)])
        bcol = np.concatenate([-(r**n) * np.sin(n * a) for r, a in zip(radii, angs)])
        design = np.stack([acol, bcol], axis=1)
        coef, *_ = np.linalg.lstsq(design, wall, rcond=None)
        resid = wall - design @ coef
        rel = float(np.linalg.norm(resid) / norm)
        if best is None or rel < best[0]:
            per_r = []
            off = 0
            for v in vals:
                seg = resid[off : off + len(v)]
                per_r.append(float(np.linalg.norm(seg) / max(np.linalg.norm(v), 1e-300)))
                off += len(v)
            best = (rel, n, complex(coef[0], coef[1]), tuple(per_r))
    rel, n, lam, per_r = best
    if rel >= 0.1:
        return HarmonicFit(None, None, rel, per_r)
    return HarmonicFit(degree=n, coefficient=lam, rel_residual=rel,
                       per_radius_residual=per_r)


# -- Taylor identities at the critical point -----------------------------------

@dataclass(frozen=True)
class TaylorIdentity:
    name: str
    value: float
    expected: float
    error: float
    ok: bool


@dataclass(frozen=True)
class TaylorReport:
    source: str
    entries: list[TaylorIdentity]

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.entries)


def _check(name, value, expected, tol) -> TaylorIdentity:
    scale = max(abs(expected), 1.0)
    err = abs(value - expected) / scale
    return TaylorIdentity(name, float(value), float(expected), float(err), err <= tol)


def cap_taylor_report(R: float, H: float, rel_tol: float = 1e-6) -> TaylorReport:
    """Derivatives of the radial closed form at its critical point, by exact
    symbolic differentiation, against the identities that force constancy of
    Phi: u_ii = H, third order zero, u_xxxx = u_yyyy = -3H^3,
    u_xxyy = -H^3, mixed odd zero, fifth order zero.
    """
    import sympy as spy

    x, y = spy.symbols("x y", real=True)
    Hs = spy.nsimplify(H, rational=True)
    Rs = spy.nsimplify(R, rational=True)
    u = spy.sqrt(x**2 + y**2 + 1 / Hs**2) - spy.sqrt(Rs**2 + 1 / Hs**2)

    def d(i, j):
        return float(spy.diff(u, x, i, y, j).subs({x: 0, y: 0}))

    H3 = float(Hs**3)
    entries = [
        _check("u_x", d(1, 0), 0.0, rel_tol),
        _check("u_y", d(0, 1), 0.0, rel_tol),
        _check("u_xx", d(2, 0), float(Hs), rel_tol),
        _check("u_yy", d(0, 2), float(Hs), rel_tol),
        _check("u_xy", d(1, 1), 0.0, rel_tol),
    ]
    for i in range(4):
        entries.append(_check(f"order3_{i}", d(3 - i, i), 0.0, rel_tol))
    entries += [
        _check("u_xxxx", d(4, 0), -3.0 * H3, rel_tol),
        _check("u_yyyy", d(0, 4), -3.0 * H3, rel_tol),
        _check("u_xxyy", d(2, 2), -H3, rel_tol),
        _check("u_xxxy", d(3, 1), 0.0, rel_tol),
        _check("u_xyyy", d(1, 3), 0.0, rel_tol),
    ]
    for i in range(6):
        entries.append(_check(f"order5_{i}", d(5 - i, i), 0.0, rel_tol))
    return TaylorReport(source="closed-form", entries=entries)


def solution_taylor_report(
    solution: GraphSolution, tol: float = 5e-2, radial: bool | None = None
) -> TaylorReport:
    """Order <= 2 identities on a discrete solution at its critical point.

    Domain-independent: the recovered gradient vanishes and the Hessian trace
    satisfies u_xx + u_yy = 2 H_eff (the equation at a critical point).  On
    radially symmetric domains (``radial=True``, auto-detected from the mesh
    boundary when None) additionally u_xx = u_yy = H_eff and u_xy = 0; on
    anything else the individual second derivatives are not pinned.  Higher
    orders are out of reach of 2-ring fits by design and are checked on the
    closed form only."""
    from .fields import graph_fit

    rep = critical_points(solution)
    if rep.count != 1:
        raise ValueError(f"expected a unique critical point, found {rep.count}")
    node = rep.points[0].node
    fit = graph_fit(solution)
    h_eff = solution.graph_H
    if radial is None:
        r = np.linalg.norm(
            solution.mesh.nodes[solution.mesh.boundary_nodes], axis=1
        )
        radial = bool((r.max() - r.min()) <= 1e-9 * r.max())
    entries = [
        _check("u_x", fit.grad[node, 0], 0.0, tol),
        _check("u_y", fit.grad[node, 1], 0.0, tol),
        _check("trace_half", 0.5 * (fit.uxx[node] + fit.uyy[node]), h_eff, tol),
    ]
    if radial:
        entries += [
            _check("u_xx", fit.uxx[node], h_eff, tol),
            _check("u_yy", fit.uyy[node], h_eff, tol),
            _check("u_xy", fit.uxy[node], 0.0, tol),
        ]
    return TaylorReport(source="solution", entries=entries)

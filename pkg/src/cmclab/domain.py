"""Strictly convex planar domains with exact boundary parameterization.

Every domain kind exposes the same interface: a closed boundary curve
parameterized by the natural angle ``s`` in ``[0, 2*pi)``, the boundary
curvature ``K(s)`` taken with respect to the inner normal (so convex means
``K > 0``), and cached curvature extrema ``k_min``/``k_max``.  Arclength is
available by quadrature of ``|dx/ds|``; node placement and curvature stay
exact because the angular parameter is never discretized away.

Supported kinds:

* ``disc``          params ``(R,)``            K = 1/R
* ``ellipse``       params ``(a, b)``, a >= b  K = a*b / (a^2 sin^2 s + b^2 cos^2 s)^{3/2}
* ``superellipse``  params ``(a, b, p)``, p>2  implicit-curve closed form (K -> 0 at the
                    axis vertices, so the curvature infimum is 0; the sharp lower
                    height bound degenerates there and is reported as such)
* ``support``       params ``(c0, a1, b1, a2, b2, ...)`` Fourier coefficients of a
                    support function h(s); K = 1/(h + h'')
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * math.pi

#: sample count for convexity checks and extrema bracketing
_DENSE_SAMPLES = 4096
#: golden-section tolerance for curvature extrema of non-closed-form kinds
_EXTREMA_TOL = 1e-8


class DomainError(ValueError):
    """Raised for parameter vectors that do not define a strictly convex domain."""


def _as_array(s):
    return np.asarray(s, dtype=float)


@dataclass(frozen=True)
class ConvexDomain:
    """Immutable strictly convex domain; safe for concurrent reads."""

    kind: str
    params: tuple[float, ...]
    k_min: float = field(default=0.0)
    k_max: float = field(default=0.0)

    # -- boundary geometry ------------------------------------------------

    def boundary_point(self, s):
        """Exact boundary point(s) for parameter ``s`` (vectorized)."""
        s = _as_array(s)
        if self.kind == "disc":
            (r,) = self.params
            return np.stack([r * np.cos(s), r * np.sin(s)], axis=-1)
        if self.kind == "ellipse":
            a, b = self.params
            return np.stack([a * np.cos(s), b * np.sin(s)], axis=-1)
        if self.kind == "superellipse":
            a, b, p = self.params
            c, sn = np.cos(s), np.sin(s)
            x = a * np.sign(c) * np.abs(c) ** (2.0 / p)
            y = b * np.sign(sn) * np.abs(sn) ** (2.0 / p)
            return np.stack([x, y], axis=-1)
        if self.kind == "support":
            h = self._support(s)
            hp = self._support(s, deriv=1)
            c, sn = np.cos(s), np.sin(s)
            return np.stack([h * c - hp * sn, h * sn + hp * c], axis=-1)
        raise DomainError(f"unknown kind {self.kind!r}")

    def curvature(self, s):
        """Boundary curvature at ``s``, inner-normal convention (vectorized)."""
        s = _as_array(s)
        if self.kind == "disc":
            (r,) = self.params
            return np.full_like(s, 1.0 / r)
        if self.kind == "ellipse":
            a, b = self.params
            return a * b / (a * a * np.sin(s) ** 2 + b * b * np.cos(s) ** 2) ** 1.5
        if self.kind == "superellipse":
            return self._superellipse_curvature(s)
        if self.kind == "support":
            h = self._support(s)
            hpp = self._support(s, deriv=2)
            return 1.0 / (h + hpp)
        raise DomainError(f"unknown kind {self.kind!r}")

    def _superellipse_curvature(self, s):
        # Curvature of the level set F(x,y) = |x/a|^p + |y/b|^p = 1 via
        # (Fy^2 Fxx - 2 Fx Fy Fxy + Fx^2 Fyy) / |DF|^3; exact at the axis
        # vertices where it vanishes for p > 2.
        a, b, p = self.params
        pt = self.boundary_point(s)
        x, y = pt[..., 0], pt[..., 1]
        ax, by = np.abs(x) / a, np.abs(y) / b
        fx = (p / a) * ax ** (p - 1) * np.sign(x)
        fy = (p / b) * by ** (p - 1) * np.sign(y)
        fxx = (p * (p - 1) / a**2) * ax ** (p - 2)
        fyy = (p * (p - 1) / b**2) * by ** (p - 2)
        num = fy * fy * fxx + fx * fx * fyy  # Fxy = 0 for this family
        return num / (fx * fx + fy * fy) ** 1.5

    def _support(self, s, deriv: int = 0):
        coeffs = self.params
        h = np.zeros_like(s) + (coeffs[0] if deriv == 0 else 0.0)
        for k in range(1, (len(coeffs) - 1) // 2 + 1):
            ak, bk = coeffs[2 * k - 1], coeffs[2 * k]
            if deriv == 0:
                h = h + ak * np.cos(k * s) + bk * np.sin(k * s)
            elif deriv == 1:
                h = h + k * (-ak * np.sin(k * s) + bk * np.cos(k * s))
            elif deriv == 2:
                h = h - k * k * (ak * np.cos(k * s) + bk * np.sin(k * s))
        return h

    # -- derived quantities ------------------------------------------------

    @cached_property
    def _arclength_table(self):
        # cumulative arclength on a dense midpoint grid; integrable speed
        # singularities (superellipse vertices) are never sampled exactly
        n = 8 * _DENSE_SAMPLES
        smid = (np.arange(n) + 0.5) * (TWO_PI / n)
        # speed by centered differences of exact points (robust for all kinds)
        delta = TWO_PI / n * 1e-3
        speed = np.linalg.norm(
            (self.boundary_point(smid + delta) - self.boundary_point(smid - delta))
            / (2 * delta),
            axis=-1,
        )
        cum = np.concatenate([[0.0], np.cumsum(speed) * (TWO_PI / n)])
        sgrid = np.concatenate([[0.0], smid + 0.5 * (TWO_PI / n)])
        return sgrid, cum

    @property
    def length(self) -> float:
        """Boundary length by quadrature."""
        return float(self._arclength_table[1][-1])

    def params_at_arclength(self, ell):
        """Invert arclength -> angular parameter (vectorized, by interpolation)."""
        sgrid, cum = self._arclength_table
        return np.interp(np.asarray(ell, dtype=float), cum, sgrid)

    @cached_property
    def _dense_boundary(self):
        s = np.linspace(0.0, TWO_PI, _DENSE_SAMPLES, endpoint=False)
        return self.boundary_point(s)

    def contains(self, points) -> np.ndarray:
        """Boolean containment test (vectorized)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        if self.kind == "disc":
            (r,) = self.params
            return x * x + y * y <= r * r
        if self.kind == "ellipse":
            a, b = self.params
            return (x / a) ** 2 + (y / b) ** 2 <= 1.0
        if self.kind == "superellipse":
            a, b, p = self.params
            return np.abs(x / a) ** p + np.abs(y / b) ** p <= 1.0
        if self.kind == "support":
            grid = np.linspace(0.0, TWO_PI, 720, endpoint=False)
            omega = np.stack([np.cos(grid), np.sin(grid)], axis=0)  # (2, g)
            hvals = self._support(grid)
            return np.all(pts @ omega <= hvals[None, :], axis=1)
        raise DomainError(f"unknown kind {self.kind!r}")

    def boundary_distance(self, points):
        """Approximate distance from interior points to the boundary.

        Distance to a dense boundary sample; the sampling error is far below
        any mesh size this is used for (inset filtering only, not contractual).
        """
        from scipy.spatial import cKDTree

        tree = cKDTree(self._dense_boundary)
        d, _ = tree.query(np.asarray(points, dtype=float))
        return d

    def diameter(self) -> float:
        pts = self._dense_boundary[:: _DENSE_SAMPLES // 512]
        d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
        return float(np.sqrt(d2.max()))

    def winding_number(self) -> int:
        """Winding of the boundary curve about the sample centroid."""
        pts = self._dense_boundary
        center = pts.mean(axis=0)
        ang = np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0])
        dw = np.diff(np.concatenate([ang, ang[:1]]))
        dw = (dw + np.pi) % TWO_PI - np.pi
        return int(round(dw.sum() / TWO_PI))


def _refined_extrema(dom: ConvexDomain) -> tuple[float, float]:
    """Curvature extrema by dense sampling plus golden-section refinement."""
    n = _DENSE_SAMPLES
    s = (np.arange(n) + 0.5) * (TWO_PI / n)  # offset grid: avoids K=0 vertices
    k = dom.curvature(s)
    gr = (math.sqrt(5.0) - 1.0) / 2.0

    def refine(idx, sign):
        lo = s[idx] - TWO_PI / n
        hi = s[idx] + TWO_PI / n
        a_, b_ = lo, hi
        c_ = b_ - gr * (b_ - a_)
        d_ = a_ + gr * (b_ - a_)
        fc = sign * float(dom.curvature(c_))
        fd = sign * float(dom.curvature(d_))
        while (b_ - a_) > _EXTREMA_TOL:
            if fc < fd:
                b_, d_, fd = d_, c_, fc
                c_ = b_ - gr * (b_ - a_)
                fc = sign * float(dom.curvature(c_))
            else:
                a_, c_, fc = c_, d_, fd
                d_ = a_ + gr * (b_ - a_)
                fd = sign * float(dom.curvature(d_))
        smid = 0.5 * (a_ + b_)
        return sign * float(dom.curvature(smid))

    kmin = refine(int(np.argmin(k)), +1.0)
    kmax = -refine(int(np.argmax(k)), -1.0)
    return min(kmin, float(k.min())), max(kmax, float(k.max()))


def build_domain(kind: str, params) -> ConvexDomain:
    """Construct a strictly convex domain and cache its curvature extrema.

    Parameters
    ----------
    kind : one of ``disc``, ``ellipse``, ``superellipse``, ``support``
    params : parameter vector for the kind (see module docstring)

    Raises
    ------
    DomainError
        for parameters violating the kind constraints or convexity.
    """
    params = tuple(float(p) for p in np.atleast_1d(params))
    if kind == "disc":
        if len(params) != 1 or params[0] <= 0:
            raise DomainError(f"disc needs params (R,) with R > 0, got {params}")
        r = params[0]
        dom = ConvexDomain(kind, params, 1.0 / r, 1.0 / r)
    elif kind == "ellipse":
        if len(params) != 2:
            raise DomainError(f"ellipse needs params (a, b), got {params}")
        a, b = params
        if not (a >= b > 0):
            raise DomainError(f"ellipse needs a >= b > 0, got a={a}, b={b}")
        # closed-form extrema: flattest at the minor-axis vertices (K = b/a^2),
        # most curved at the major-axis vertices (K = a/b^2)
        dom = ConvexDomain(kind, params, b / a**2, a / b**2)
    elif kind == "superellipse":
        if len(params) != 3:
            raise DomainError(f"superellipse needs params (a, b, p), got {params}")
        a, b, p = params
        if not (a >= b > 0):
            raise DomainError(f"superellipse needs a >= b > 0, got a={a}, b={b}")
        if p <= 2:
            raise DomainError(f"superellipse exponent must satisfy p > 2, got p={p}")
        dom = ConvexDomain(kind, params)
        kmin, kmax = _refined_extrema(dom)
        dom = ConvexDomain(kind, params, kmin, kmax)
    elif kind == "support":
        if len(params) < 1 or len(params) % 2 == 0:
            raise DomainError(
                "support kind needs params (c0, a1, b1, ..., ak, bk), "
                f"got {len(params)} values"
            )
        dom = ConvexDomain(kind, params)
        s = (np.arange(_DENSE_SAMPLES) + 0.5) * (TWO_PI / _DENSE_SAMPLES)
        radius = dom._support(s) + dom._support(s, deriv=2)
        if radius.min() <= 0:
            raise DomainError(
                "support function is not strictly convex: min(h + h'') = "
                f"{radius.min():.6g} <= 0"
            )
        kmin, kmax = _refined_extrema(dom)
        dom = ConvexDomain(kind, params, kmin, kmax)
    else:
        raise DomainError(f"unknown domain kind {kind!r}")

    _check_convexity(dom)
    return dom


def _check_convexity(dom: ConvexDomain) -> None:
    s = (np.arange(_DENSE_SAMPLES) + 0.5) * (TWO_PI / _DENSE_SAMPLES)
    k = dom.curvature(s)
    if not np.all(np.isfinite(k)) or k.min() <= 0:
        raise DomainError(
            f"{dom.kind} boundary is not strictly convex on the sample grid "
            f"(min K = {k.min():.6g})"
        )
    if dom.winding_number() != 1:
        raise DomainError(f"{dom.kind} boundary is not a simple closed curve")


def curvature_at(domain: ConvexDomain, s):
    """Boundary curvature at parameter ``s`` (exact closed form per kind)."""
    return domain.curvature(s)


def fd_curvature(domain: ConvexDomain, s, delta: float = 1e-3):
    """Independent curvature estimate: centered differences of the tangent
    angle with one Richardson extrapolation step.  Used to cross-check the
    closed forms; not a substitute for them.
    """
    s = _as_array(s)

    def tangent_angle(theta, d):
        v = (domain.boundary_point(theta + d) - domain.boundary_point(theta - d)) / (2 * d)
        return np.arctan2(v[..., 1], v[..., 0]), np.linalg.norm(v, axis=-1)

    def estimate(d):
        phi_p, _ = tangent_angle(s + d, d)
        phi_m, _ = tangent_angle(s - d, d)
        _, speed = tangent_angle(s, d)
        dphi = np.mod(phi_p - phi_m + np.pi, TWO_PI) - np.pi
        return dphi / (2 * d) / speed  # K = (dphi/dtheta) / |r'(theta)|

    k1 = estimate(delta)
    k2 = estimate(delta / 2.0)
    return (4.0 * k2 - k1) / 3.0

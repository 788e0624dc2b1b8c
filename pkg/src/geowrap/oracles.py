"""Independent numerical oracles for the geometric and probabilistic claims.

Everything here deliberately avoids the code paths it is used to check:
Jacobians come from central finite differences in an orthonormal tangent
chart built by Gram-Schmidt in the ambient form, normalization comes from
trapezoid quadrature in the equal-area chart, geodesics and parallel
transport can be re-derived by Runge-Kutta integration of their defining
ODEs, and sampled measures are compared through binned total variation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .charts import lambert_forward
from .manifolds import EUCLIDEAN, HYPERBOLOID, SPHERE, GeometryError, Manifold

__all__ = [
    "GridTooLargeError",
    "GridSpec",
    "fd_jacobian_det",
    "grid_normalization",
    "histogram_probs",
    "tv_distance",
    "pushforward_tv_distance",
    "sup_norm_gap",
    "integrate_geodesic",
    "integrate_transport",
    "point_appended_basis",
    "form_defect",
]

_GRID_GUARD = 10**7


class GridTooLargeError(ValueError):
    """A grid request exceeds the evaluation-count guard."""


@dataclass(frozen=True)
class GridSpec:
    """Per-axis (min, max, count) triples.  ``count`` is the number of grid
    points for quadrature grids and the number of bins for histograms."""

    axes: tuple

    def __post_init__(self):
        axes = tuple((float(a), float(b), int(c)) for a, b, c in self.axes)
        for lo, hi, count in axes:
            if count < 2:
                raise ValueError("each axis needs at least 2 points")
            if not lo < hi:
                raise ValueError("axis minimum must be below its maximum")
        object.__setattr__(self, "axes", axes)
        if self.total > _GRID_GUARD:
            raise GridTooLargeError(
                f"grid would evaluate {self.total} points (guard {_GRID_GUARD})"
            )

    @classmethod
    def square(cls, half_width, count, center=(0.0, 0.0)):
        cx, cy = center
        return cls(
            (
                (cx - half_width, cx + half_width, count),
                (cy - half_width, cy + half_width, count),
            )
        )

    @property
    def total(self):
        n = 1
        for _, _, count in self.axes:
            n *= count
        return n

    def points(self, axis):
        lo, hi, count = self.axes[axis]
        return np.linspace(lo, hi, count)

    def edges(self, axis):
        lo, hi, count = self.axes[axis]
        return np.linspace(lo, hi, count + 1)

    def centers(self, axis):
        e = self.edges(axis)
        return 0.5 * (e[:-1] + e[1:])


# -- finite-difference Jacobians ---------------------------------------------


def _orthonormal_tangent_basis(manifold, z0):
    """Gram-Schmidt basis of the tangent space at z0, orthonormal in the
    ambient form (Minkowski on the hyperboloid, Euclidean otherwise)."""
    m = manifold.ambient_dim
    sign = -1.0 if manifold.kind == HYPERBOLOID else 1.0
    denom = sign * manifold.scale**2  # <z0, z0> in the form
    candidates = []
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        w = e - (manifold.inner(e, z0) / denom) * z0
        candidates.append((float(manifold.inner(w, w)), w))
    candidates.sort(key=lambda t: -t[0])
    basis = []
    for _, w in candidates:
        for b in basis:
            w = w - manifold.inner(w, b) * b
        norm2 = float(manifold.inner(w, w))
        if norm2 > 1e-12:
            basis.append(w / np.sqrt(norm2))
        if len(basis) == manifold.dim:
            break
    if len(basis) != manifold.dim:
        raise GeometryError("failed to build a tangent basis")
    return np.array(basis)


def fd_jacobian_det(f, u, manifold=None, h=1e-5):
    """|det| of the Jacobian of ``f`` at ``u`` by central differences.

    ``f`` maps plane coordinates to either plain vectors (``manifold=None``)
    or points of a curved manifold; in that case the image is expressed in an
    orthonormal chart of the tangent space at f(u) (form-orthogonal
    projection), which has unit area distortion at its center, so the value
    is the Jacobian with respect to the surface measure, O(h^2) accurate.
    Raises the domain error of ``f`` itself if the stencil leaves the domain.
    """
    u = np.asarray(u, dtype=float)
    k = u.shape[-1]
    if manifold is None:
        chart = lambda z: np.asarray(z, dtype=float)
    else:
        z0 = f(u)
        basis = _orthonormal_tangent_basis(manifold, z0)
        if manifold.kind == HYPERBOLOID:
            J = manifold.form_matrix()
            chart = lambda z: (basis @ (J @ (np.asarray(z) - z0)))
        else:
            chart = lambda z: basis @ (np.asarray(z) - z0)
    cols = []
    for j in range(k):
        step = np.zeros(k)
        step[j] = h
        cols.append((chart(f(u + step)) - chart(f(u - step))) / (2.0 * h))
    return float(abs(np.linalg.det(np.stack(cols, axis=-1))))


# -- normalization by quadrature ----------------------------------------------


def grid_normalization(dist, grid, chunk=200_000):
    """Trapezoid integral of exp(dist.log_pdf) over the manifold.

    The integration chart is the equal-area map at the base point, whose
    area element is Euclidean, so the integral of the transported density
    over the plane grid is the total mass (1 for a correctly normalized
    density whose support the grid covers).  The grid must stay inside the
    evaluation guard; sphere grids are masked to the chart's open disk.
    """
    if len(grid.axes) != 2:
        raise ValueError("normalization grids are two-dimensional")
    m = dist.manifold
    xs = grid.points(0)
    ys = grid.points(1)
    vals = np.empty((xs.size, ys.size))
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    flat = np.column_stack([X.ravel(), Y.ravel()])
    out = np.full(flat.shape[0], -np.inf)
    if m.kind == SPHERE:
        usable = np.sum(flat * flat, axis=-1) < (2.0 * m.scale) ** 2 * (1.0 - 1e-12)
    else:
        usable = np.ones(flat.shape[0], dtype=bool)
    idx = np.flatnonzero(usable)
    for start in range(0, idx.size, chunk):
        rows = idx[start : start + chunk]
        if m.kind == EUCLIDEAN:
            pts = flat[rows]
        else:
            pts = lambert_forward(m, flat[rows])
        out[rows] = dist.log_pdf(pts)
    vals = np.exp(out).reshape(xs.size, ys.size)
    return float(np.trapezoid(np.trapezoid(vals, ys, axis=1), xs))


# -- sampled-measure comparisons ----------------------------------------------


def histogram_probs(u, bins):
    """Normalized 2-D histogram over the bin grid plus an outside bucket."""
    H, _, _ = np.histogram2d(u[:, 0], u[:, 1], bins=[bins.edges(0), bins.edges(1)])
    n = u.shape[0]
    inside = H / n
    return inside, 1.0 - float(inside.sum())


def tv_distance(p, q, p_out=0.0, q_out=0.0):
    """Total-variation distance between two binned laws: half the L1 gap."""
    return 0.5 * (float(np.abs(np.asarray(p) - np.asarray(q)).sum()) + abs(p_out - q_out))


def pushforward_tv_distance(dist, n, bins, rng):
    """TV distance between the binned empirical law of the sampler (pulled
    back to plane coordinates) and the binned analytic plane density.

    Analytic bin masses are midpoint density times bin area; mass outside the
    grid goes to a shared overflow bucket.
    """
    if n < 10**4:
        raise ValueError("need at least 1e4 samples for a stable comparison")
    u = dist.wrapping.unwrap(dist.sample(rng, n))
    emp, emp_out = histogram_probs(u, bins)
    cx = bins.centers(0)
    cy = bins.centers(1)
    X, Y = np.meshgrid(cx, cy, indexing="ij")
    centers = np.column_stack([X.ravel(), Y.ravel()])
    dens = np.exp(dist.log_pdf_plane(centers)).reshape(cx.size, cy.size)
    area = (cx[1] - cx[0]) * (cy[1] - cy[0])
    ana = dens * area
    ana_out = max(0.0, 1.0 - float(ana.sum()))
    return tv_distance(emp, ana, emp_out, ana_out)


def sup_norm_gap(f, g, grid):
    """max |f - g| over the grid points (one axis)."""
    if len(grid.axes) != 1:
        raise ValueError("sup-norm grids are one-dimensional")
    x = grid.points(0)
    return float(np.max(np.abs(np.asarray(f(x)) - np.asarray(g(x)))))


# -- ODE cross-checks ----------------------------------------------------------


def _geodesic_acc(manifold, v, x):
    s2 = manifold.scale**2
    if manifold.kind == HYPERBOLOID:
        return (manifold.inner(v, v) / s2) * x
    if manifold.kind == SPHERE:
        return -(manifold.inner(v, v) / s2) * x
    return np.zeros_like(x)


def integrate_geodesic(manifold, p, v, steps=1000):
    """Endpoint of the geodesic with initial point p and velocity v at time 1,
    by fixed-step RK4 on x'' = (curvature sign) <x',x'>/scale^2 * x."""
    x = np.array(p, dtype=float)
    w = np.array(v, dtype=float)
    h = 1.0 / steps
    for _ in range(steps):
        k1x, k1v = w, _geodesic_acc(manifold, w, x)
        k2x = w + 0.5 * h * k1v
        k2v = _geodesic_acc(manifold, k2x, x + 0.5 * h * k1x)
        k3x = w + 0.5 * h * k2v
        k3v = _geodesic_acc(manifold, k3x, x + 0.5 * h * k2x)
        k4x = w + h * k3v
        k4v = _geodesic_acc(manifold, k4x, x + h * k3x)
        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        w = w + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return x


def integrate_transport(manifold, p, v, w, steps=1000):
    """Parallel transport of tangent w along the geodesic from p with initial
    velocity v (to time 1), integrating the first-order transport ODE jointly
    with the geodesic."""
    sign = 1.0 if manifold.kind == HYPERBOLOID else -1.0
    s2 = manifold.scale**2

    def acc(state):
        x, xv, wv = state
        dw = sign * (manifold.inner(wv, xv) / s2) * x
        return (xv, _geodesic_acc(manifold, xv, x), dw)

    state = (np.array(p, float), np.array(v, float), np.array(w, float))
    h = 1.0 / steps

    def add(s, dt, ks):
        return tuple(a + dt * b for a, b in zip(s, ks))

    for _ in range(steps):
        k1 = acc(state)
        k2 = acc(add(state, 0.5 * h, k1))
        k3 = acc(add(state, 0.5 * h, k2))
        k4 = acc(add(state, h, k3))
        state = tuple(
            a + (h / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
            for a, b1, b2, b3, b4 in zip(state, k1, k2, k3, k4)
        )
    return state[2]


# -- counterexample material ----------------------------------------------------


def point_appended_basis(p):
    """The matrix [e_1 | ... | e_k | p]: it moves the base point of the unit
    hyperboloid to p but is not form-preserving for generic p, which is why
    the canonical boost is used instead.  Exposed for demonstration."""
    p = np.asarray(p, dtype=float)
    A = np.eye(p.size)
    A[:, -1] = p
    return A


def form_defect(manifold, A):
    """Frobenius norm of A^T J A - J (the form-preservation residual)."""
    J = manifold.form_matrix()
    return float(np.linalg.norm(A.T @ J @ A - J))

"""Exact geometry of the constant-curvature model spaces embedded in R^{k+1}.

Three model spaces are supported: the upper-sheet hyperboloid of radius R
(curvature -1/R^2), the round sphere of radius K (curvature +1/K^2), and flat
Euclidean space as the zero-curvature reference.  Points and tangent vectors
are plain numpy arrays in ambient coordinates with the distinguished
coordinate last; every operation broadcasts over leading axes, so a stack of
points evaluates in a single call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "HYPERBOLOID",
    "SPHERE",
    "EUCLIDEAN",
    "GeometryError",
    "InvalidPointError",
    "WrongSheetError",
    "AntipodalError",
    "OutOfDomainError",
    "minkowski_inner",
    "Manifold",
]

HYPERBOLOID = "hyperboloid"
SPHERE = "sphere"
EUCLIDEAN = "euclidean"
_KINDS = (HYPERBOLOID, SPHERE, EUCLIDEAN)

# Tolerances used across the geometric layer.
POINT_ATOL = 1e-8        # accepted constraint residual for user-supplied points
TANGENT_ATOL = 1e-10     # accepted tangency residual
_DRIFT_TOL = 1e-12       # re-projection threshold after exp / isometry steps
_ANTIPODAL_TOL = 1e-12


class GeometryError(ValueError):
    """An argument is unusable for a geometric operation."""


class InvalidPointError(GeometryError):
    """Coordinates violate the manifold constraint beyond tolerance."""


class WrongSheetError(InvalidPointError):
    """Hyperboloid coordinates with non-positive last component (lower sheet)."""


class AntipodalError(GeometryError):
    """Operation undefined at antipodal sphere points (log, transport, moves)."""


class OutOfDomainError(GeometryError):
    """Argument lies outside the domain of a chart or wrapping map."""


def minkowski_inner(x, y):
    """Minkowski pairing sum_{i<=k} x_i*y_i - x_{k+1}*y_{k+1} on the last axis.

    Symmetric and bilinear; both arguments must share their last-axis length,
    which must be at least 2.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] < 2 or x.shape[-1] != y.shape[-1]:
        raise GeometryError(
            f"need matching ambient vectors of length >= 2, "
            f"got {x.shape[-1]} and {y.shape[-1]}"
        )
    return np.sum(x[..., :-1] * y[..., :-1], axis=-1) - x[..., -1] * y[..., -1]


def _unit_last_axis(v, norm):
    """v / norm with the 0/0 direction resolved to zero."""
    safe = np.where(norm > 0.0, norm, 1.0)
    return v / safe[..., None]


@dataclass(frozen=True)
class Manifold:
    """A model space: ``kind`` in {hyperboloid, sphere, euclidean}, intrinsic
    dimension ``dim`` (k), and ``scale`` = radius R resp. K (ignored for
    Euclidean, kept at 1)."""

    kind: str
    dim: int
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise GeometryError(f"unknown manifold kind {self.kind!r}")
        if self.dim < 1:
            raise GeometryError("manifold dimension must be >= 1")
        if not (self.scale > 0.0) or not np.isfinite(self.scale):
            raise GeometryError("manifold scale must be a positive real")

    # -- constructors ------------------------------------------------------

    @classmethod
    def hyperboloid(cls, dim, radius=1.0):
        return cls(HYPERBOLOID, int(dim), float(radius))

    @classmethod
    def sphere(cls, dim, radius=1.0):
        return cls(SPHERE, int(dim), float(radius))

    @classmethod
    def euclidean(cls, dim):
        return cls(EUCLIDEAN, int(dim), 1.0)

    # -- basic structure ---------------------------------------------------

    @property
    def ambient_dim(self):
        return self.dim if self.kind == EUCLIDEAN else self.dim + 1

    @property
    def curvature(self):
        if self.kind == HYPERBOLOID:
            return -1.0 / self.scale**2
        if self.kind == SPHERE:
            return 1.0 / self.scale**2
        return 0.0

    @property
    def base_point(self):
        """The distinguished origin: (0,..,0,R), (0,..,0,-K), or the zero vector."""
        p = np.zeros(self.ambient_dim)
        if self.kind == HYPERBOLOID:
            p[-1] = self.scale
        elif self.kind == SPHERE:
            p[-1] = -self.scale
        return p

    def form_matrix(self):
        """Matrix of the ambient bilinear form (diag(1,..,1,-1) or identity)."""
        J = np.eye(self.ambient_dim)
        if self.kind == HYPERBOLOID:
            J[-1, -1] = -1.0
        return J

    def inner(self, x, y):
        """Ambient bilinear form pairing (Minkowski or Euclidean dot)."""
        if self.kind == HYPERBOLOID:
            return minkowski_inner(x, y)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.sum(x * y, axis=-1)

    # -- point validation --------------------------------------------------

    def constraint_residual(self, x):
        """|<x,x>/scale^2 -+ 1|: zero exactly on the manifold."""
        x = np.asarray(x, dtype=float)
        if self.kind == HYPERBOLOID:
            return np.abs(minkowski_inner(x, x) / self.scale**2 + 1.0)
        if self.kind == SPHERE:
            return np.abs(np.sum(x * x, axis=-1) / self.scale**2 - 1.0)
        return np.zeros(x.shape[:-1])

    def point(self, coords, atol=POINT_ATOL):
        """Validate ambient coordinates and return them projected exactly onto
        the manifold.  Residuals beyond ``atol`` raise; a hyperboloid point on
        the lower sheet raises the sheet-specific error."""
        x = np.array(coords, dtype=float)
        if x.shape[-1] != self.ambient_dim:
            raise GeometryError(
                f"expected {self.ambient_dim} ambient coordinates, got {x.shape[-1]}"
            )
        if self.kind == EUCLIDEAN:
            return x
        if self.kind == HYPERBOLOID:
            if np.any(x[..., -1] <= 0.0):
                raise WrongSheetError(
                    "hyperboloid points need a positive last coordinate"
                )
            if np.any(minkowski_inner(x, x) >= 0.0):
                raise InvalidPointError("coordinates are not timelike")
        if np.any(self.constraint_residual(x) > atol):
            raise InvalidPointError(
                f"constraint residual exceeds {atol} on the {self.kind}"
            )
        return self.project(x)

    def project(self, x):
        """Rescale ambient coordinates onto the manifold (drift control)."""
        x = np.asarray(x, dtype=float)
        if self.kind == EUCLIDEAN:
            return x
        if self.kind == HYPERBOLOID:
            q = -minkowski_inner(x, x)
        else:
            q = np.sum(x * x, axis=-1)
        return x * (self.scale / np.sqrt(q))[..., None]

    def _maybe_project(self, x):
        if self.kind == EUCLIDEAN:
            return x
        if np.any(self.constraint_residual(x) > _DRIFT_TOL):
            return self.project(x)
        return x

    # -- tangent vectors ---------------------------------------------------

    def tangency_residual(self, p, v):
        """|<p,v>|/scale^2: zero exactly for tangent vectors at p."""
        return np.abs(self.inner(p, v)) / self.scale**2

    def tangent(self, p, v, atol=TANGENT_ATOL):
        """Validate that v is tangent at p (within ``atol``) and return it."""
        v = np.asarray(v, dtype=float)
        if self.kind == EUCLIDEAN:
            return v
        if np.any(self.tangency_residual(p, v) > atol):
            raise GeometryError(f"vector is not tangent within {atol}")
        return v

    def tangent_norm(self, v):
        """Riemannian norm of a tangent vector (the form is positive there)."""
        if self.kind == HYPERBOLOID:
            return np.sqrt(np.maximum(minkowski_inner(v, v), 0.0))
        v = np.asarray(v, dtype=float)
        return np.sqrt(np.sum(v * v, axis=-1))

    def embed_tangent(self, u):
        """Lift k intrinsic coordinates to the ambient tangent vector
        (u_1,..,u_k, 0) at the base point (identity map for Euclidean)."""
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.dim:
            raise GeometryError(f"expected {self.dim} tangent coordinates")
        if self.kind == EUCLIDEAN:
            return u
        return np.concatenate([u, np.zeros(u.shape[:-1] + (1,))], axis=-1)

    def spatial(self, x):
        """First k ambient coordinates (the tangent-plane coordinates at the
        base point under orthogonal projection)."""
        x = np.asarray(x, dtype=float)
        return x if self.kind == EUCLIDEAN else x[..., :-1]

    # -- metric operations -------------------------------------------------

    def distance(self, a, b):
        """Geodesic distance.

        Hyperboloid: R*acosh(-<a,b>/R^2); sphere: K*acos(<a,b>/K^2) with the
        cosine clamped into [-1, 1]; Euclidean: the usual norm.
        """
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.shape[-1] != b.shape[-1] or a.shape[-1] != self.ambient_dim:
            raise GeometryError("points have mismatched ambient dimension")
        s2 = self.scale**2
        if self.kind == HYPERBOLOID:
            c = np.maximum(-minkowski_inner(a, b) / s2, 1.0)
            return self.scale * np.arccosh(c)
        if self.kind == SPHERE:
            c = np.clip(np.sum(a * b, axis=-1) / s2, -1.0, 1.0)
            return self.scale * np.arccos(c)
        return np.sqrt(np.sum((a - b) ** 2, axis=-1))

    def exp(self, p, v):
        """Exponential map: follow the geodesic from p with initial velocity v
        for unit time.

        Hyperboloid: cosh(t) p + R sinh(t) v/|v| with t = |v|/R; sphere the
        cos/sin analogue; the zero vector returns p exactly.
        """
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.kind == EUCLIDEAN:
            return p + v
        t = self.tangent_norm(v) / self.scale
        ts = np.where(t < 1e-8, 1.0, t)
        if self.kind == HYPERBOLOID:
            radial = np.where(t < 1e-8, 1.0 + t * t / 6.0, np.sinh(ts) / ts)
            x = np.cosh(t)[..., None] * p + radial[..., None] * v
        else:
            radial = np.where(t < 1e-8, 1.0 - t * t / 6.0, np.sin(ts) / ts)
            x = np.cos(t)[..., None] * p + radial[..., None] * v
        return self._maybe_project(x)

    def log(self, p, q):
        """Inverse of the exponential map at p.

        Returns the tangent vector u at p with exp(p, u) = q and |u| equal to
        the geodesic distance.  Undefined for antipodal sphere points.
        """
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        s2 = self.scale**2
        if self.kind == EUCLIDEAN:
            return q - p
        if self.kind == HYPERBOLOID:
            a = np.maximum(-minkowski_inner(p, q) / s2, 1.0)
            s = a - 1.0
            safe = np.where(s < 1e-7, 2.0, a)
            g = np.where(
                s < 1e-7,
                1.0 - s / 3.0,
                np.arccosh(safe) / np.sqrt(safe * safe - 1.0),
            )
            return g[..., None] * (q - a[..., None] * p)
        c = np.clip(np.sum(p * q, axis=-1) / s2, -1.0, 1.0)
        if np.any(1.0 + c < _ANTIPODAL_TOL):
            raise AntipodalError("log map undefined at antipodal points")
        s = 1.0 - c
        safe = np.where(s < 1e-7, 0.0, c)
        g = np.where(
            s < 1e-7,
            1.0 + s / 3.0,
            np.arccos(safe) / np.sqrt(1.0 - safe * safe),
        )
        return g[..., None] * (q - c[..., None] * p)

    def transport(self, src, dst, v):
        """Parallel transport of tangent v along the minimizing geodesic from
        src to dst (closed form: v shifted along src+dst by a pairing
        coefficient); a linear isometry of the tangent spaces."""
        src = np.asarray(src, dtype=float)
        dst = np.asarray(dst, dtype=float)
        v = np.asarray(v, dtype=float)
        s2 = self.scale**2
        if self.kind == EUCLIDEAN:
            return v
        if self.kind == HYPERBOLOID:
            a = -minkowski_inner(src, dst) / s2
            coef = minkowski_inner(dst, v) / (s2 * (a + 1.0))
            return v + coef[..., None] * (src + dst)
        c = np.sum(src * dst, axis=-1) / s2
        if np.any(1.0 + c < _ANTIPODAL_TOL):
            raise AntipodalError("transport undefined at antipodal points")
        coef = np.sum(dst * v, axis=-1) / (s2 * (1.0 + c))
        return v - coef[..., None] * (src + dst)

    # -- isometries --------------------------------------------------------

    def isometry_to(self, p):
        """The canonical isometry matrix moving the base point to p.

        Hyperboloid: the Lorentz boost along the geodesic from the base point
        to p; sphere: the rotation in span{base, p} fixing the orthogonal
        complement.  Both restrict to parallel transport on the tangent space
        at the base point.
        """
        if self.kind == EUCLIDEAN:
            raise GeometryError("isometry matrices are defined for the curved spaces")
        p = self.point(p)
        if p.ndim != 1:
            raise GeometryError("isometry_to takes a single point")
        m = self.ambient_dim
        A = np.eye(m)
        if self.kind == HYPERBOLOID:
            ch = p[-1] / self.scale
            xs = p[:-1] / self.scale
            sh = np.sqrt(max(ch * ch - 1.0, 0.0))
            if sh < 1e-16:
                return A
            n = xs / sh
            A[:-1, :-1] += (ch - 1.0) * np.outer(n, n)
            A[:-1, -1] = sh * n
            A[-1, :-1] = sh * n
            A[-1, -1] = ch
            return A
        a = self.base_point / self.scale
        b = p / self.scale
        c = float(np.dot(a, b))
        if 1.0 + c < _ANTIPODAL_TOL:
            raise AntipodalError("no canonical rotation onto the antipode")
        w = b - c * a
        nw = float(np.linalg.norm(w))
        if nw < 1e-16:
            return A
        w = w / nw
        sin_t = nw
        cos_t = c
        A += sin_t * (np.outer(w, a) - np.outer(a, w))
        A += (cos_t - 1.0) * (np.outer(a, a) + np.outer(w, w))
        return A

    def inverse_isometry(self, A):
        """Inverse of a form-preserving matrix: J A^T J resp. A^T."""
        A = np.asarray(A, dtype=float)
        if self.kind == HYPERBOLOID:
            J = self.form_matrix()
            return J @ A.T @ J
        return A.T

    def apply_isometry(self, A, x):
        """Apply an isometry matrix to points (batched), re-projecting to kill
        floating-point drift."""
        A = np.asarray(A, dtype=float)
        x = np.asarray(x, dtype=float)
        if A.shape != (self.ambient_dim, self.ambient_dim):
            raise GeometryError("isometry matrix has the wrong shape")
        if x.shape[-1] != self.ambient_dim:
            raise GeometryError("points have mismatched ambient dimension")
        return self._maybe_project(x @ A.T)

    def rotation_fixing_base(self, theta):
        """Rotation by theta in the first two ambient coordinates; fixes the
        base point and preserves the form on both curved spaces."""
        if self.dim < 2:
            raise GeometryError("need dim >= 2 for a base-fixing rotation")
        A = np.eye(self.ambient_dim)
        c, s = np.cos(theta), np.sin(theta)
        A[0, 0] = c
        A[0, 1] = -s
        A[1, 0] = s
        A[1, 1] = c
        return A

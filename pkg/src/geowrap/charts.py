"""Maps between the tangent plane at the base point and the manifold.

Two families are provided:

* the equal-area ("Lambert") plane-to-surface maps, whose Jacobian
  determinant is identically 1 with respect to the surface area measure, and
* composite wrapping maps that relocate a tangent-plane construction to an
  arbitrary location point, in three flavours:

  - ``exp_transport``:     parallel-transport the tangent draw to the
                           location, then apply the exponential map there;
  - ``isometry_exp``:      exponential map at the base point, then move by
                           the canonical isometry onto the location;
  - ``isometry_lambert``:  equal-area map at the base point, then the
                           canonical isometry (dimension 2 only).

Every map takes and returns numpy arrays and broadcasts over leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .manifolds import (
    EUCLIDEAN,
    HYPERBOLOID,
    SPHERE,
    AntipodalError,
    GeometryError,
    Manifold,
    OutOfDomainError,
)

__all__ = [
    "EXP_TRANSPORT",
    "ISOMETRY_EXP",
    "ISOMETRY_LAMBERT",
    "WRAP_KINDS",
    "lambert_forward",
    "lambert_inverse",
    "Wrapping",
]

EXP_TRANSPORT = "exp_transport"
ISOMETRY_EXP = "isometry_exp"
ISOMETRY_LAMBERT = "isometry_lambert"
WRAP_KINDS = (EXP_TRANSPORT, ISOMETRY_EXP, ISOMETRY_LAMBERT)


def _check_plane_coords(manifold, u):
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != manifold.dim:
        raise GeometryError(
            f"expected {manifold.dim} tangent-plane coordinates, got {u.shape[-1]}"
        )
    return u


def lambert_forward(manifold: Manifold, u):
    """Equal-area map from the tangent plane at the base point onto the
    surface (dimension 2).

    With r = |u|, the sphere of radius K receives
    ``(u*sqrt(1 - r^2/(4K^2)), r^2/(2K) - K)`` on the disk r < 2K, and the
    hyperboloid of radius R receives ``(u*sqrt(1 + r^2/(4R^2)), R + r^2/(2R))``
    on the whole plane.  Both send the origin to the base point and preserve
    area: the radial law solves r dr = (surface radial density) d(geodesic
    angle) exactly, so |det Jacobian| = 1 everywhere.
    """
    u = _check_plane_coords(manifold, u)
    if manifold.kind == EUCLIDEAN:
        return u
    if manifold.dim != 2:
        raise GeometryError("the equal-area map is defined for dimension 2")
    s = manifold.scale
    r2 = np.sum(u * u, axis=-1)
    if manifold.kind == SPHERE:
        if np.any(r2 >= (2.0 * s) ** 2):
            raise OutOfDomainError(
                f"equal-area domain on the sphere is the open disk |u| < {2 * s}"
            )
        shrink = np.sqrt(1.0 - r2 / (4.0 * s * s))
        last = r2 / (2.0 * s) - s
    else:
        shrink = np.sqrt(1.0 + r2 / (4.0 * s * s))
        last = s + r2 / (2.0 * s)
    x = np.concatenate([u * shrink[..., None], last[..., None]], axis=-1)
    return manifold._maybe_project(x)


def lambert_inverse(manifold: Manifold, z):
    """Inverse of :func:`lambert_forward`.

    Sphere: ``u = z_spatial * sqrt(2K/(K - z_last))`` (undefined at the
    antipode of the base point); hyperboloid:
    ``u = z_spatial * sqrt(2R/(R + z_last))``.
    """
    z = np.asarray(z, dtype=float)
    if manifold.kind == EUCLIDEAN:
        return z
    if manifold.dim != 2:
        raise GeometryError("the equal-area map is defined for dimension 2")
    if z.shape[-1] != manifold.ambient_dim:
        raise GeometryError("expected ambient point coordinates")
    s = manifold.scale
    if manifold.kind == SPHERE:
        denom = s - z[..., -1]
        if np.any(denom <= 1e-12 * s):
            raise OutOfDomainError("the antipode of the base point has no preimage")
    else:
        denom = s + z[..., -1]
    return z[..., :-1] * np.sqrt(2.0 * s / denom)[..., None]


@dataclass(frozen=True, eq=False)
class Wrapping:
    """A wrapping map ``u -> point`` of one of the three kinds, anchored at a
    ``location`` point on the manifold.

    ``wrap`` sends k tangent-plane coordinates to the manifold, ``unwrap``
    inverts it on the image, and ``log_det_jacobian`` gives the log volume
    distortion of ``wrap`` at u (0 identically for the equal-area kind).
    """

    manifold: Manifold
    location: np.ndarray = field(repr=False)
    kind: str = EXP_TRANSPORT

    def __post_init__(self):
        if self.kind not in WRAP_KINDS:
            raise GeometryError(f"unknown wrapping kind {self.kind!r}")
        loc = self.manifold.point(self.location)
        if loc.ndim != 1:
            raise GeometryError("location must be a single point")
        if self.kind == ISOMETRY_LAMBERT and self.manifold.kind != EUCLIDEAN:
            if self.manifold.dim != 2:
                raise GeometryError("the equal-area wrapping needs dimension 2")
        if self.manifold.kind == SPHERE:
            c = float(
                np.dot(self.manifold.base_point, loc) / self.manifold.scale**2
            )
            if 1.0 + c < 1e-12:
                raise AntipodalError(
                    "wrapping location may not be the antipode of the base point"
                )
        loc.setflags(write=False)
        object.__setattr__(self, "location", loc)

    # -- cached relocation data ---------------------------------------------

    @cached_property
    def _iso(self):
        return self.manifold.isometry_to(self.location)

    @cached_property
    def _iso_inv(self):
        return self.manifold.inverse_isometry(self._iso)

    @property
    def domain_radius(self):
        """Radius of the open disk of valid tangent-plane coordinates
        (infinite off the sphere)."""
        if self.manifold.kind != SPHERE:
            return np.inf
        s = self.manifold.scale
        return 2.0 * s if self.kind == ISOMETRY_LAMBERT else np.pi * s

    def _check_domain(self, u):
        if self.manifold.kind != SPHERE:
            return
        if np.any(np.sum(u * u, axis=-1) >= self.domain_radius**2):
            raise OutOfDomainError(
                f"tangent coordinates must satisfy |u| < {self.domain_radius:g}"
            )

    # -- the maps ------------------------------------------------------------

    def wrap(self, u):
        """Map tangent-plane coordinates to manifold points; ``wrap(0)`` is
        the location exactly."""
        m = self.manifold
        u = _check_plane_coords(m, u)
        if m.kind == EUCLIDEAN:
            return self.location + u
        self._check_domain(u)
        if u.ndim == 1 and not np.any(u):
            return self.location.copy()
        if self.kind == EXP_TRANSPORT:
            v = m.transport(m.base_point, self.location, m.embed_tangent(u))
            return m.exp(self.location, v)
        if self.kind == ISOMETRY_EXP:
            z = m.exp(m.base_point, m.embed_tangent(u))
        else:
            z = lambert_forward(m, u)
        return m.apply_isometry(self._iso, z)

    def unwrap(self, z):
        """Invert ``wrap`` on its image; sphere points outside the image (the
        antipodes of the relevant centers) raise the domain error."""
        u, ok = self.unwrap_masked(z)
        if not np.all(ok):
            raise OutOfDomainError("point is outside the image of the wrapping")
        return u

    def unwrap_masked(self, z):
        """Like ``unwrap`` but never raises for out-of-image points: returns
        ``(u, ok)`` where rows with ``ok == False`` hold zeros.  Used by
        density code, which treats such points as zero-probability."""
        m = self.manifold
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != m.ambient_dim:
            raise GeometryError("expected ambient point coordinates")
        if m.kind == EUCLIDEAN:
            return z - self.location, np.ones(z.shape[:-1], dtype=bool)
        ok = np.ones(z.shape[:-1], dtype=bool)
        if m.kind == SPHERE:
            # all three kinds miss exactly the antipode of the location
            c = np.sum(z * self.location, axis=-1) / m.scale**2
            ok = 1.0 + c > 1e-12
            if not np.all(ok):
                # keep the transform well-defined on masked rows
                z = np.where(ok[..., None], z, self.location)
        if self.kind == EXP_TRANSPORT:
            v = m.log(self.location, z)
            v0 = m.transport(self.location, m.base_point, v)
            return m.spatial(v0), ok
        y = m.apply_isometry(self._iso_inv, z)
        if self.kind == ISOMETRY_EXP:
            return m.spatial(m.log(m.base_point, y)), ok
        return lambert_inverse(m, y), ok

    def log_det_jacobian(self, u):
        """log |det d wrap(u)| with respect to the surface measure.

        Zero identically for the equal-area kind; for the exponential kinds it
        is ``(k-1) * log(sinh(t)/t)`` on the hyperboloid and
        ``(k-1) * log(sin(t)/t)`` on the sphere, with t = |u|/scale.
        Isometries and parallel transport contribute nothing (unit
        determinant).
        """
        m = self.manifold
        u = _check_plane_coords(m, u)
        r = np.sqrt(np.sum(u * u, axis=-1))
        if m.kind == EUCLIDEAN or self.kind == ISOMETRY_LAMBERT:
            return np.zeros_like(r)
        self._check_domain(u)
        t = r / m.scale
        ts = np.where(t < 1e-6, 1.0, t)
        if m.kind == HYPERBOLOID:
            # guard large t: log(sinh t / t) = t - log(2t) + log1p(-exp(-2t))
            big = t > 20.0
            core = np.where(
                t < 1e-6,
                t * t / 6.0 - t**4 / 180.0,
                np.log(np.sinh(np.where(big, 1.0, ts)) / ts),
            )
            out = np.where(big, t - np.log(2.0 * ts) + np.log1p(-np.exp(-2.0 * ts)), core)
        else:
            out = np.where(
                t < 1e-6,
                -t * t / 6.0 - t**4 / 180.0,
                np.log(np.sin(ts) / ts),
            )
        return (m.dim - 1) * out

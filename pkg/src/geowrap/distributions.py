"""Probability distributions built from the wrapping maps.

``WrappedNormal`` pushes a centered Euclidean Gaussian through a wrapping map
onto the manifold; its density carries the exact log-Jacobian correction of
the map plus an optional disk-truncation constant on the sphere.  Finite
mixtures and the circular reference density used in the high-concentration
comparison round out the module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky
from scipy.special import gammainc, logsumexp

from .charts import EXP_TRANSPORT, ISOMETRY_LAMBERT, Wrapping
from .manifolds import EUCLIDEAN, SPHERE, GeometryError, InvalidPointError

__all__ = [
    "TruncationInfeasibleError",
    "validate_covariance",
    "disk_truncation_constant",
    "WrappedNormal",
    "Mixture",
    "VonMises",
    "log_bessel_i0",
]

_LOG_2PI = math.log(2.0 * math.pi)


class TruncationInfeasibleError(ValueError):
    """Rejection sampling into the truncation disk would almost never accept."""


def validate_covariance(sigma, dim=None):
    """Check symmetry (1e-12) and positive definiteness; return a float copy."""
    S = np.array(sigma, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("covariance must be a square matrix")
    if dim is not None and S.shape[0] != dim:
        raise ValueError(f"covariance must be {dim}x{dim}")
    scale = max(1.0, float(np.max(np.abs(S))))
    if np.max(np.abs(S - S.T)) > 1e-12 * scale:
        raise ValueError("covariance must be symmetric")
    try:
        cholesky(S, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - scipy raises its own
        raise ValueError("covariance must be positive definite") from exc
    except Exception as exc:
        raise ValueError("covariance must be positive definite") from exc
    return S


def disk_truncation_constant(sigma, radius):
    """P(|U| < radius) for U ~ N(0, sigma) in the plane.

    For isotropic sigma = s^2 I this is the closed form
    ``1 - exp(-radius^2/(2 s^2))``.  Unequal eigenvalues use the classical
    series for the Gaussian mass of a centered disk: expanding the Bessel
    factor of the angular integral termwise gives

        P = sqrt(ab) * sum_m  d^(2m) (2m)! / (4^m (m!)^2 c^(2m+1))
                        * gammainc(2m+1, c r^2)

    with a = 1/(2 l1), b = 1/(2 l2), c = (a+b)/2, d = (a-b)/2 and l1, l2 the
    eigenvalues; the tail is geometric with ratio (d/c)^2 < 1 and the sum is
    cut when the bound drops below 1e-13 relative.  A full matrix reduces to
    the diagonal case by eigendecomposition (the disk is rotation invariant).
    """
    if not (radius > 0.0):
        raise ValueError("truncation radius must be positive")
    S = validate_covariance(sigma, dim=2)
    if not np.isfinite(radius):
        return 1.0
    lams = np.linalg.eigvalsh(S)
    a = 1.0 / (2.0 * lams[0])
    b = 1.0 / (2.0 * lams[1])
    c = 0.5 * (a + b)
    d = 0.5 * (a - b)
    t = radius * radius
    if abs(d) < 1e-14 * c:
        return -math.expm1(-c * t)
    q = (d / c) ** 2
    pref = math.sqrt(a * b)
    coef = 1.0 / c
    acc = coef * float(gammainc(1.0, c * t))
    for m in range(1, 100000):
        coef *= q * (2.0 * m - 1.0) / (2.0 * m)
        acc += coef * float(gammainc(2.0 * m + 1.0, c * t))
        if pref * coef * q / (1.0 - q) < 1e-13 * max(pref * acc, 1e-300):
            break
    else:  # pragma: no cover
        raise ValueError("truncation-constant series failed to converge")
    return min(pref * acc, 1.0)


@dataclass(frozen=True, eq=False)
class WrappedNormal:
    """Pushforward of N(0, sigma) on the tangent plane through a wrapping map.

    On the sphere the Gaussian is restricted to a centered disk before
    wrapping (radius defaults to sqrt(2)*K for the equal-area kind and to the
    injectivity radius pi*K for the exponential kinds) and the density is
    renormalized by the disk mass.  Off the sphere no truncation is allowed.
    """

    wrapping: Wrapping
    sigma: np.ndarray = field(repr=False)
    truncation_radius: float | None = None

    def __post_init__(self):
        m = self.wrapping.manifold
        S = validate_covariance(self.sigma, dim=m.dim)
        S.setflags(write=False)
        object.__setattr__(self, "sigma", S)
        radius = self.truncation_radius
        if m.kind == SPHERE:
            if m.dim != 2:
                raise GeometryError("sphere distributions are implemented for dimension 2")
            limit = self.wrapping.domain_radius
            if radius is None:
                radius = math.sqrt(2.0) * m.scale if (
                    self.wrapping.kind == ISOMETRY_LAMBERT
                ) else limit
            radius = float(radius)
            if not (0.0 < radius <= limit):
                raise ValueError(
                    f"sphere truncation radius must lie in (0, {limit:g}]"
                )
            object.__setattr__(self, "truncation_radius", radius)
        elif radius is not None:
            raise ValueError("truncation is a sphere-only option")
        L = cholesky(S, lower=True)
        L.setflags(write=False)
        object.__setattr__(self, "_chol", L)
        object.__setattr__(self, "_log_det", 2.0 * float(np.sum(np.log(np.diag(L)))))
        if self.truncation_radius is not None:
            const = disk_truncation_constant(S, self.truncation_radius)
            object.__setattr__(self, "_log_trunc", math.log(const))
            object.__setattr__(self, "_trunc_mass", const)
        else:
            object.__setattr__(self, "_log_trunc", 0.0)
            object.__setattr__(self, "_trunc_mass", 1.0)

    @property
    def manifold(self):
        return self.wrapping.manifold

    @property
    def dim(self):
        return self.wrapping.manifold.dim

    # -- sampling ------------------------------------------------------------

    def sample_plane(self, rng, n):
        """Draw n tangent-plane vectors (the Gaussian before wrapping),
        rejection-resampled into the truncation disk when one is set."""
        if n < 0:
            raise ValueError("sample count must be nonnegative")
        u = rng.standard_normal((n, self.dim)) @ self._chol.T
        radius = self.truncation_radius
        if radius is None:
            return u
        if self._trunc_mass < 1e-6:
            raise TruncationInfeasibleError(
                f"disk acceptance probability {self._trunc_mass:.3g} is too small"
            )
        r2 = radius * radius
        bad = np.flatnonzero(np.sum(u * u, axis=-1) >= r2)
        while bad.size:
            u[bad] = rng.standard_normal((bad.size, self.dim)) @ self._chol.T
            bad = bad[np.sum(u[bad] * u[bad], axis=-1) >= r2]
        return u

    def sample(self, rng, n):
        """Draw n points on the manifold (deterministic given the generator)."""
        return self.wrapping.wrap(self.sample_plane(rng, n))

    # -- density ---------------------------------------------------------------

    def log_pdf_plane(self, u):
        """Log-density in tangent-plane coordinates: the (possibly truncated)
        Gaussian with no Jacobian term."""
        u = np.asarray(u, dtype=float)
        half = cho_solve((self._chol, True), u.reshape(-1, self.dim).T)
        quad = np.sum(u.reshape(-1, self.dim).T * half, axis=0).reshape(u.shape[:-1])
        out = -0.5 * (self.dim * _LOG_2PI + self._log_det + quad) - self._log_trunc
        if self.truncation_radius is not None:
            inside = np.sum(u * u, axis=-1) < self.truncation_radius**2
            out = np.where(inside, out, -np.inf)
        return out

    def log_pdf(self, z):
        """Exact log-density at manifold points with respect to the surface
        measure: the plane Gaussian at the unwrapped coordinates minus the
        wrap log-Jacobian (and the truncation constant when set).  Points
        outside the wrap image have density zero (-inf), distinguished from
        off-manifold input, which raises."""
        z = np.asarray(z, dtype=float)
        single = z.ndim == 1
        m = self.manifold
        if np.any(m.constraint_residual(z) > 1e-6):
            raise InvalidPointError("points do not lie on the manifold")
        u, ok = self.wrapping.unwrap_masked(z)
        out = self.log_pdf_plane(u) - self.wrapping.log_det_jacobian(u)
        out = np.where(ok, out, -np.inf)
        return float(out) if single else out

    def spec_dict(self):
        """Plain-data description (used by the file formats)."""
        m = self.manifold
        spec = {
            "manifold": {"kind": m.kind, "dim": m.dim, "scale": m.scale},
            "variant": self.wrapping.kind,
            "location": [float(v) for v in self.wrapping.location],
            "sigma": [[float(v) for v in row] for row in self.sigma],
        }
        if self.truncation_radius is not None:
            spec["truncation_radius"] = float(self.truncation_radius)
        return spec


@dataclass(frozen=True, eq=False)
class Mixture:
    """Finite mixture of wrapped normals sharing one manifold and one
    wrapping kind."""

    weights: np.ndarray
    components: tuple

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        comps = tuple(self.components)
        if len(comps) < 1 or w.shape != (len(comps),):
            raise ValueError("need one positive weight per component")
        if np.any(w <= 0.0) or abs(float(np.sum(w)) - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")
        first = comps[0]
        for c in comps[1:]:
            if c.manifold != first.manifold or c.wrapping.kind != first.wrapping.kind:
                raise ValueError("components must share manifold and wrapping kind")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)

    @property
    def manifold(self):
        return self.components[0].manifold

    def log_pdf(self, z):
        z = np.asarray(z, dtype=float)
        single = z.ndim == 1
        stacked = np.stack(
            [np.atleast_1d(c.log_pdf(z)) for c in self.components], axis=0
        )
        out = logsumexp(stacked + np.log(self.weights)[:, None], axis=0)
        return float(out[0]) if single else out

    def sample(self, rng, n):
        idx = rng.choice(len(self.components), size=n, p=self.weights)
        out = np.empty((n, self.manifold.ambient_dim))
        for c, comp in enumerate(self.components):
            rows = np.flatnonzero(idx == c)
            if rows.size:
                out[rows] = comp.sample(rng, rows.size)
        return out


def log_bessel_i0(kappa):
    """log I0(kappa) to better than 1e-10 relative accuracy.

    Power series sum (kappa^2/4)^m / (m!)^2 for kappa <= 15; for larger
    arguments the scaled asymptotic expansion
    I0(k) ~ e^k/sqrt(2 pi k) * sum_j a_j k^-j with a_j = ((2j-1)!!)^2/(8^j j!),
    truncated at its smallest term.
    """
    k = float(kappa)
    if k < 0.0:
        raise ValueError("concentration must be nonnegative")
    if k <= 15.0:
        x = k * k / 4.0
        term = 1.0
        total = 1.0
        for m in range(1, 1000):
            term *= x / (m * m)
            total += term
            if term < 1e-17 * total:
                break
        return math.log(total)
    total = 1.0
    term = 1.0
    prev = math.inf
    for j in range(1, 60):
        term *= (2.0 * j - 1.0) ** 2 / (8.0 * j * k)
        if term >= prev:
            break
        total += term
        prev = term
        if term < 1e-17 * total:
            break
    return k + math.log(total) - 0.5 * math.log(2.0 * math.pi * k)


@dataclass(frozen=True)
class VonMises:
    """Circular density  exp(kappa*cos(angle - mean)) / (2 pi I0(kappa))."""

    mean: float = 0.0
    kappa: float = 1.0

    def __post_init__(self):
        if not (-math.pi <= self.mean < math.pi):
            raise ValueError("mean angle must lie in [-pi, pi)")
        if not (self.kappa > 0.0):
            raise ValueError("concentration must be positive")

    def log_pdf(self, angle):
        angle = np.asarray(angle, dtype=float)
        return (
            self.kappa * np.cos(angle - self.mean)
            - _LOG_2PI
            - log_bessel_i0(self.kappa)
        )

    def pdf(self, angle):
        return np.exp(self.log_pdf(angle))

"""Estimation for wrapped normals: covariance MLE, inverse-Wishart conjugate
updates, profile-likelihood location search, and EM for mixtures.

The covariance estimators work in unwrapped plane coordinates, where the
Lambert-variant density is an exact Gaussian and the estimators are the
classical ones.  The location estimator is a geodesic coordinate descent on
the profile likelihood (wrapped models admit no closed-form location MLE,
so this is an explicit numerical search with a monotone-objective
guarantee).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .charts import EXP_TRANSPORT, Wrapping
from .distributions import Mixture, WrappedNormal, validate_covariance
from .manifolds import EUCLIDEAN, SPHERE

__all__ = [
    "SigmaEstimate",
    "IWParams",
    "DegenerateMixtureError",
    "EMResult",
    "mle_sigma",
    "iw_posterior",
    "estimate_location",
    "em_fit",
]

_SINGULAR_REL = 1e-12


class DegenerateMixtureError(RuntimeError):
    """EM could not keep all mixture components populated."""


@dataclass(frozen=True)
class SigmaEstimate:
    """Covariance MLE together with the unnormalized scatter it came from."""

    sigma: np.ndarray
    scatter: np.ndarray  # sum of (weighted) outer products, not divided
    count: float  # total weight (the sample count when unweighted)
    singular: bool

    def __post_init__(self):
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=float))
        object.__setattr__(self, "scatter", np.asarray(self.scatter, dtype=float))


def _scatter(u, weights):
    if weights is None:
        w = np.ones(u.shape[0])
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (u.shape[0],):
            raise ValueError("weights must be one per sample")
        if np.any(w < 0.0):
            raise ValueError("weights must be nonnegative")
    total = float(w.sum())
    if total <= 0.0:
        raise ValueError("total weight must be positive")
    return (u * w[:, None]).T @ u, total


def mle_sigma(wrapping, points, weights=None):
    """Closed-form covariance MLE at a known location.

    Unwraps the samples through ``wrapping`` and returns the (weighted)
    average of outer products.  A singular estimate is reported through the
    ``singular`` flag rather than raised: with fewer samples than dimensions
    it is the honest answer.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[None, :]
    if points.shape[0] < 1:
        raise ValueError("need at least one sample")
    u = wrapping.unwrap(points)
    scatter, total = _scatter(u, weights)
    sigma = scatter / total
    sigma = 0.5 * (sigma + sigma.T)
    eig = np.linalg.eigvalsh(sigma)
    singular = bool(eig[0] <= _SINGULAR_REL * max(1.0, float(eig[-1])))
    return SigmaEstimate(sigma=sigma, scatter=scatter, count=total, singular=singular)


@dataclass(frozen=True)
class IWParams:
    """Inverse-Wishart parameters (degrees of freedom, scale matrix)."""

    nu: float
    phi: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        validate_covariance(phi, phi.shape[0])
        if not self.nu > phi.shape[0] - 1:
            raise ValueError("degrees of freedom must exceed dim - 1")
        object.__setattr__(self, "phi", phi)

    @property
    def dim(self):
        return self.phi.shape[0]

    def mean(self):
        """Mean of the distribution, defined for nu > dim + 1."""
        if not self.nu > self.dim + 1:
            raise ValueError("mean undefined for these degrees of freedom")
        return self.phi / (self.nu - self.dim - 1)


def iw_posterior(prior, wrapping, points):
    """Conjugate update: add the sample count to the degrees of freedom and
    the unwrapped scatter to the scale matrix.  Empty input returns the prior.

    The scatter is folded into the scale matrix one sample at a time, so
    updating with batch A and then batch B runs the exact same sequence of
    floating-point additions as updating with their concatenation — batch
    composition holds bitwise, not just approximately.
    """
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return prior
    if points.ndim == 1:
        points = points[None, :]
    u = wrapping.unwrap(points)
    if u.shape[-1] != prior.dim:
        raise ValueError("sample dimension does not match the prior")
    phi = prior.phi.copy()
    for row in u:
        phi += np.outer(row, row)
    return IWParams(nu=prior.nu + points.shape[0], phi=phi)


# -- location estimation ---------------------------------------------------


def _ridged(sigma, k):
    """Small ridge keeping profile covariances positive definite even when
    the weighted scatter is singular (symmetric or tiny clusters)."""
    tr = float(np.trace(sigma))
    eps = 1e-9 * max(tr / k, 1e-6)
    return sigma + eps * np.eye(k)


def _profile_objective(manifold, kind, points, weights, location):
    wrapping = Wrapping(manifold, manifold.point(location), kind=kind)
    u, ok = wrapping.unwrap_masked(points)
    if not np.all(ok):
        return -np.inf, None
    scatter, total = _scatter(u, weights)
    sigma = _ridged(0.5 * (scatter + scatter.T) / total, manifold.dim)
    dist = WrappedNormal(wrapping, sigma)
    lp = dist.log_pdf(points)
    w = np.ones(points.shape[0]) if weights is None else np.asarray(weights, float)
    value = float(np.dot(w, lp))
    if not np.isfinite(value):
        return -np.inf, None
    return value, dist


def _extrinsic_mean(manifold, points, weights):
    w = np.ones(points.shape[0]) if weights is None else np.asarray(weights, float)
    mean = (points * w[:, None]).sum(axis=0) / w.sum()
    if manifold.kind == EUCLIDEAN:
        return mean
    if manifold.kind == SPHERE:
        norm = float(np.linalg.norm(mean))
        if norm < 1e-9 * manifold.scale:
            return np.array(points[int(np.argmax(w))])
        return mean * (manifold.scale / norm)
    # hyperboloid: the weighted mean is timelike (convex cone), rescale onto
    # the sheet
    q = float(-manifold.inner(mean, mean))
    return mean * (manifold.scale / np.sqrt(q))


def estimate_location(manifold, points, kind=EXP_TRANSPORT, weights=None,
                      init=None, max_sweeps=200, step_tol=1e-8):
    """Profile-likelihood location search by geodesic coordinate descent.

    At each candidate location the covariance is re-estimated in closed form
    (mle_sigma), so the search runs over the manifold only.  Moves are taken
    along the tangent coordinate axes and only accepted when they improve the
    profile log-likelihood, which therefore never decreases.  The step is
    halved after a sweep with no improvement; the search stops when it drops
    below ``step_tol`` or after ``max_sweeps`` sweeps.

    A single sample is returned as its own location (the profile likelihood
    is unbounded there, which forces the location to the sample).
    """
    points = manifold.point(np.asarray(points, dtype=float))
    if points.ndim == 1:
        points = points[None, :]
    m = points.shape[0]
    if m < 1:
        raise ValueError("need at least one sample")
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (m,):
            raise ValueError("weights must be one per sample")
        support = np.flatnonzero(weights > 0)
        if support.size == 0:
            raise ValueError("total weight must be positive")
        if support.size == 1:
            return np.array(points[int(support[0])])
    if m == 1:
        return np.array(points[0])

    if init is None:
        init = _extrinsic_mean(manifold, points, weights)
    current = manifold.point(init)
    best, _ = _profile_objective(manifold, kind, points, weights, current)
    if not np.isfinite(best):
        # the mean landed where some sample leaves the chart image; fall back
        # to the best sample point among a deterministic subset
        stride = max(1, m // 25)
        for cand in points[::stride]:
            val, _ = _profile_objective(manifold, kind, points, weights, cand)
            if val > best:
                best, current = val, np.array(cand)
        if not np.isfinite(best):
            raise ValueError("no feasible starting location for the search")

    dists = manifold.distance(points, current)
    step = float(max(np.mean(dists) * 0.5, 1e-3))
    k = manifold.dim
    for _ in range(max_sweeps):
        if step < step_tol:
            break
        improved = False
        for j in range(k):
            offsets = np.zeros((2, k))
            offsets[0, j] = step
            offsets[1, j] = -step
            for cand in Wrapping(manifold, current, kind=EXP_TRANSPORT).wrap(offsets):
                val, _ = _profile_objective(manifold, kind, points, weights, cand)
                if val > best:
                    best, current, improved = val, manifold.point(cand), True
        if not improved:
            step *= 0.5
    return current


# -- mixtures ----------------------------------------------------------------


@dataclass
class EMResult:
    mixture: Mixture
    log_likelihood: float
    iterations: int
    trace: list = field(default_factory=list)
    reseeds: int = 0


def _component(manifold, kind, location, sigma):
    wrapping = Wrapping(manifold, location, kind=kind)
    return WrappedNormal(wrapping, _ridged(sigma, manifold.dim))


def _seed_components(manifold, points, q, kind, rng):
    """k-means++-style seeding on geodesic distances."""
    m = points.shape[0]
    chosen = [int(rng.integers(m))]
    d2 = manifold.distance(points, points[chosen[0]]) ** 2
    for _ in range(1, q):
        total = float(d2.sum())
        if total <= 0.0:
            probs = np.full(m, 1.0 / m)
        else:
            probs = d2 / total
        nxt = int(rng.choice(m, p=probs))
        chosen.append(nxt)
        d2 = np.minimum(d2, manifold.distance(points, points[nxt]) ** 2)
    centers = points[chosen]
    alld = np.stack([manifold.distance(points, c) for c in centers], axis=1)
    assign = np.argmin(alld, axis=1)
    comps, weights = [], []
    for j in range(q):
        members = points[assign == j]
        if members.shape[0] == 0:
            members = points[np.argsort(alld[:, j])[: manifold.dim + 1]]
        est = mle_sigma(Wrapping(manifold, centers[j], kind=kind), members)
        comps.append(_component(manifold, kind, centers[j], est.sigma))
        weights.append(max(members.shape[0], 1))
    weights = np.asarray(weights, dtype=float)
    return list(weights / weights.sum()), comps


def em_fit(manifold, points, q, kind=EXP_TRANSPORT, rng=None, max_iters=500,
           rel_tol=1e-8, max_reseeds=10):
    """EM for a q-component wrapped-normal mixture.

    Responsibilities are standard (log-sum-exp normalized); M-steps run in
    unwrapped coordinates, with each component's location refreshed by the
    profile search seeded at its current value, which keeps the expected
    complete-data objective monotone.  On the truncated sphere the
    normalization constant is held fixed within an iteration and refreshed
    with the new covariance afterwards, so the monotonicity assertion there
    carries a wider slack.  Empty components are reseeded from the worst-fit
    sample at most ``max_reseeds`` times.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    points = manifold.point(np.asarray(points, dtype=float))
    if points.ndim == 1:
        points = points[None, :]
    m, k = points.shape[0], manifold.dim
    if q < 1:
        raise ValueError("need at least one component")
    if m < q * (k + 1):
        raise ValueError("too few samples for this many components")

    weights, comps = _seed_components(manifold, points, q, kind, rng)
    slack_scale = 1e-6 if manifold.kind == SPHERE else 1e-9
    prev_ll = -np.inf
    trace = []
    reseeds = 0
    just_reseeded = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        logr = np.stack(
            [np.log(w) + c.log_pdf(points) for w, c in zip(weights, comps)], axis=1
        )
        row_ll = logsumexp(logr, axis=1)
        ll = float(row_ll.sum())
        trace.append(ll)
        if np.isfinite(prev_ll) and not just_reseeded:
            if ll < prev_ll - slack_scale * (1.0 + abs(prev_ll)):
                raise RuntimeError("mixture objective decreased during EM")
        if np.isfinite(prev_ll) and abs(ll - prev_ll) < rel_tol * (1.0 + abs(prev_ll)):
            prev_ll = ll
            break
        resp = np.exp(logr - row_ll[:, None])
        just_reseeded = False
        for j in range(q):
            rj = resp[:, j]
            total = float(rj.sum())
            if total < max(1e-8 * m, 1e-6):
                reseeds += 1
                if reseeds > max_reseeds:
                    raise DegenerateMixtureError(
                        "a mixture component kept collapsing to zero weight"
                    )
                worst = int(np.argmin(row_ll))
                est = mle_sigma(Wrapping(manifold, points[worst], kind=kind), points)
                comps[j] = _component(manifold, kind, points[worst], est.sigma)
                weights[j] = 1.0 / m
                just_reseeded = True
                continue
            weights[j] = total / m
            loc = estimate_location(
                manifold, points, kind=kind, weights=rj,
                init=comps[j].wrapping.location, max_sweeps=60,
            )
            est = mle_sigma(Wrapping(manifold, loc, kind=kind), points, weights=rj)
            comps[j] = _component(manifold, kind, loc, est.sigma)
        wsum = float(np.sum(weights))
        weights = [float(w / wsum) for w in weights]
        prev_ll = ll
    mixture = Mixture(weights, comps)
    return EMResult(
        mixture=mixture,
        log_likelihood=prev_ll,
        iterations=iterations,
        trace=trace,
        reseeds=reseeds,
    )

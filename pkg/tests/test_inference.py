"""Covariance MLE, conjugate covariance updates, location search, EM."""

import math

import numpy as np
import pytest
from scipy import stats

from geowrap import (
    EXP_TRANSPORT,
    ISOMETRY_LAMBERT,
    DegenerateMixtureError,
    IWParams,
    Manifold,
    WrappedNormal,
    Wrapping,
    em_fit,
    estimate_location,
    iw_posterior,
    mle_sigma,
)


def wrapping_at(manifold, u_loc, kind=EXP_TRANSPORT):
    p = manifold.exp(manifold.base_point, manifold.embed_tangent(u_loc))
    return Wrapping(manifold, p, kind)


# ---------------------------------------------------------------------------
# covariance MLE
# ---------------------------------------------------------------------------

def test_mle_sigma_single_sample_outer_product(h2):
    w = wrapping_at(h2, [0.4, -0.1])
    u = np.array([0.7, -0.3])
    est = mle_sigma(w, w.wrap(u))
    assert np.allclose(est.sigma, np.outer(u, u), atol=1e-9)
    assert est.count == 1.0
    assert est.singular  # rank one


def test_mle_sigma_at_location_is_zero(h2):
    w = wrapping_at(h2, [0.2, 0.2])
    pts = np.tile(w.location, (5, 1))
    est = mle_sigma(w, pts)
    assert np.allclose(est.sigma, 0.0, atol=1e-15)
    assert est.singular


def test_mle_sigma_weighted_average(h2):
    w = wrapping_at(h2, [0.0, 0.0])
    u = np.array([[1.0, 0.0], [0.0, 2.0]])
    est = mle_sigma(w, w.wrap(u), weights=np.array([2.0, 1.0]))
    want = (2.0 * np.outer(u[0], u[0]) + np.outer(u[1], u[1])) / 3.0
    assert np.allclose(est.sigma, want, atol=1e-9)
    with pytest.raises(ValueError):
        mle_sigma(w, w.wrap(u), weights=np.array([1.0]))
    with pytest.raises(ValueError):
        mle_sigma(w, w.wrap(u), weights=np.array([0.0, 0.0]))


def test_mle_sigma_consistency(h2):
    sigma = np.diag([0.04, 0.09])
    w = Wrapping(h2, h2.base_point, ISOMETRY_LAMBERT)
    d = WrappedNormal(w, sigma)
    z = d.sample(np.random.default_rng(21), 10_000)
    est = mle_sigma(w, z)
    rel = np.linalg.norm(est.sigma - sigma) / np.linalg.norm(sigma)
    assert rel < 0.05
    assert not est.singular


def test_mle_sigma_equivariant_under_relocation(h2, rng):
    # the same plane draws wrapped at two different anchors give the same
    # estimate: the unwrap undoes the move before any statistics happen
    u = rng.normal(scale=0.4, size=(50, 2))
    wa = wrapping_at(h2, [0.0, 0.0])
    wb = wrapping_at(h2, [1.2, -0.5])
    ea = mle_sigma(wa, wa.wrap(u))
    eb = mle_sigma(wb, wb.wrap(u))
    assert np.allclose(ea.sigma, eb.sigma, atol=1e-12)


# ---------------------------------------------------------------------------
# conjugate covariance updates
# ---------------------------------------------------------------------------

def test_iw_params_validation():
    with pytest.raises(ValueError):
        IWParams(nu=1.0, phi=np.eye(2))          # needs nu > dim - 1
    with pytest.raises(ValueError):
        IWParams(nu=5.0, phi=np.array([[1.0, 2.0], [2.0, 1.0]]))
    p = IWParams(nu=5.0, phi=np.eye(2))
    assert np.allclose(p.mean(), np.eye(2) / 2.0)  # phi / (nu - dim - 1)


def test_iw_posterior_empty_returns_prior(h2):
    prior = IWParams(nu=4.0, phi=np.eye(2))
    w = wrapping_at(h2, [0.1, 0.1])
    assert iw_posterior(prior, w, np.empty((0, 3))) is prior


def test_iw_posterior_single_sample_frozen(h2):
    prior = IWParams(nu=4.0, phi=np.eye(2))
    w = wrapping_at(h2, [0.3, -0.2])
    post = iw_posterior(prior, w, w.wrap(np.array([1.0, 0.0])))
    assert post.nu == 5.0
    assert np.allclose(post.phi, np.array([[2.0, 0.0], [0.0, 1.0]]), atol=1e-9)


def test_iw_posterior_batch_composition_is_exact(h2, rng):
    # one sample at a time is folded into the scale matrix, so splitting a
    # batch cannot change a single floating-point operation
    prior = IWParams(nu=4.0, phi=np.array([[1.3, 0.2], [0.2, 0.8]]))
    w = wrapping_at(h2, [0.5, 0.1])
    z = w.wrap(rng.normal(scale=0.5, size=(12, 2)))
    split = iw_posterior(iw_posterior(prior, w, z[:7]), w, z[7:])
    joint = iw_posterior(prior, w, z)
    assert split.nu == joint.nu
    assert np.array_equal(split.phi, joint.phi)


def test_iw_posterior_matches_grid_posterior_1d():
    # one-dimensional reduction: the conjugate update must agree with a
    # brute-force likelihood-times-prior quadrature for the variance
    h1 = Manifold.hyperboloid(1)
    w = Wrapping(h1, h1.base_point, EXP_TRANSPORT)
    rng = np.random.default_rng(17)
    u = rng.normal(scale=0.6, size=(40, 1))
    z = w.wrap(u)

    nu0, phi0 = 3.0, 0.5
    post = iw_posterior(IWParams(nu=nu0, phi=np.array([[phi0]])), w, z)
    a_post = post.nu / 2.0
    b_post = float(post.phi[0, 0]) / 2.0

    grid = np.linspace(0.02, 3.0, 10_000)
    log_prior = -(nu0 / 2.0 + 1.0) * np.log(grid) - phi0 / (2.0 * grid)
    s = float(np.sum(u * u))
    log_lik = -0.5 * len(u) * np.log(2 * math.pi * grid) - s / (2.0 * grid)
    brute = np.exp(log_prior + log_lik - np.max(log_prior + log_lik))
    brute /= np.trapezoid(brute, grid)
    conj = stats.invgamma.pdf(grid, a=a_post, scale=b_post)
    conj /= np.trapezoid(conj, grid)
    dx = grid[1] - grid[0]
    tv = 0.5 * float(np.sum(np.abs(brute - conj))) * dx
    assert tv < 1e-3


# ---------------------------------------------------------------------------
# location search
# ---------------------------------------------------------------------------

def test_estimate_location_identical_samples(h2):
    p = h2.exp(h2.base_point, h2.embed_tangent([0.8, -0.3]))
    pts = np.tile(p, (6, 1))
    assert np.allclose(estimate_location(h2, pts), p, atol=1e-9)


def test_estimate_location_single_sample(h2):
    p = h2.exp(h2.base_point, h2.embed_tangent([0.8, -0.3]))
    assert np.allclose(estimate_location(h2, p[None, :]), p, atol=1e-12)


def test_estimate_location_symmetric_pair(h2):
    # two mirror-image samples under the equal-area kind: the midpoint is the
    # exact optimum of the profile likelihood
    p = h2.exp(h2.base_point, h2.embed_tangent([0.5, 0.2]))
    w = Wrapping(h2, p, ISOMETRY_LAMBERT)
    u = np.array([0.6, -0.1])
    pts = np.stack([w.wrap(u), w.wrap(-u)])
    p_hat = estimate_location(h2, pts, kind=ISOMETRY_LAMBERT)
    assert h2.distance(p_hat, p) < 1e-6


def test_estimate_location_consistency_sphere(s2):
    p_star = s2.exp(s2.base_point, s2.embed_tangent([0.4, 0.3]))
    d = WrappedNormal(Wrapping(s2, p_star, EXP_TRANSPORT), 0.1 * np.eye(2))
    z = d.sample(np.random.default_rng(9), 10_000)
    p_hat = estimate_location(s2, z, kind=EXP_TRANSPORT)
    assert s2.distance(p_hat, p_star) < 0.02


def test_estimate_location_respects_weights(h2):
    a = h2.exp(h2.base_point, h2.embed_tangent([1.0, 0.0]))
    b = h2.exp(h2.base_point, h2.embed_tangent([-1.0, 0.0]))
    pts = np.stack([a, b])
    # all the weight on one sample pins the location there
    out = estimate_location(h2, pts, weights=np.array([1.0, 0.0]))
    assert np.allclose(out, a, atol=1e-12)
    with pytest.raises(ValueError):
        estimate_location(h2, pts, weights=np.array([1.0]))


# ---------------------------------------------------------------------------
# EM
# ---------------------------------------------------------------------------

def two_cluster_sample(manifold, m, spread, seed=3):
    quarter = manifold.exp(manifold.base_point, manifold.embed_tangent([2.0, 0.0]))
    other = manifold.exp(manifold.base_point, manifold.embed_tangent([-2.0, 0.0]))
    da = WrappedNormal(Wrapping(manifold, quarter, EXP_TRANSPORT), spread * np.eye(2))
    db = WrappedNormal(Wrapping(manifold, other, EXP_TRANSPORT), spread * np.eye(2))
    rng = np.random.default_rng(seed)
    z = np.concatenate([da.sample(rng, m // 2), db.sample(rng, m // 2)])
    return z, (quarter, other)


def test_em_single_component_reduces_to_direct_fit(h2):
    z, _ = two_cluster_sample(h2, 120, 0.3)
    res = em_fit(h2, z, q=1, rng=np.random.default_rng(0))
    direct_loc = estimate_location(h2, z)
    comp = res.mixture.components[0]
    assert h2.distance(comp.wrapping.location, direct_loc) < 1e-3
    direct_sigma = mle_sigma(Wrapping(h2, direct_loc, EXP_TRANSPORT), z).sigma
    assert np.allclose(comp.sigma, direct_sigma, atol=1e-3)
    assert res.mixture.weights[0] == pytest.approx(1.0)


def test_em_recovers_two_clusters(h2):
    z, (pa, pb) = two_cluster_sample(h2, 600, 0.05)
    res = em_fit(h2, z, q=2, rng=np.random.default_rng(4))
    weights = np.sort(res.mixture.weights)
    assert np.allclose(weights, [0.5, 0.5], atol=0.07)
    locs = [c.wrapping.location for c in res.mixture.components]
    spans = [min(h2.distance(l, pa), h2.distance(l, pb)) for l in locs]
    assert max(spans) < 0.15
    # the two components sit at different targets
    assert h2.distance(locs[0], locs[1]) > 3.0


def test_em_loglik_trace_is_monotone(h2):
    z, _ = two_cluster_sample(h2, 300, 0.1)
    res = em_fit(h2, z, q=2, rng=np.random.default_rng(8))
    trace = np.asarray(res.trace)
    assert trace.size == res.iterations
    assert np.all(np.diff(trace) >= -1e-9)
    assert res.log_likelihood == pytest.approx(trace[-1])


def test_em_requires_enough_samples(h2):
    z, _ = two_cluster_sample(h2, 10, 0.1)
    with pytest.raises(ValueError):
        em_fit(h2, z[:5], q=2, rng=np.random.default_rng(0))
    with pytest.raises(ValueError):
        em_fit(h2, z, q=0, rng=np.random.default_rng(0))


def test_em_deterministic_given_seed(h2):
    z, _ = two_cluster_sample(h2, 200, 0.1)
    a = em_fit(h2, z, q=2, rng=np.random.default_rng(5))
    b = em_fit(h2, z, q=2, rng=np.random.default_rng(5))
    assert np.array_equal(a.mixture.weights, b.mixture.weights)
    assert a.log_likelihood == b.log_likelihood


def test_em_lambert_kind_on_sphere(s2):
    # EM with the equal-area kind stays inside the truncation disk
    pa = s2.exp(s2.base_point, s2.embed_tangent([0.5, 0.0]))
    pb = s2.exp(s2.base_point, s2.embed_tangent([-0.5, 0.3]))
    da = WrappedNormal(Wrapping(s2, pa, ISOMETRY_LAMBERT), 0.01 * np.eye(2))
    db = WrappedNormal(Wrapping(s2, pb, ISOMETRY_LAMBERT), 0.01 * np.eye(2))
    rng = np.random.default_rng(2)
    z = np.concatenate([da.sample(rng, 150), db.sample(rng, 150)])
    res = em_fit(s2, z, q=2, kind=ISOMETRY_LAMBERT, rng=np.random.default_rng(2))
    locs = [c.wrapping.location for c in res.mixture.components]
    spans = [min(s2.distance(l, pa), s2.distance(l, pb)) for l in locs]
    assert max(spans) < 0.1

"""End-to-end acceptance checks.

Each test pins one headline guarantee of the package, from chart geometry
through densities and fitting to the network sampler and the bundled
marriage-network target, with explicit numeric tolerances and generous
wall-clock budgets.
"""

import json
import math
import shutil
import time

import numpy as np
import pytest
import scipy.stats

from geowrap import (
    GridSpec,
    IWParams,
    Manifold,
    MCConfig,
    Mixture,
    VonMises,
    WrappedNormal,
    Wrapping,
    disk_truncation_constant,
    em_fit,
    fd_jacobian_det,
    geweke_z,
    grid_normalization,
    iw_posterior,
    mh_run,
    mle_sigma,
    pushforward_tv_distance,
    sup_norm_gap,
    synthetic_graph,
    tv_distance,
)
from geowrap.charts import lambert_forward
from geowrap.cli import main
from geowrap.fileio import florentine_path

KINDS = ("exp_transport", "isometry_exp", "isometry_lambert")
SIGMA_2D = np.diag([0.04, 0.09])


def random_disk_points(rng, count, reach):
    r = reach * np.sqrt(rng.uniform(0.0, 1.0, count))
    th = rng.uniform(0.0, 2.0 * math.pi, count)
    return np.stack([r * np.cos(th), r * np.sin(th)], axis=1)


def test_criterion_01_equal_area_chart_has_unit_jacobian():
    start = time.monotonic()
    rng = np.random.default_rng(11)
    for m, reach in ((Manifold.sphere(2), 1.2), (Manifold.hyperboloid(2), 2.0)):
        for u in random_disk_points(rng, 100, reach):
            det = fd_jacobian_det(lambda x: lambert_forward(m, x), u, manifold=m)
            assert abs(det - 1.0) <= 1e-6
    assert time.monotonic() - start < 5.0


def test_criterion_02_exp_variant_jacobian_closed_form():
    start = time.monotonic()
    rng = np.random.default_rng(12)
    m = Manifold.hyperboloid(2)
    w = Wrapping(m, m.base_point, "exp_transport")
    for u in random_disk_points(rng, 100, 2.2):
        t = float(np.linalg.norm(u))
        if t < 1e-3:
            continue
        det = fd_jacobian_det(w.wrap, u, manifold=m)
        expected = math.sinh(t) / t
        assert abs(det - expected) / expected <= 1e-6
    assert time.monotonic() - start < 5.0


def test_criterion_03_densities_integrate_to_one():
    start = time.monotonic()
    m = Manifold.hyperboloid(2)
    grid = GridSpec(((-1.35, 1.35, 501), (-1.35, 1.35, 501)))
    for kind in KINDS:
        d = WrappedNormal(Wrapping(m, m.base_point, kind), SIGMA_2D)
        assert grid_normalization(d, grid) == pytest.approx(1.0, abs=1e-3)
    s2 = Manifold.sphere(2)
    trunc = WrappedNormal(Wrapping(s2, s2.base_point, "isometry_lambert"),
                          SIGMA_2D, truncation_radius=1.2)
    tg = GridSpec(((-1.2, 1.2, 501), (-1.2, 1.2, 501)))
    assert grid_normalization(trunc, tg) == pytest.approx(1.0, abs=1e-3)
    assert time.monotonic() - start < 30.0


def test_criterion_04_sampler_matches_density():
    start = time.monotonic()
    bins = GridSpec(((-0.8, 0.8, 20), (-1.2, 1.2, 20)))
    seed = 0
    for m in (Manifold.hyperboloid(2), Manifold.sphere(2)):
        for kind in KINDS:
            d = WrappedNormal(Wrapping(m, m.base_point, kind), SIGMA_2D)
            tv = pushforward_tv_distance(d, 100_000, bins,
                                         np.random.default_rng(seed))
            assert tv < 0.02
            seed += 1
    assert time.monotonic() - start < 30.0


def test_criterion_05_truncation_constant_closed_form():
    for sigma in (0.1, 0.4, 1.0):
        got = disk_truncation_constant(sigma**2 * np.eye(2), math.sqrt(2.0))
        want = 1.0 - math.exp(-1.0 / sigma**2)
        assert got == pytest.approx(want, abs=1e-12)


def test_criterion_06_density_relocation_identity():
    start = time.monotonic()
    rng = np.random.default_rng(314)
    worst = 0.0
    # anisotropic spread under pure relocation
    for case in range(60):
        m = Manifold.hyperboloid(2) if case % 2 else Manifold.sphere(2)
        kind = KINDS[case % 3]
        a = rng.uniform(0.15, 0.5, 2)
        c = rng.uniform(-0.8, 0.8) * a.prod()
        sig = np.array([[a[0]**2, c], [c, a[1]**2]])
        q = m.exp(m.base_point, m.embed_tangent(rng.uniform(-0.8, 0.8, 2)))
        A = m.isometry_to(q)
        d0 = WrappedNormal(Wrapping(m, m.base_point, kind), sig)
        d1 = WrappedNormal(Wrapping(m, q, kind), sig)
        z = d0.sample(np.random.default_rng(case), 30)
        gap = d1.log_pdf(m.apply_isometry(A, z)) - d0.log_pdf(z)
        worst = max(worst, float(np.max(np.abs(gap))))
    # isotropic spread under relocation composed with a rotation
    for case in range(40):
        m = Manifold.hyperboloid(2) if case % 2 else Manifold.sphere(2)
        kind = KINDS[case % 3]
        sig = float(rng.uniform(0.2, 0.5))**2 * np.eye(2)
        q = m.exp(m.base_point, m.embed_tangent(rng.uniform(-0.8, 0.8, 2)))
        A = m.isometry_to(q) @ m.rotation_fixing_base(float(rng.uniform(0, 7)))
        d0 = WrappedNormal(Wrapping(m, m.base_point, kind), sig)
        d1 = WrappedNormal(Wrapping(m, q, kind), sig)
        z = d0.sample(np.random.default_rng(1000 + case), 30)
        gap = d1.log_pdf(m.apply_isometry(A, z)) - d0.log_pdf(z)
        worst = max(worst, float(np.max(np.abs(gap))))
    assert worst <= 1e-9
    assert time.monotonic() - start < 5.0


def test_criterion_07_isotropic_density_symmetric_and_unimodal():
    start = time.monotonic()
    cases = [(Manifold.hyperboloid(2), "exp_transport", 3.0),
             (Manifold.hyperboloid(2), "isometry_lambert", 3.0),
             (Manifold.sphere(2), "exp_transport", 2.5),
             (Manifold.sphere(2), "isometry_lambert", 1.4)]
    for m, kind, reach in cases:
        d = WrappedNormal(Wrapping(m, m.base_point, kind), 0.09 * np.eye(2))
        ts = np.linspace(1e-3, reach, 100)
        ref = None
        for j in range(16):
            th = 2.0 * math.pi * j / 16.0
            v = m.embed_tangent([math.cos(th), math.sin(th)])
            vals = d.log_pdf(np.stack([m.exp(m.base_point, t * v) for t in ts]))
            assert np.all(np.diff(vals) < 0.0)  # strictly downhill outward
            if ref is None:
                ref = vals
            else:
                assert float(np.max(np.abs(vals - ref))) <= 1e-9
    assert time.monotonic() - start < 10.0


def test_criterion_08_flattening_as_curvature_vanishes():
    start = time.monotonic()
    rng = np.random.default_rng(8)
    u = rng.uniform(-1.5 / math.sqrt(2.0), 1.5 / math.sqrt(2.0), size=(20, 2))
    for name in ("hyperboloid", "sphere"):
        devs = []
        for scale in (1.0, 2.0, 4.0):
            m = (Manifold.hyperboloid(2, scale) if name == "hyperboloid"
                 else Manifold.sphere(2, scale))
            w = Wrapping(m, m.base_point, "exp_transport")
            devs.append(np.linalg.norm(m.spatial(w.wrap(u)) - u, axis=1))
        devs = np.stack(devs)
        assert np.all(devs[:-1] / devs[1:] >= 3.0)
    assert time.monotonic() - start < 5.0


def test_criterion_09_circular_density_gaussian_limit():
    start = time.monotonic()
    grid = GridSpec(((-math.pi, math.pi, 10_000),))
    gaps = []
    for kappa in (1.0, 10.0, 100.0):
        vm = VonMises(0.0, kappa)

        def gauss(x, k=kappa):
            return np.exp(-0.5 * k * np.asarray(x)**2) * math.sqrt(
                k / (2.0 * math.pi))

        gaps.append(float(sup_norm_gap(vm.pdf, gauss, grid)))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 0.01
    assert time.monotonic() - start < 5.0


def test_criterion_10_covariance_mle_consistent():
    start = time.monotonic()
    m = Manifold.hyperboloid(2)
    w = Wrapping(m, m.exp(m.base_point, m.embed_tangent([0.4, -0.2])),
                 "exp_transport")
    points = WrappedNormal(w, SIGMA_2D).sample(np.random.default_rng(55), 10_000)
    est = mle_sigma(w, points)
    rel = np.linalg.norm(est.sigma - SIGMA_2D) / np.linalg.norm(SIGMA_2D)
    assert rel < 0.05
    assert time.monotonic() - start < 10.0


def test_criterion_11_conjugate_covariance_update():
    start = time.monotonic()
    # batch composition: one update with all samples is bitwise identical to
    # chaining updates over any split of the same samples
    m = Manifold.hyperboloid(2)
    w = Wrapping(m, m.base_point, "isometry_lambert")
    points = WrappedNormal(w, SIGMA_2D).sample(np.random.default_rng(21), 60)
    prior = IWParams(nu=4.0, phi=0.5 * np.eye(2))
    whole = iw_posterior(prior, w, points)
    split = iw_posterior(iw_posterior(prior, w, points[:23]), w, points[23:])
    assert whole.nu == split.nu
    assert np.array_equal(whole.phi, split.phi)

    # one-dimensional case against a brute-force grid posterior
    h1 = Manifold.hyperboloid(1)
    w1 = Wrapping(h1, h1.base_point, "exp_transport")
    draws = np.random.default_rng(3).normal(0.0, 0.6, size=(40, 1))
    points1 = w1.wrap(draws)
    prior1 = IWParams(nu=3.0, phi=0.5 * np.eye(1))
    post = iw_posterior(prior1, w1, points1)

    grid = np.linspace(0.02, 3.0, 10_000)
    u = w1.unwrap(points1)[:, 0]
    log_lik = (-0.5 * np.sum(u**2)) / grid - 0.5 * u.size * np.log(grid)
    log_prior = (-0.5 * prior1.nu - 1.0) * np.log(grid) \
        - 0.5 * prior1.phi[0, 0] / grid
    brute = np.exp(log_lik + log_prior - (log_lik + log_prior).max())
    brute /= brute.sum()
    conj = scipy.stats.invgamma(post.nu / 2.0, scale=post.phi[0, 0] / 2.0).pdf(grid)
    conj /= conj.sum()
    assert tv_distance(brute, conj) < 1e-3
    assert time.monotonic() - start < 10.0


def test_criterion_12_mixture_recovery_two_clusters():
    start = time.monotonic()
    m = Manifold.hyperboloid(2)
    locs = [m.exp(m.base_point, m.embed_tangent([-2.0, 0.0])),
            m.exp(m.base_point, m.embed_tangent([2.0, 0.0]))]
    truth = Mixture(np.array([0.5, 0.5]),
                    tuple(WrappedNormal(Wrapping(m, p, "exp_transport"),
                                        0.05 * np.eye(2)) for p in locs))
    points = truth.sample(np.random.default_rng(2024), 2000)
    result = em_fit(m, points, 2, kind="exp_transport",
                    rng=np.random.default_rng(7))
    weights = np.sort(result.mixture.weights)
    assert np.max(np.abs(weights - 0.5)) < 0.05
    for comp in result.mixture.components:
        err = min(m.distance(comp.wrapping.location, locs[0]),
                  m.distance(comp.wrapping.location, locs[1]))
        assert err < 0.1
    assert time.monotonic() - start < 60.0


def test_criterion_13_synthetic_network_recovery():
    start = time.monotonic()
    s2 = Manifold.sphere(2)
    graph, _ = synthetic_graph(s2, 15, -0.6, np.random.default_rng(5))
    cfg = MCConfig(iterations=100_000, seed=17, step_pos=0.3, step_alpha=0.5)
    _, trace = mh_run(graph, s2, cfg)
    alpha, lp = trace.post_burn_in()
    assert abs(float(alpha.mean()) - (-0.6)) <= 0.3
    assert abs(geweke_z(lp)) < 3.0
    assert trace.warnings == []
    assert time.monotonic() - start < 180.0


def test_criterion_14_marriage_network_intercept(tmp_path, monkeypatch):
    start = time.monotonic()
    shutil.copy(florentine_path(), tmp_path / "florentine.csv")
    monkeypatch.chdir(tmp_path)
    assert main(["network-fit", "--edges", "florentine.csv",
                 "--manifold", "sphere", "--iters", "100000",
                 "--seed", "1"]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert -1.0 <= summary["alpha_mean"] <= -0.2
    assert (tmp_path / "trace.csv").exists()
    assert (tmp_path / "trace.png").exists()
    assert (tmp_path / "summary_latent.png").exists()
    assert time.monotonic() - start < 180.0

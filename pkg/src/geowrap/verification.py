"""The built-in verification suite.

Each check pits a library code path against an independent oracle
(finite differences, quadrature, ODE integration, Monte-Carlo binning,
closed forms) and reports name, claim, measured value, tolerance,
comparator, and pass/fail.  A correct build passes everything; the CLI
turns any failure into exit code 3.
"""

from __future__ import annotations

import math

import numpy as np

from .charts import (
    EXP_TRANSPORT,
    ISOMETRY_EXP,
    ISOMETRY_LAMBERT,
    Wrapping,
    lambert_forward,
)
from .distributions import VonMises, WrappedNormal, disk_truncation_constant
from .manifolds import Manifold
from .oracles import (
    GridSpec,
    fd_jacobian_det,
    form_defect,
    grid_normalization,
    integrate_geodesic,
    point_appended_basis,
    pushforward_tv_distance,
    sup_norm_gap,
)

__all__ = ["run_verification", "VERIFY_SEED"]

VERIFY_SEED = 20240814


def _entry(name, claim, value, tolerance, comparator="<="):
    passed = value <= tolerance if comparator == "<=" else value >= tolerance
    return {
        "name": name,
        "claim": claim,
        "value": float(value),
        "tolerance": float(tolerance),
        "comparator": comparator,
        "passed": bool(passed),
    }


def _check_lambert_area(manifold, rng, cases=20):
    reach = 1.5 if manifold.kind == "hyperboloid" else 1.2
    worst = 0.0
    for _ in range(cases):
        u = rng.uniform(-reach, reach, size=2)
        det = fd_jacobian_det(lambda x: lambert_forward(manifold, x), u,
                              manifold=manifold)
        worst = max(worst, abs(det - 1.0))
    return worst


def _check_exp_jacobian(rng, cases=20):
    m = Manifold.hyperboloid(2)
    w = Wrapping(m, m.base_point, kind=EXP_TRANSPORT)
    worst = 0.0
    for _ in range(cases):
        u = rng.uniform(-2.0, 2.0, size=2)
        if np.linalg.norm(u) < 1e-3:
            continue
        det = fd_jacobian_det(lambda x: w.wrap(x), u, manifold=m)
        expected = math.exp(float(w.log_det_jacobian(u)))
        worst = max(worst, abs(det - expected) / expected)
    return worst


def _check_wrap_agreement(rng, cases=20):
    m = Manifold.hyperboloid(2)
    worst = 0.0
    for _ in range(cases):
        loc = m.exp(m.base_point, m.embed_tangent(rng.uniform(-1.5, 1.5, 2)))
        u = rng.uniform(-2.0, 2.0, size=2)
        a = Wrapping(m, loc, kind=EXP_TRANSPORT).wrap(u)
        b = Wrapping(m, loc, kind=ISOMETRY_EXP).wrap(u)
        worst = max(worst, float(np.max(np.abs(a - b))))
    return worst


def _check_geodesic_ode(rng, cases=6):
    worst = 0.0
    for kind in ("hyperboloid", "sphere"):
        m = Manifold.hyperboloid(2) if kind == "hyperboloid" else Manifold.sphere(2)
        for _ in range(cases):
            p = m.exp(m.base_point, m.embed_tangent(rng.uniform(-0.8, 0.8, 2)))
            v = m.tangent(p, _random_tangent(m, p, rng))
            closed = m.exp(p, v)
            ode = integrate_geodesic(m, p, v, steps=2000)
            worst = max(worst, float(np.max(np.abs(closed - ode))))
    return worst


def _random_tangent(manifold, p, rng):
    raw = rng.uniform(-1.0, 1.0, manifold.ambient_dim)
    sign = -1.0 if manifold.kind == "hyperboloid" else 1.0
    denom = sign * manifold.scale**2
    return raw - (manifold.inner(raw, p) / denom) * p


def _check_relocation(rng, cases=20):
    worst = 0.0
    for kind in (ISOMETRY_LAMBERT, EXP_TRANSPORT):
        for _ in range(cases // 2):
            m = Manifold.hyperboloid(2)
            sig = float(rng.uniform(0.2, 0.8)) ** 2 * np.eye(2)
            base = Wrapping(m, m.base_point, kind=kind)
            d0 = WrappedNormal(base, sig)
            q = m.exp(m.base_point, m.embed_tangent(rng.uniform(-1.0, 1.0, 2)))
            iso = m.isometry_to(q) @ m.rotation_fixing_base(float(rng.uniform(0, 7)))
            d1 = WrappedNormal(Wrapping(m, q, kind=kind), sig)
            z = d0.sample(np.random.default_rng(1), 50)
            gap = d1.log_pdf(m.apply_isometry(iso, z)) - d0.log_pdf(z)
            worst = max(worst, float(np.max(np.abs(gap))))
    return worst


def _check_curvature_limit(rng):
    worst_ratio = np.inf
    for kind in ("hyperboloid", "sphere"):
        u = rng.uniform(-1.5 / math.sqrt(2), 1.5 / math.sqrt(2), size=(10, 2))
        devs = []
        for scale in (1.0, 2.0, 4.0):
            m = (Manifold.hyperboloid(2, scale) if kind == "hyperboloid"
                 else Manifold.sphere(2, scale))
            w = Wrapping(m, m.base_point, kind=EXP_TRANSPORT)
            devs.append(np.linalg.norm(m.spatial(w.wrap(u)) - u, axis=1))
        devs = np.stack(devs)
        ratios = devs[:-1] / devs[1:]
        worst_ratio = min(worst_ratio, float(ratios.min()))
    return worst_ratio


def _check_vonmises():
    kappa = 100.0
    vm = VonMises(0.0, kappa)
    grid = GridSpec(((-math.pi, math.pi, 10_000),))
    gauss = lambda x: np.exp(-0.5 * kappa * np.asarray(x) ** 2) * math.sqrt(
        kappa / (2.0 * math.pi)
    )
    return sup_norm_gap(vm.pdf, gauss, grid)


def run_verification(progress=None):
    """Run every check; returns the list of report entries."""
    rng = np.random.default_rng(VERIFY_SEED)
    h2 = Manifold.hyperboloid(2)
    s2 = Manifold.sphere(2)
    checks = []

    def note(entry):
        checks.append(entry)
        if progress is not None:
            progress(entry)

    note(_entry(
        "lambert_area_hyperboloid",
        "equal-area chart of the hyperboloid has unit Jacobian (finite differences)",
        _check_lambert_area(h2, rng), 1e-6,
    ))
    note(_entry(
        "lambert_area_sphere",
        "equal-area chart of the sphere has unit Jacobian (finite differences)",
        _check_lambert_area(s2, rng), 1e-6,
    ))
    note(_entry(
        "exp_wrap_jacobian",
        "transport-wrap area distortion matches sinh(t)/t (finite differences, relative)",
        _check_exp_jacobian(rng), 1e-6,
    ))
    note(_entry(
        "wrap_construction_agreement",
        "transport-based and isometry-based exp wraps coincide on the hyperboloid",
        _check_wrap_agreement(rng), 1e-9,
    ))
    note(_entry(
        "geodesic_ode_endpoint",
        "closed-form exponential map matches Runge-Kutta geodesic integration",
        _check_geodesic_ode(rng), 1e-6,
    ))

    base_h = Wrapping(h2, h2.base_point, kind=ISOMETRY_LAMBERT)
    note(_entry(
        "normalization_lambert_hyperboloid",
        "equal-area-variant density integrates to 1",
        abs(grid_normalization(
            WrappedNormal(base_h, 0.25 * np.eye(2)),
            GridSpec.square(4.0, 1201),
        ) - 1.0), 1e-3,
    ))
    note(_entry(
        "normalization_exp_hyperboloid",
        "transport-variant density integrates to 1",
        abs(grid_normalization(
            WrappedNormal(Wrapping(h2, h2.base_point, kind=EXP_TRANSPORT), np.eye(2)),
            GridSpec.square(20.5, 1367),
        ) - 1.0), 1e-3,
    ))
    base_s = Wrapping(s2, s2.base_point, kind=ISOMETRY_LAMBERT)
    note(_entry(
        "normalization_sphere_truncated",
        "truncated sphere density with its constant folded in integrates to 1",
        abs(grid_normalization(
            WrappedNormal(base_s, 0.09 * np.eye(2)),
            GridSpec.square(math.sqrt(2.0), 1201),
        ) - 1.0), 1e-3,
    ))
    note(_entry(
        "truncation_closed_form",
        "disk mass of an isotropic Gaussian matches 1 - exp(-1/sigma^2) at radius sqrt(2)",
        max(
            abs(disk_truncation_constant(s**2 * np.eye(2), math.sqrt(2.0))
                - (1.0 - math.exp(-1.0 / s**2)))
            for s in (0.1, 0.4, 1.0)
        ), 1e-12,
    ))
    note(_entry(
        "sampler_density_tv",
        "binned law of the sampler matches the analytic plane density",
        pushforward_tv_distance(
            WrappedNormal(base_h, np.diag([0.04, 0.09])),
            100_000,
            GridSpec(((-0.8, 0.8, 20), (-1.2, 1.2, 20))),
            np.random.default_rng(VERIFY_SEED + 1),
        ), 0.02,
    ))
    note(_entry(
        "relocation_identity",
        "isotropic densities relocate exactly under ambient isometries",
        _check_relocation(rng), 1e-9,
    ))
    note(_entry(
        "vonmises_gaussian_limit",
        "circular density at concentration 100 is uniformly close to its Gaussian limit",
        _check_vonmises(), 0.01,
    ))
    note(_entry(
        "curvature_flattening",
        "wrap deviation from the plane shrinks at least 3x per curvature-scale doubling",
        _check_curvature_limit(rng), 3.0, comparator=">=",
    ))
    note(_entry(
        "naive_frame_not_isometry",
        "appending the point to the standard frame fails to preserve the ambient form",
        form_defect(h2, point_appended_basis(
            np.array([math.sinh(1.0), 0.0, math.cosh(1.0)])
        )), 0.1, comparator=">=",
    ))
    return checks

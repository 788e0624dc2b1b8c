"""Command-line front end.

Subcommands: sample, logpdf, fit-sigma, fit-bayes, fit-mixture, network-fit,
verify, limits.  All runs are seeded (default 0) and rewrite their outputs
byte-identically; report-style subcommands also render matplotlib figures
next to their delimited output unless --no-figures is given.

Exit codes: 0 success, 1 usage error, 2 data error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from .charts import EXP_TRANSPORT, WRAP_KINDS, Wrapping
from .distributions import TruncationInfeasibleError
from .fileio import (
    DataError,
    config_from_json,
    dist_from_spec,
    florentine_path,
    load_spec,
    manifold_from_name,
    read_edges_csv,
    read_points_csv,
    write_json,
    write_samples_csv,
    write_table_csv,
    write_trace_csv,
)
from .inference import DegenerateMixtureError, IWParams, em_fit, iw_posterior, mle_sigma
from .manifolds import GeometryError
from .network import MCConfig, geweke_z, mh_run
from .verification import run_verification

__all__ = ["main"]

DEFAULT_SEED = 0


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems instead of exiting the process."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageError(message)


def _figure_path(out_path, suffix=""):
    root, _ = os.path.splitext(out_path)
    return f"{root}{suffix}.png"


def _wrapping_from_spec(spec):
    m = spec.get("manifold", {})
    manifold = manifold_from_name(
        m.get("kind", "hyperboloid"), int(m.get("dim", 2)), float(m.get("scale", 1.0))
    )
    variant = spec.get("variant", EXP_TRANSPORT)
    if variant not in WRAP_KINDS:
        raise DataError(f"unknown variant {variant!r}")
    location = np.asarray(spec.get("location", manifold.base_point), dtype=float)
    return Wrapping(manifold, manifold.point(location), kind=variant)


def _spec_for_fit(args, embedded):
    if getattr(args, "spec", None):
        return load_spec(args.spec)
    if embedded is not None:
        return embedded
    raise DataError(
        "no distribution spec available: pass --spec or use a samples file "
        "with an embedded '#' spec header"
    )


# -- subcommands ----------------------------------------------------------------


def _cmd_sample(args):
    dist = dist_from_spec(load_spec(args.spec))
    rng = np.random.default_rng(args.seed)
    points = dist.sample(rng, args.n)
    write_samples_csv(args.out, points, spec=dist.spec_dict())
    print(f"wrote {args.n} samples to {args.out}")
    return 0


def _cmd_logpdf(args):
    dist = dist_from_spec(load_spec(args.spec))
    points, _ = read_points_csv(args.points)
    values = np.atleast_1d(dist.log_pdf(points))
    header = [f"x{i}" for i in range(points.shape[1])] + ["log_pdf"]
    write_table_csv(args.out, header, list(points.T) + [values])
    print(f"wrote {values.size} densities to {args.out}")
    return 0


def _cmd_fit_sigma(args):
    points, embedded = read_points_csv(args.samples)
    spec = _spec_for_fit(args, embedded)
    wrapping = _wrapping_from_spec(spec)
    est = mle_sigma(wrapping, points)
    out = {
        "manifold": {
            "kind": wrapping.manifold.kind,
            "dim": wrapping.manifold.dim,
            "scale": wrapping.manifold.scale,
        },
        "variant": wrapping.kind,
        "location": wrapping.location.tolist(),
        "sigma": est.sigma.tolist(),
        "count": est.count,
        "singular": est.singular,
    }
    write_json(args.out, out)
    print(f"wrote covariance fit ({int(est.count)} samples) to {args.out}")
    return 0


def _cmd_fit_bayes(args):
    points, embedded = read_points_csv(args.samples)
    spec = _spec_for_fit(args, embedded)
    wrapping = _wrapping_from_spec(spec)
    k = wrapping.manifold.dim
    prior = IWParams(nu=args.nu, phi=args.phi_scale * np.eye(k))
    post = iw_posterior(prior, wrapping, points)
    out = {
        "manifold": {
            "kind": wrapping.manifold.kind,
            "dim": wrapping.manifold.dim,
            "scale": wrapping.manifold.scale,
        },
        "variant": wrapping.kind,
        "location": wrapping.location.tolist(),
        "prior": {"nu": prior.nu, "phi": prior.phi.tolist()},
        "posterior": {"nu": post.nu, "phi": post.phi.tolist()},
        "count": points.shape[0],
    }
    if post.nu > k + 1:
        out["posterior_mean_sigma"] = post.mean().tolist()
    write_json(args.out, out)
    print(f"wrote conjugate update ({points.shape[0]} samples) to {args.out}")
    return 0


def _cmd_fit_mixture(args):
    points, embedded = read_points_csv(args.samples)
    spec = _spec_for_fit(args, embedded)
    wrapping = _wrapping_from_spec(spec)
    rng = np.random.default_rng(args.seed)
    result = em_fit(wrapping.manifold, points, args.q, kind=wrapping.kind, rng=rng)
    out = {
        "weights": [float(w) for w in result.mixture.weights],
        "components": [c.spec_dict() for c in result.mixture.components],
        "log_likelihood": result.log_likelihood,
        "iterations": result.iterations,
        "reseeds": result.reseeds,
    }
    write_json(args.out, out)
    print(
        f"wrote {args.q}-component mixture fit "
        f"({result.iterations} iterations) to {args.out}"
    )
    return 0


def _cmd_network_fit(args):
    if args.config:
        config, cfg_manifold = config_from_json(load_spec(args.config))
    else:
        if args.iters is None:
            raise DataError("network-fit needs --iters (or a --config file)")
        config, cfg_manifold = MCConfig(iterations=args.iters), None
    overrides = {
        "iterations": args.iters,
        "burn_in": args.burn_in,
        "thin": args.thin,
        "seed": args.seed,
        "step_pos": args.step_pos,
        "step_alpha": args.step_alpha,
        "init": args.init,
    }
    fields = {k: v for k, v in overrides.items() if v is not None}
    if args.iters is not None and args.burn_in is None:
        # keep the default proportionality when only the length changes
        fields["burn_in"] = args.iters // 5
    if fields:
        config = replace(config, **fields)
    manifold_name = args.manifold or cfg_manifold
    if manifold_name is None:
        raise DataError("network-fit needs --manifold (or one in the config)")
    manifold = manifold_from_name(manifold_name)
    edge_path = florentine_path() if args.edges == "florentine" else args.edges
    graph = read_edges_csv(edge_path)

    chains = max(1, args.chains)
    workers = chains
    env = os.environ.get("GEOWRAP_THREADS")
    if env:
        try:
            workers = max(1, min(workers, int(env)))
        except ValueError:
            raise DataError(f"GEOWRAP_THREADS must be an integer, got {env!r}")
    configs = [replace(config, seed=config.seed + c) for c in range(chains)]
    if chains == 1:
        results = [mh_run(graph, manifold, configs[0])]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda cf: mh_run(graph, manifold, cf), configs))

    trace_paths = []
    for c, (_, trace) in enumerate(results):
        if c == 0:
            path = args.out_trace
        else:
            root, ext = os.path.splitext(args.out_trace)
            path = f"{root}.chain{c}{ext or '.csv'}"
        write_trace_csv(path, trace)
        trace_paths.append(path)

    pooled_alpha = np.concatenate([t.post_burn_in()[0] for _, t in results])
    pooled_lp = np.concatenate([t.post_burn_in()[1] for _, t in results])
    if pooled_alpha.size == 0:
        raise DataError("no post-burn-in trace records; increase --iters")
    geweke = []
    for _, t in results:
        _, lp = t.post_burn_in()
        geweke.append(float(geweke_z(lp)) if lp.size >= 20 else None)
    warnings = [w for _, t in results for w in t.warnings]
    summary = {
        "alpha_mean": float(pooled_alpha.mean()),
        "alpha_std": float(pooled_alpha.std(ddof=1)) if pooled_alpha.size > 1 else 0.0,
        "alpha_mean_by_chain": [
            float(t.post_burn_in()[0].mean()) for _, t in results
        ],
        "log_posterior_mean": float(pooled_lp.mean()),
        "geweke_z_by_chain": geweke,
        "acceptance_pos_by_chain": [
            float(t.accept_rate_pos[-1]) if len(t) else None for _, t in results
        ],
        "acceptance_alpha_by_chain": [
            float(t.accept_rate_alpha[-1]) if len(t) else None for _, t in results
        ],
        "chains": chains,
        "iterations": config.iterations,
        "burn_in": config.burn_in,
        "thin": config.thin,
        "seed": config.seed,
        "manifold": manifold_name,
        "edges": os.path.basename(edge_path),
        "nodes": graph.n,
        "warnings": warnings,
    }
    write_json(args.out_summary, summary)

    if not args.no_figures:
        from .plots import save_positions_figure, save_trace_figure

        save_trace_figure(_figure_path(args.out_trace), results[0][1])
        save_positions_figure(
            _figure_path(args.out_summary, suffix="_latent"),
            manifold, results[0][0].positions, graph,
        )
    print(
        f"alpha_mean = {summary['alpha_mean']:.4f} over {chains} chain(s); "
        f"trace -> {trace_paths[0]}, summary -> {args.out_summary}"
    )
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def _cmd_verify(args):
    def progress(entry):
        mark = "ok" if entry["passed"] else "FAIL"
        print(f"[{mark}] {entry['name']}: {entry['value']:.3g} "
              f"{entry['comparator']} {entry['tolerance']:.3g}")

    checks = run_verification(progress=progress)
    all_passed = all(c["passed"] for c in checks)
    write_json(args.out, {"checks": checks, "all_passed": all_passed})
    if not args.no_figures:
        from .plots import save_verify_figure

        save_verify_figure(_figure_path(args.out), checks)
    print(f"{sum(c['passed'] for c in checks)}/{len(checks)} checks passed; "
          f"report -> {args.out}")
    return 0 if all_passed else 3


def _cmd_limits(args):
    rng = np.random.default_rng(args.seed)
    manifolds = ("hyperboloid", "sphere") if args.manifold == "both" \
        else (args.manifold,)
    scales = (1.0, 2.0, 4.0)
    cases = 20
    u = rng.uniform(-1.5 / math.sqrt(2.0), 1.5 / math.sqrt(2.0), size=(cases, 2))
    rows = {"manifold": [], "variant": [], "scale": [], "case": [],
            "u0": [], "u1": [], "deviation": []}
    curves = {}
    for name in manifolds:
        for scale in scales:
            manifold = manifold_from_name(name, 2, scale)
            wrapping = Wrapping(manifold, manifold.base_point, kind=args.variant)
            dev = np.linalg.norm(
                manifold.spatial(wrapping.wrap(u)) - u, axis=1
            )
            for i in range(cases):
                rows["manifold"].append(name)
                rows["variant"].append(args.variant)
                rows["scale"].append(scale)
                rows["case"].append(i)
                rows["u0"].append(u[i, 0])
                rows["u1"].append(u[i, 1])
                rows["deviation"].append(dev[i])
                curves.setdefault(f"{name}[{i}]", []).append(dev[i])
    write_table_csv(
        args.out,
        ["manifold", "variant", "scale", "case", "u0", "u1", "deviation"],
        [np.asarray(rows["manifold"]), np.asarray(rows["variant"]),
         np.asarray(rows["scale"]), np.asarray(rows["case"], dtype=int),
         np.asarray(rows["u0"]), np.asarray(rows["u1"]),
         np.asarray(rows["deviation"])],
    )
    if not args.no_figures:
        from .plots import save_limits_figure

        labels = list(curves)
        save_limits_figure(
            _figure_path(args.out), scales,
            np.asarray([curves[k] for k in labels]),
            labels=None if len(labels) > 12 else labels,
        )
    print(f"wrote curvature-limit sweep ({len(rows['scale'])} rows) to {args.out}")
    return 0


# -- parser ----------------------------------------------------------------------


def _build_parser():
    p = _Parser(
        prog="geowrap",
        description="Wrapped distributions on constant-curvature manifolds: "
                    "sampling, densities, fitting, and latent-space networks.",
    )
    sub = p.add_subparsers(dest="command", metavar="subcommand")

    sp = sub.add_parser("sample", help="draw from a wrapped normal")
    sp.add_argument("--spec", required=True,
                    help="distribution spec: JSON file path or inline JSON")
    sp.add_argument("--n", type=int, required=True, help="number of draws")
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--out", required=True, help="output CSV path")
    sp.set_defaults(func=_cmd_sample)

    sp = sub.add_parser("logpdf", help="evaluate log densities at points")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--points", required=True, help="CSV of ambient points")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_logpdf)

    sp = sub.add_parser("fit-sigma", help="covariance MLE at a known location")
    sp.add_argument("--samples", required=True)
    sp.add_argument("--spec", help="overrides the spec embedded in the samples file")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_fit_sigma)

    sp = sub.add_parser("fit-bayes", help="inverse-Wishart conjugate update")
    sp.add_argument("--samples", required=True)
    sp.add_argument("--spec", help="overrides the spec embedded in the samples file")
    sp.add_argument("--nu", type=float, default=4.0, help="prior degrees of freedom")
    sp.add_argument("--phi-scale", type=float, default=1.0,
                    help="prior scale matrix = phi-scale * I")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_fit_bayes)

    sp = sub.add_parser("fit-mixture", help="EM fit of a wrapped-normal mixture")
    sp.add_argument("--samples", required=True)
    sp.add_argument("--spec", help="overrides the spec embedded in the samples file")
    sp.add_argument("--q", type=int, required=True, help="number of components")
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_fit_mixture)

    sp = sub.add_parser("network-fit",
                        help="latent-space model MCMC on an edge list")
    sp.add_argument("--edges", required=True,
                    help="edge CSV; the literal name 'florentine' loads the "
                         "bundled fixture")
    sp.add_argument("--manifold", choices=["hyperboloid", "sphere", "euclidean"])
    sp.add_argument("--config", help="JSON config (flags override it)")
    sp.add_argument("--iters", type=int)
    sp.add_argument("--burn-in", type=int, dest="burn_in")
    sp.add_argument("--thin", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--step-pos", type=float, dest="step_pos")
    sp.add_argument("--step-alpha", type=float, dest="step_alpha")
    sp.add_argument("--init", choices=["mds", "base"])
    sp.add_argument("--chains", type=int, default=1)
    sp.add_argument("--out-trace", default="trace.csv", dest="out_trace")
    sp.add_argument("--out-summary", default="summary.json", dest="out_summary")
    sp.add_argument("--no-figures", action="store_true")
    sp.set_defaults(func=_cmd_network_fit)

    sp = sub.add_parser("verify", help="run the built-in verification suite")
    sp.add_argument("--out", required=True, help="report JSON path")
    sp.add_argument("--no-figures", action="store_true")
    sp.set_defaults(func=_cmd_verify)

    sp = sub.add_parser("limits", help="curvature-limit sweep to CSV")
    sp.add_argument("--out", required=True)
    sp.add_argument("--manifold", choices=["hyperboloid", "sphere", "both"],
                    default="both")
    sp.add_argument("--variant", choices=list(WRAP_KINDS), default=EXP_TRANSPORT)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--no-figures", action="store_true")
    sp.set_defaults(func=_cmd_limits)
    return p


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return 1
    if getattr(args, "func", None) is None:
        parser.print_help(sys.stderr)
        return 1
    try:
        return args.func(args)
    except (DataError, GeometryError, TruncationInfeasibleError,
            DegenerateMixtureError, OSError, ValueError) as exc:
        print(f"geowrap: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

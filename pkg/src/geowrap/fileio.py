"""File formats: distribution-spec JSON, sample/point CSV, edge lists,
traces, and MCMC config.

All writers are atomic (write to a temp file in the target directory, rename
on success) and format floats with 17 significant digits, so reruns with the
same inputs produce byte-identical files and partial output never lands.
"""

from __future__ import annotations

import json
import os
import tempfile
from importlib import resources

import numpy as np

from .charts import WRAP_KINDS, Wrapping
from .distributions import WrappedNormal
from .manifolds import EUCLIDEAN, HYPERBOLOID, SPHERE, Manifold
from .network import Graph, MCConfig

__all__ = [
    "DataError",
    "fmt",
    "atomic_write",
    "write_json",
    "dist_to_spec",
    "dist_from_spec",
    "load_spec",
    "write_samples_csv",
    "read_points_csv",
    "write_table_csv",
    "read_edges_csv",
    "write_trace_csv",
    "config_from_json",
    "manifold_from_name",
    "florentine_path",
]

FLOAT_FMT = "%.17g"


class DataError(ValueError):
    """Malformed or inconsistent input data (file contents, not usage)."""


def fmt(x):
    return FLOAT_FMT % float(x)


def atomic_write(path, text):
    """Write text to ``path`` via a temp file + rename, so failures never
    leave a partial file behind."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_json(path, obj):
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- distribution specs --------------------------------------------------------


def manifold_from_name(name, dim=2, scale=1.0):
    name = str(name).lower()
    if name in (HYPERBOLOID, "h2"):
        return Manifold.hyperboloid(dim, scale)
    if name in (SPHERE, "s2"):
        return Manifold.sphere(dim, scale)
    if name == EUCLIDEAN:
        return Manifold.euclidean(dim)
    raise DataError(f"unknown manifold {name!r}")


def dist_to_spec(dist):
    return dist.spec_dict()


def dist_from_spec(spec):
    """Build a wrapped normal from its JSON document."""
    try:
        m = spec["manifold"]
        manifold = manifold_from_name(m["kind"], int(m["dim"]), float(m.get("scale", 1.0)))
        variant = spec["variant"]
        if variant not in WRAP_KINDS:
            raise DataError(f"unknown variant {variant!r}")
        location = np.asarray(spec["location"], dtype=float)
        sigma = np.asarray(spec["sigma"], dtype=float)
        trunc = spec.get("truncation_radius")
        wrapping = Wrapping(manifold, manifold.point(location), kind=variant)
        return WrappedNormal(
            wrapping, sigma,
            truncation_radius=None if trunc is None else float(trunc),
        )
    except DataError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad distribution spec: {exc}") from exc


def load_spec(text_or_path):
    """Accept either inline JSON (starts with '{') or a path to a JSON file."""
    s = str(text_or_path).strip()
    if not s.startswith("{"):
        try:
            with open(s) as handle:
                s = handle.read()
        except OSError as exc:
            raise DataError(f"cannot read spec: {exc}") from exc
    try:
        return json.loads(s)
    except json.JSONDecodeError as exc:
        raise DataError(f"spec is not valid JSON: {exc}") from exc


# -- CSV -----------------------------------------------------------------------


def write_samples_csv(path, points, spec=None):
    """One row per point, ambient coordinates; the generating spec rides
    along as a '#' comment so fitters can recover manifold and location."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    lines = []
    if spec is not None:
        lines.append("# " + json.dumps(spec, sort_keys=True))
    lines.append(",".join(f"x{i}" for i in range(points.shape[1])))
    for row in points:
        lines.append(",".join(fmt(v) for v in row))
    atomic_write(path, "\n".join(lines) + "\n")


def read_points_csv(path):
    """Read a point CSV; returns (array, embedded spec dict or None)."""
    spec = None
    rows = []
    try:
        with open(path) as handle:
            for raw in handle:
                line = raw.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    body = line.lstrip("#").strip()
                    if spec is None and body.startswith("{"):
                        try:
                            spec = json.loads(body)
                        except json.JSONDecodeError:
                            pass
                    continue
                cells = line.split(",")
                try:
                    rows.append([float(c) for c in cells])
                except ValueError:
                    if rows:
                        raise DataError(f"non-numeric row in {path}: {line!r}")
                    continue  # header row
    except OSError as exc:
        raise DataError(f"cannot read points: {exc}") from exc
    if not rows:
        raise DataError(f"no data rows in {path}")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise DataError(f"ragged rows in {path}")
    return np.asarray(rows, dtype=float), spec


def write_table_csv(path, header, columns):
    """Generic delimited table: ``columns`` is a list of equal-length arrays
    matching ``header``; integers stay integers, floats get 17 digits."""
    cols = [np.asarray(c) for c in columns]
    if len(cols) != len(header):
        raise ValueError("header/column count mismatch")
    n = cols[0].shape[0]
    if any(c.shape[0] != n for c in cols):
        raise ValueError("columns must have equal length")
    lines = [",".join(header)]
    for i in range(n):
        cells = []
        for c in cols:
            v = c[i]
            if c.dtype.kind in "US":
                cells.append(str(v))
            elif np.issubdtype(c.dtype, np.integer):
                cells.append(str(int(v)))
            else:
                cells.append(fmt(v))
        lines.append(",".join(cells))
    atomic_write(path, "\n".join(lines) + "\n")


def read_edges_csv(path, n=None):
    """Edge list: lines "i,j" of 0-indexed node ids, '#' comments allowed.
    Node count defaults to 1 + the largest id seen."""
    edges = []
    top = -1
    try:
        with open(path) as handle:
            for raw in handle:
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                cells = line.split(",")
                if len(cells) < 2:
                    raise DataError(f"bad edge line {line!r}")
                try:
                    i, j = int(cells[0]), int(cells[1])
                except ValueError as exc:
                    raise DataError(f"bad edge line {line!r}") from exc
                edges.append((i, j))
                top = max(top, i, j)
    except OSError as exc:
        raise DataError(f"cannot read edges: {exc}") from exc
    count = (top + 1) if n is None else int(n)
    try:
        return Graph(n=count, edges=tuple(edges))
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def write_trace_csv(path, trace):
    write_table_csv(
        path,
        ["iteration", "log_posterior", "alpha", "accept_rate_pos", "accept_rate_alpha"],
        [trace.iteration, trace.log_posterior, trace.alpha,
         trace.accept_rate_pos, trace.accept_rate_alpha],
    )


# -- MCMC config ---------------------------------------------------------------


def config_from_json(spec):
    """Build (MCConfig, manifold name or None) from a config document with
    keys iterations, burn_in, thin, seed, step_pos, step_alpha, manifold,
    init."""
    if not isinstance(spec, dict):
        raise DataError("config must be a JSON object")
    if "iterations" not in spec:
        raise DataError("config needs an 'iterations' key")
    known = {"iterations", "burn_in", "thin", "seed", "step_pos", "step_alpha",
             "alpha_init", "init", "sigma0", "alpha_sd", "freeze_positions",
             "manifold"}
    unknown = set(spec) - known
    if unknown:
        raise DataError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {k: spec[k] for k in spec if k != "manifold"}
    try:
        return MCConfig(**kwargs), spec.get("manifold")
    except (TypeError, ValueError) as exc:
        raise DataError(f"bad config: {exc}") from exc


def florentine_path():
    """Path to the bundled 15-family marriage network."""
    return str(resources.files("geowrap").joinpath("data", "florentine.csv"))

"""Latent-space network model on a model manifold.

Edges of an undirected graph are Bernoulli with logit alpha - d(z_i, z_j),
where the z_i live on a hyperboloid, sphere, or plane.  Positions get a
wrapped-normal prior at the base point, the intercept alpha a wide normal
prior.  Inference is random-walk Metropolis-Hastings: position proposals are
equal-area-chart wraps of isotropic Gaussian draws centered at the current
position (symmetric on the manifold, because the chart radius depends only on
geodesic distance), alpha moves by a Gaussian step.  Initialization is
classical multidimensional scaling on graph distances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path
from scipy.special import expit

from .charts import EXP_TRANSPORT, ISOMETRY_LAMBERT, Wrapping
from .distributions import WrappedNormal, disk_truncation_constant
from .manifolds import EUCLIDEAN, HYPERBOLOID, SPHERE

__all__ = [
    "Graph",
    "MCConfig",
    "NetworkState",
    "Trace",
    "pairwise_distances",
    "network_log_likelihood",
    "network_log_posterior",
    "position_prior",
    "mds_init",
    "mh_run",
    "synthetic_graph",
    "geweke_z",
]

ALPHA_PRIOR_SD = 10.0
ACCEPT_BAND = (0.05, 0.8)


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph: node count and 0-indexed edge pairs."""

    n: int
    edges: tuple

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("node count must be nonnegative")
        seen = set()
        canon = []
        for e in self.edges:
            i, j = int(e[0]), int(e[1])
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i},{j}) references a missing node")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            canon.append(key)
        object.__setattr__(self, "edges", tuple(sorted(canon)))

    @property
    def edge_count(self):
        return len(self.edges)

    def adjacency(self):
        a = np.zeros((self.n, self.n), dtype=float)
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a

    def degrees(self):
        return self.adjacency().sum(axis=1).astype(int)


@dataclass
class MCConfig:
    """Settings for one Metropolis-Hastings run."""

    iterations: int
    burn_in: int = None
    thin: int = 1
    step_pos: float = 0.1
    step_alpha: float = 0.2
    alpha_init: float = 0.0
    init: object = "mds"  # "mds", "base", or an explicit (n, ambient) array
    sigma0: float = None  # prior spread; default depends on the manifold
    alpha_sd: float = ALPHA_PRIOR_SD
    freeze_positions: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if self.burn_in is None:
            self.burn_in = self.iterations // 5
        if not 0 <= self.burn_in <= self.iterations:
            raise ValueError("burn-in must lie within the run")
        if self.thin < 1:
            raise ValueError("thinning stride must be at least 1")
        if self.step_pos <= 0 or self.step_alpha <= 0:
            raise ValueError("step sizes must be positive")
        if self.alpha_sd <= 0:
            raise ValueError("alpha prior spread must be positive")


@dataclass
class NetworkState:
    """Positions on the manifold plus the edge-propensity intercept."""

    positions: np.ndarray
    alpha: float
    step_pos: float
    step_alpha: float

    def __post_init__(self):
        if self.step_pos <= 0 or self.step_alpha <= 0:
            raise ValueError("step sizes must be positive")


@dataclass
class Trace:
    """Thinned per-iteration records of the chain."""

    iteration: np.ndarray
    log_posterior: np.ndarray
    alpha: np.ndarray
    accept_rate_pos: np.ndarray
    accept_rate_alpha: np.ndarray
    thin: int
    burn_in: int
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        it = np.asarray(self.iteration)
        if it.size and np.any(np.diff(it) <= 0):
            raise ValueError("trace iterations must be strictly increasing")
        lp = np.asarray(self.log_posterior)
        if lp.size and not np.all(np.isfinite(lp)):
            raise ValueError("trace log-posterior must be finite")

    def __len__(self):
        return int(np.asarray(self.iteration).size)

    def post_burn_in(self):
        keep = np.asarray(self.iteration) > self.burn_in
        return self.alpha[keep], self.log_posterior[keep]


def default_sigma0(manifold):
    """Prior spread: wide on the hyperboloid/plane, narrow on the sphere
    (inside the truncation regime)."""
    return 0.3 if manifold.kind == SPHERE else 1.0


def position_prior(manifold, sigma0=None):
    """The wrapped-normal prior on positions, centered at the base point.

    Uses the equal-area variant in dimension 2 (its plane density needs no
    Jacobian term, which the sampler's fast path exploits) and the transport
    variant otherwise.
    """
    if sigma0 is None:
        sigma0 = default_sigma0(manifold)
    if manifold.kind == EUCLIDEAN:
        kind = EXP_TRANSPORT
    elif manifold.dim == 2:
        kind = ISOMETRY_LAMBERT
    else:
        kind = EXP_TRANSPORT
    wrapping = Wrapping(manifold, manifold.base_point, kind=kind)
    return WrappedNormal(wrapping, sigma0**2 * np.eye(manifold.dim))


def pairwise_distances(manifold, positions):
    """Symmetric (n, n) geodesic distance matrix."""
    n = positions.shape[0]
    d = np.zeros((n, n))
    for i in range(n):
        d[i] = manifold.distance(positions, positions[i])
        d[i, i] = 0.0
    return 0.5 * (d + d.T)


def _pair_ll(adj_flat, eta_flat):
    # Bernoulli log-likelihood with logit eta: y*eta - log(1 + exp(eta)),
    # the log term computed stably for either sign of eta.
    return float(np.dot(adj_flat, eta_flat) - np.logaddexp(0.0, eta_flat).sum())


def network_log_likelihood(manifold, positions, alpha, graph):
    """Sum over unordered pairs of the edge/non-edge log-probabilities."""
    positions = np.asarray(positions, dtype=float)
    if positions.shape[0] != graph.n:
        raise ValueError("position count does not match the graph")
    if graph.n < 2:
        return 0.0
    iu = np.triu_indices(graph.n, 1)
    d = pairwise_distances(manifold, positions)
    return _pair_ll(graph.adjacency()[iu], alpha - d[iu])


def network_log_posterior(manifold, positions, alpha, graph, sigma0=None,
                          alpha_sd=ALPHA_PRIOR_SD):
    """Log-likelihood plus the log priors on positions and intercept."""
    prior = position_prior(manifold, sigma0)
    lp_z = float(np.sum(prior.log_pdf(np.asarray(positions, dtype=float))))
    lp_a = -0.5 * math.log(2.0 * math.pi * alpha_sd**2) - alpha**2 / (2.0 * alpha_sd**2)
    return network_log_likelihood(manifold, positions, alpha, graph) + lp_z + lp_a


# -- initialization -----------------------------------------------------------


def mds_init(graph, manifold):
    """Classical multidimensional scaling of graph distances, wrapped on.

    Shortest-path distances on the largest connected component are double-
    centered and eigen-decomposed; the leading coordinates are scaled to RMS
    norm 1 (and on the sphere shrunk into the prior's truncation disk) and
    wrapped at the base point.  Nodes outside the largest component sit at
    the base point.  Deterministic, including eigenvector sign choices.
    """
    n = graph.n
    p0 = manifold.base_point
    if n == 0:
        return np.zeros((0, manifold.ambient_dim))
    positions = np.tile(p0, (n, 1))
    if n == 1 or graph.edge_count == 0:
        return positions
    adj = csr_matrix(graph.adjacency())
    ncomp, labels = connected_components(adj, directed=False)
    sizes = np.bincount(labels, minlength=ncomp)
    comp = np.flatnonzero(labels == int(np.argmax(sizes)))
    if comp.size < 2:
        return positions
    d = shortest_path(adj, method="D", directed=False, unweighted=True,
                      indices=comp)[:, comp]
    nc = comp.size
    j = np.eye(nc) - np.full((nc, nc), 1.0 / nc)
    b = -0.5 * j @ (d * d) @ j
    vals, vecs = np.linalg.eigh(0.5 * (b + b.T))
    order = np.argsort(vals)[::-1][: manifold.dim]
    lam = np.clip(vals[order], 0.0, None)
    coords = vecs[:, order] * np.sqrt(lam)
    for col in range(coords.shape[1]):
        pivot = np.argmax(np.abs(coords[:, col]))
        if coords[pivot, col] < 0:
            coords[:, col] = -coords[:, col]
    rms = math.sqrt(float(np.mean(np.sum(coords * coords, axis=1))))
    if rms > 0:
        coords = coords / rms
    if manifold.kind == SPHERE:
        limit = 0.98 * math.sqrt(2.0) * manifold.scale
        top = float(np.max(np.linalg.norm(coords, axis=1)))
        if top > limit:
            coords = coords * (limit / top)
    kind = ISOMETRY_LAMBERT if manifold.kind != EUCLIDEAN and manifold.dim == 2 \
        else EXP_TRANSPORT
    wrapping = Wrapping(manifold, p0, kind=kind)
    positions[comp] = wrapping.wrap(coords)
    return positions


# -- the sampler --------------------------------------------------------------


def _chart_radius_sq(manifold, positions):
    """Squared equal-area chart radius of each position about the base point,
    straight from the last ambient coordinate (no chart evaluation needed)."""
    s = manifold.scale
    last = positions[..., -1]
    if manifold.kind == HYPERBOLOID:
        return 2.0 * s * (last - s)
    if manifold.kind == SPHERE:
        return 2.0 * s * (last + s)
    return np.sum(positions * positions, axis=-1)


def _node_log_prior(manifold, sigma0, trunc_log, positions):
    """Per-node log prior density for the dimension-2 equal-area prior (and
    the plain Gaussian on the plane): a Gaussian in the chart radius."""
    r2 = _chart_radius_sq(manifold, positions)
    k = manifold.dim
    out = -0.5 * k * math.log(2.0 * math.pi * sigma0**2) - r2 / (2.0 * sigma0**2)
    out = out - trunc_log
    if manifold.kind == SPHERE:
        out = np.where(r2 > 2.0 * manifold.scale**2, -np.inf, out)
    return out


def _propose_positions(manifold, current, draws):
    """Equal-area wrap of isotropic tangent draws at each current position,
    done without building isometry matrices: the chart radius is converted to
    a geodesic radius and the direction parallel-transported from the base
    point.  Draws landing outside the sphere chart return a rejection mask.
    """
    s = manifold.scale
    r = np.linalg.norm(draws, axis=-1)
    ok = np.ones(r.shape, dtype=bool)
    if manifold.kind == EUCLIDEAN:
        return current + draws, ok
    if manifold.kind == SPHERE:
        ok = r < 2.0 * s * (1.0 - 1e-12)
    safe_r = np.where(r > 0, r, 1.0)
    if manifold.kind == HYPERBOLOID:
        geo = 2.0 * s * np.arcsinh(r / (2.0 * s))
    else:
        geo = 2.0 * s * np.arcsin(np.clip(r / (2.0 * s), 0.0, 1.0))
    unit = draws / safe_r[..., None]
    v0 = manifold.embed_tangent(unit * geo[..., None])
    p0 = manifold.base_point
    moved = manifold.exp(current, manifold.transport(p0, current, v0))
    out = np.where((r > 0)[..., None], moved, current)
    return out, ok


def synthetic_graph(manifold, n, alpha_star, rng, sigma0=None):
    """Draw positions from the prior and edges from the latent-distance
    model; returns (graph, positions)."""
    prior = position_prior(manifold, sigma0)
    z = prior.sample(rng, n)
    d = pairwise_distances(manifold, z)
    iu = np.triu_indices(n, 1)
    p = expit(alpha_star - d[iu])
    draws = rng.random(p.size) < p
    edges = [(int(i), int(j)) for i, j, hit in zip(iu[0], iu[1], draws) if hit]
    return Graph(n=n, edges=tuple(edges)), z


def mh_run(graph, manifold, config, rng=None):
    """Random-walk Metropolis-Hastings over positions and intercept.

    Position proposals are symmetric manifold moves (see _propose_positions),
    so acceptance uses plain posterior ratios; likelihood changes are applied
    one node at a time through that node's distance row.  Records a thinned
    trace; deterministic for a given seed.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    n = graph.n
    k = manifold.dim
    sigma0 = config.sigma0 if config.sigma0 is not None else default_sigma0(manifold)

    if isinstance(config.init, str):
        if config.init == "mds":
            z = mds_init(graph, manifold)
        elif config.init == "base":
            z = np.tile(manifold.base_point, (n, 1))
        else:
            raise ValueError(f"unknown initialization mode {config.init!r}")
    else:
        z = manifold.point(np.asarray(config.init, dtype=float))
        if z.shape[0] != n:
            raise ValueError("initial positions do not match the node count")
    alpha = float(config.alpha_init)

    trunc_log = 0.0
    if manifold.kind == SPHERE:
        trunc_log = math.log(
            disk_truncation_constant(sigma0**2 * np.eye(k),
                                     math.sqrt(2.0) * manifold.scale)
        )
    if manifold.kind != EUCLIDEAN and k != 2:
        raise ValueError("the sampler's fast prior path requires dimension 2")

    adj = graph.adjacency()
    iu = np.triu_indices(n, 1)
    dmat = pairwise_distances(manifold, z)
    prior_vals = _node_log_prior(manifold, sigma0, trunc_log, z)
    alpha_lp = lambda a: (-0.5 * math.log(2.0 * math.pi * config.alpha_sd**2)
                          - a * a / (2.0 * config.alpha_sd**2))

    def total_log_posterior():
        return (_pair_ll(adj[iu], alpha - dmat[iu])
                + float(prior_vals.sum()) + alpha_lp(alpha))

    current_lp = total_log_posterior()
    if not np.isfinite(current_lp):
        raise ValueError("initial state has zero posterior density")

    rec_iter, rec_lp, rec_alpha, rec_ap, rec_aa = [], [], [], [], []
    acc_pos = tot_pos = acc_alpha = tot_alpha = 0
    # warning accounting covers only the post-burn-in stretch
    post_acc_pos = post_tot_pos = post_acc_alpha = post_tot_alpha = 0

    def row_ll(i, row):
        mask = np.ones(n, dtype=bool)
        mask[i] = False
        eta = alpha - row[mask]
        return float(np.dot(adj[i, mask], eta) - np.logaddexp(0.0, eta).sum())

    for it in range(1, config.iterations + 1):
        post = it > config.burn_in
        if not config.freeze_positions and n > 0:
            draws = config.step_pos * rng.standard_normal((n, k))
            unis = rng.random(n)
            proposals, feasible = _propose_positions(manifold, z, draws)
            tot_pos += n
            if post:
                post_tot_pos += n
            for i in range(n):
                if not feasible[i]:
                    continue
                zi = proposals[i]
                new_row = manifold.distance(z, zi)
                new_row[i] = 0.0
                new_prior = _node_log_prior(manifold, sigma0, trunc_log, zi)
                if not np.isfinite(new_prior):
                    continue
                delta = (row_ll(i, new_row) - row_ll(i, dmat[i])
                         + new_prior - prior_vals[i])
                if delta >= 0.0 or unis[i] < math.exp(delta):
                    z[i] = zi
                    dmat[i, :] = new_row
                    dmat[:, i] = new_row
                    prior_vals[i] = new_prior
                    current_lp += delta
                    acc_pos += 1
                    if post:
                        post_acc_pos += 1
        # intercept move
        tot_alpha += 1
        if post:
            post_tot_alpha += 1
        prop = alpha + config.step_alpha * float(rng.standard_normal())
        eta_old = alpha - dmat[iu]
        eta_new = prop - dmat[iu]
        delta = (float(np.dot(adj[iu], eta_new - eta_old))
                 - float((np.logaddexp(0.0, eta_new)
                          - np.logaddexp(0.0, eta_old)).sum())
                 + alpha_lp(prop) - alpha_lp(alpha))
        if delta >= 0.0 or rng.random() < math.exp(delta):
            alpha = prop
            current_lp += delta
            acc_alpha += 1
            if post:
                post_acc_alpha += 1
        if it % config.thin == 0:
            rec_iter.append(it)
            rec_lp.append(current_lp)
            rec_alpha.append(alpha)
            rec_ap.append(acc_pos / tot_pos if tot_pos else 0.0)
            rec_aa.append(acc_alpha / tot_alpha if tot_alpha else 0.0)

    warnings = []
    for name, acc, tot in (("position", post_acc_pos, post_tot_pos),
                           ("alpha", post_acc_alpha, post_tot_alpha)):
        if tot:
            rate = acc / tot
            if not ACCEPT_BAND[0] <= rate <= ACCEPT_BAND[1]:
                warnings.append(
                    f"{name} acceptance rate {rate:.3f} after burn-in, "
                    f"outside [{ACCEPT_BAND[0]}, {ACCEPT_BAND[1]}]"
                )
    state = NetworkState(positions=z, alpha=alpha,
                         step_pos=config.step_pos, step_alpha=config.step_alpha)
    trace = Trace(
        iteration=np.asarray(rec_iter, dtype=int),
        log_posterior=np.asarray(rec_lp, dtype=float),
        alpha=np.asarray(rec_alpha, dtype=float),
        accept_rate_pos=np.asarray(rec_ap, dtype=float),
        accept_rate_alpha=np.asarray(rec_aa, dtype=float),
        thin=config.thin,
        burn_in=config.burn_in,
        warnings=warnings,
    )
    return state, trace


def geweke_z(values, first=0.1, last=0.5):
    """Convergence z-score comparing the mean of the first ``first`` fraction
    of a trace with the last ``last`` fraction, with batch-means variances
    (robust to autocorrelation)."""
    x = np.asarray(values, dtype=float)
    if x.size < 20:
        raise ValueError("too few trace points for a stable diagnostic")
    a = x[: max(2, int(first * x.size))]
    b = x[int((1.0 - last) * x.size):]

    def batch_var_of_mean(seg):
        nb = min(20, max(2, seg.size // 10))
        cut = (seg.size // nb) * nb
        means = seg[:cut].reshape(nb, -1).mean(axis=1)
        return float(np.var(means, ddof=1) / nb)

    va, vb = batch_var_of_mean(a), batch_var_of_mean(b)
    gap = float(a.mean() - b.mean())
    if va + vb == 0.0:
        return 0.0 if gap == 0.0 else math.inf
    return gap / math.sqrt(va + vb)

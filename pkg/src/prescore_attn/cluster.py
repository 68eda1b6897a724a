"""Lloyd-style clustering used to pre-score keys.

Supports k-means (squared l2), k-median (l1), Minkowski l_p^p k-means and
Gaussian-kernel k-means. All variants share the same distance-weighted
seeding so that runs with equal seeds start from identical centroids.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ClusteringError
from .matrix import as_matrix, make_rng, pairwise_sq_dist

MAX_CONSECUTIVE_RESEEDS = 10
GOLDEN_TOL = 1e-10
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_CHUNK_ELEMS = 1 << 23


class Method(str, enum.Enum):
    KMEANS = "KMEANS"
    KMEDIAN = "KMEDIAN"
    KERNEL_KMEANS = "KERNEL_KMEANS"
    LP_KMEANS = "LP_KMEANS"
    LEVERAGE = "LEVERAGE"
    LEVERAGE_EXACT = "LEVERAGE_EXACT"

    @property
    def is_clustering(self) -> bool:
        return self not in (Method.LEVERAGE, Method.LEVERAGE_EXACT)


class Selection(str, enum.Enum):
    # smallest clusters first, then distance to the assigned centroid
    CLUSTER_SIZE = "cluster_size"
    # one global ascending sort of distance to the assigned centroid
    DISTANCE = "distance"


@dataclass(frozen=True)
class PreScoreConfig:
    method: Method = Method.KMEANS
    k: int = 2
    s: int = 1
    sigma: float = 0.0
    p: float = 2.0
    kernel_bandwidth: float = 1.0
    restarts: int = 10
    max_iters: int = 100
    tol: float = 1e-9
    seed: int = 0
    sketch_rows: int | None = None
    selection: Selection = Selection.CLUSTER_SIZE
    local_trials: int = 8

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "selection", Selection(self.selection))
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.s < 1:
            raise ValueError("s must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.p <= 0:
            raise ValueError("p must be > 0")
        if self.kernel_bandwidth <= 0:
            raise ValueError("kernel_bandwidth must be > 0")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")
        if self.local_trials < 1:
            raise ValueError("local_trials must be >= 1")


@dataclass
class Clustering:
    assignment: np.ndarray
    centroids: np.ndarray
    objective: float
    iterations: int
    converged: bool
    point_costs: np.ndarray
    trace: list[float] = field(default_factory=list)
    restart: int = 0

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)


def _metric(cfg: PreScoreConfig):
    """Return ("sq" | "l1" | "lp", p) for a clustering config."""
    if cfg.method in (Method.KMEANS, Method.KERNEL_KMEANS):
        return "sq", 2.0
    if cfg.method == Method.KMEDIAN:
        return "l1", 1.0
    if cfg.method == Method.LP_KMEANS:
        if cfg.p == 2:
            return "sq", 2.0
        if cfg.p == 1:
            return "l1", 1.0
        return "lp", float(cfg.p)
    raise ValueError(f"{cfg.method.value} is not a clustering method")


def metric_distances(x: np.ndarray, c: np.ndarray, kind: str, p: float = 2.0, fast: bool = False) -> np.ndarray:
    """Point-to-centroid costs: ``||x - c||_2^2``, ``||x - c||_1`` or ``||x - c||_p^p``.

    ``fast`` uses the Gram expansion for the squared case (assignment only).
    """
    if kind == "sq":
        if fast:
            d = (x * x).sum(axis=1)[:, None] - 2.0 * (x @ c.T) + (c * c).sum(axis=1)[None, :]
            return np.maximum(d, 0.0)
        return pairwise_sq_dist(x, c)
    out = np.empty((x.shape[0], c.shape[0]))
    step = max(1, _CHUNK_ELEMS // max(1, c.size))
    for start in range(0, x.shape[0], step):
        diff = np.abs(x[start:start + step, None, :] - c[None, :, :])
        out[start:start + step] = diff.sum(axis=2) if kind == "l1" else (diff**p).sum(axis=2)
    return out


def lp_center(points: np.ndarray, p: float) -> np.ndarray:
    """Coordinate-wise minimizer of ``sum |x - c|^p`` by golden-section search.

    Convex for p >= 1; for p < 1 the search is a heuristic local minimizer.
    """
    lo = points.min(axis=0)
    hi = points.max(axis=0)

    def f(c):
        return (np.abs(points - c) ** p).sum(axis=0)

    a = hi - _INV_PHI * (hi - lo)
    b = lo + _INV_PHI * (hi - lo)
    fa, fb = f(a), f(b)
    for _ in range(200):
        if np.all(hi - lo <= GOLDEN_TOL):
            break
        left = fa <= fb
        hi = np.where(left, b, hi)
        lo = np.where(left, lo, a)
        new_a = hi - _INV_PHI * (hi - lo)
        new_b = lo + _INV_PHI * (hi - lo)
        # reuse the surviving interior point on each side
        a, b = np.where(left, new_a, b), np.where(left, a, new_b)
        fa, fb = np.where(left, f(a), fb), np.where(left, fa, f(b))
    center = (lo + hi) / 2.0
    # the bracket endpoints are data values; keep whichever is best
    cands = np.stack([center, lo, hi])
    vals = np.stack([f(cands[0]), f(cands[1]), f(cands[2])])
    return cands[np.argmin(vals, axis=0), np.arange(points.shape[1])]


def _assigned_costs(x, c, kind, p):
    diff = x - c
    if kind == "sq":
        return np.einsum("ij,ij->i", diff, diff)
    if kind == "l1":
        return np.abs(diff).sum(axis=1)
    return (np.abs(diff) ** p).sum(axis=1)


def _update_centroids(x, assignment, centroids, kind, p):
    new = centroids.copy()
    for j in range(centroids.shape[0]):
        members = x[assignment == j]
        if members.shape[0] == 0:
            continue
        if kind == "sq":
            new[j] = members.mean(axis=0)
        elif kind == "l1":
            new[j] = np.median(members, axis=0)
        else:
            new[j] = lp_center(members, p)
    return new


def seed_centroids(x: np.ndarray, k: int, rng: np.random.Generator, local_trials: int = 8) -> np.ndarray:
    """Distance-weighted seeding: candidates drawn with probability proportional
    to the squared distance to the nearest chosen seed; the candidate that most
    lowers the total squared distance is kept (``local_trials`` candidates per
    step; 1 gives plain k-means++).

    Returns the row indices of the seeds.
    """
    n = x.shape[0]
    trials = local_trials
    chosen = [int(rng.integers(n))]
    closest = metric_distances(x, x[chosen], "sq", fast=True)[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            # every point coincides with a seed already
            cand = rng.integers(n, size=trials)
        else:
            cdf = np.cumsum(closest)
            cand = np.searchsorted(cdf, rng.random(trials) * cdf[-1], side="right")
            cand = np.minimum(cand, n - 1)
        cand_d = np.minimum(closest[None, :], metric_distances(x[cand], x, "sq", fast=True))
        best = int(np.argmin(cand_d.sum(axis=1)))
        chosen.append(int(cand[best]))
        closest = cand_d[best]
    return np.asarray(chosen, dtype=np.int64)


def _repair_empty(x, dist, assignment, centroids, k):
    """Move the worst-served point into each empty cluster. Returns #reseeds."""
    reseeds = 0
    counts = np.bincount(assignment, minlength=k)
    for j in np.flatnonzero(counts == 0):
        own = dist[np.arange(x.shape[0]), assignment]
        movable = counts[assignment] > 1
        if not movable.any():
            break
        cost = np.where(movable, own, -1.0)
        i = int(np.argmax(cost))
        if cost[i] <= 0:
            # remaining points sit on their centroids; nothing to gain
            break
        counts[assignment[i]] -= 1
        assignment[i] = j
        counts[j] = 1
        centroids[j] = x[i]
        dist[i, j] = 0.0
        reseeds += 1
    return reseeds


def _lloyd_once(x, cfg, kind, p, rng, restart):
    centroids = x[seed_centroids(x, cfg.k, rng, cfg.local_trials)].copy()
    assignment = None
    trace: list[float] = []
    consecutive = 0
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        dist = metric_distances(x, centroids, kind, p, fast=True)
        new_assignment = np.argmin(dist, axis=1)
        reseeds = _repair_empty(x, dist, new_assignment, centroids, cfg.k)
        consecutive = consecutive + 1 if reseeds else 0
        if consecutive > MAX_CONSECUTIVE_RESEEDS:
            raise ClusteringError(f"empty-cluster repair failed {consecutive} iterations in a row")
        unchanged = assignment is not None and np.array_equal(new_assignment, assignment)
        assignment = new_assignment
        centroids = _update_centroids(x, assignment, centroids, kind, p)
        costs = _assigned_costs(x, centroids[assignment], kind, p)
        obj = float(costs.sum())
        prev = trace[-1] if trace else math.inf
        trace.append(obj)
        if unchanged or (prev - obj) <= cfg.tol * abs(prev):
            converged = True
            break
    return Clustering(assignment=assignment, centroids=centroids, objective=trace[-1], iterations=it,
                      converged=converged, point_costs=costs, trace=trace, restart=restart)


def _best(runs):
    return min(runs, key=lambda c: (c.objective, c.restart))


def lloyd_cluster(k_matrix, cfg: PreScoreConfig) -> Clustering:
    x = as_matrix(k_matrix)
    if cfg.k > x.shape[0]:
        raise ClusteringError(f"k={cfg.k} exceeds the number of rows {x.shape[0]}")
    kind, p = _metric(cfg)
    runs = [_lloyd_once(x, cfg, kind, p, make_rng(cfg.seed, r), r) for r in range(cfg.restarts)]
    return _best(runs)


def _kernel_once(kt, x, cfg, rng, restart):
    n = x.shape[0]
    k = cfg.k
    seeds = seed_centroids(x, k, rng, cfg.local_trials)
    # distance to a singleton cluster {c}: -2 (kappa(x, c) - 1)
    dist = -2.0 * kt[:, seeds]
    assignment = None
    new_assignment = np.argmin(dist, axis=1)
    trace: list[float] = []
    consecutive = 0
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        if it > 1:
            new_assignment = np.argmin(dist, axis=1)
        counts = np.bincount(new_assignment, minlength=k)
        reseeds = 0
        for j in np.flatnonzero(counts == 0):
            own = dist[np.arange(n), new_assignment]
            movable = counts[new_assignment] > 1
            cost = np.where(movable, own, -1.0)
            i = int(np.argmax(cost))
            if cost[i] <= 0:
                break
            counts[new_assignment[i]] -= 1
            new_assignment[i] = j
            counts[j] = 1
            reseeds += 1
        consecutive = consecutive + 1 if reseeds else 0
        if consecutive > MAX_CONSECUTIVE_RESEEDS:
            raise ClusteringError(f"empty-cluster repair failed {consecutive} iterations in a row")
        unchanged = assignment is not None and np.array_equal(new_assignment, assignment)
        assignment = new_assignment
        dist = _kernel_distances(kt, assignment, k)
        costs = dist[np.arange(n), assignment]
        obj = float(max(costs.sum(), 0.0))
        prev = trace[-1] if trace else math.inf
        trace.append(obj)
        if unchanged or (prev - obj) <= cfg.tol * abs(prev):
            converged = True
            break
    centroids = np.zeros((k, x.shape[1]))
    for j in range(k):
        members = x[assignment == j]
        if members.shape[0]:
            centroids[j] = members.mean(axis=0)
    return Clustering(assignment=assignment, centroids=centroids, objective=obj, iterations=it,
                      converged=converged, point_costs=np.maximum(costs, 0.0), trace=trace, restart=restart)


def _kernel_distances(kt, assignment, k):
    """Feature-space squared distance of every point to every cluster mean.

    Uses ``kt = kappa - 1`` so the constant parts cancel exactly:
    ``(kappa(x,x)-1) - 2 avg(kappa(x,y)-1) + avg(kappa(y,z)-1)``.
    """
    n = kt.shape[0]
    onehot = np.zeros((n, k))
    onehot[np.arange(n), assignment] = 1.0
    counts = onehot.sum(axis=0)
    safe = np.where(counts > 0, counts, 1.0)
    cross = (kt @ onehot) / safe
    within = np.einsum("ij,ij->j", onehot, kt @ onehot) / safe**2
    dist = -2.0 * cross + within[None, :]
    dist[:, counts == 0] = np.inf
    return dist


def kernel_kmeans_cluster(k_matrix, cfg: PreScoreConfig) -> Clustering:
    """Gaussian-kernel k-means, ``kappa(x, y) = exp(-||x-y||^2 / (2 h^2))``.

    ``centroids`` hold input-space cluster means; ``objective`` and
    ``point_costs`` are feature-space costs.
    """
    x = as_matrix(k_matrix)
    if cfg.k > x.shape[0]:
        raise ClusteringError(f"k={cfg.k} exceeds the number of rows {x.shape[0]}")
    kt = np.expm1(-pairwise_sq_dist(x, x) / (2.0 * cfg.kernel_bandwidth**2))
    runs = [_kernel_once(kt, x, cfg, make_rng(cfg.seed, r), r) for r in range(cfg.restarts)]
    return _best(runs)


def cluster(k_matrix, cfg: PreScoreConfig) -> Clustering:
    if cfg.method == Method.KERNEL_KMEANS:
        return kernel_kmeans_cluster(k_matrix, cfg)
    return lloyd_cluster(k_matrix, cfg)

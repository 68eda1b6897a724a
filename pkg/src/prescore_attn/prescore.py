"""Key pre-scoring: pick the ``s`` keys that approximate attention should keep."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cluster import Clustering, Method, PreScoreConfig, Selection, cluster
from .errors import DimensionMismatchError
from .exact import exact_leverage_scores
from .matrix import Rng, as_matrix, gaussian_matrix
from .sketch import approx_leverage_scores

__all__ = ["Method", "PreScoreConfig", "ScoredKeySet", "prescore", "default_sketch_rows"]


@dataclass(frozen=True)
class ScoredKeySet:
    """Retained key indices in rank order.

    ``scores`` are distances to the assigned centroid (clustering methods) or
    leverage scores (leverage methods). For clustering under the
    ``cluster_size`` selection rule keys are ordered by ``(cluster_sizes,
    scores, index)``; otherwise by score alone, ascending for distances and
    descending for leverage.
    """

    indices: np.ndarray
    scores: np.ndarray
    method: Method
    cluster_sizes: np.ndarray | None = None
    clustering: Clustering | None = None

    def __len__(self) -> int:
        return len(self.indices)


def default_sketch_rows(n: int, d: int) -> int:
    return min(n, 8 * d)


def prescore(k_matrix, cfg: PreScoreConfig, rng: Rng) -> ScoredKeySet:
    k = as_matrix(k_matrix, "k")
    n, d = k.shape
    if cfg.s > n:
        raise DimensionMismatchError(f"cannot retain s={cfg.s} of {n} keys")
    noisy = k + gaussian_matrix(rng, n, d, 0.0, cfg.sigma) if cfg.sigma > 0 else k

    if not cfg.method.is_clustering:
        if cfg.method == Method.LEVERAGE_EXACT:
            h = exact_leverage_scores(noisy)
        else:
            rows = cfg.sketch_rows or default_sketch_rows(n, d)
            h = approx_leverage_scores(noisy, rows, rng)
        order = np.lexsort((np.arange(n), -h))[: cfg.s]
        return ScoredKeySet(indices=order, scores=h[order], method=cfg.method)

    cl = cluster(noisy, cfg)
    cost = cl.point_costs
    sizes = cl.sizes()[cl.assignment]
    if cfg.selection == Selection.CLUSTER_SIZE:
        order = np.lexsort((np.arange(n), cost, sizes))[: cfg.s]
    else:
        order = np.lexsort((np.arange(n), cost))[: cfg.s]
    return ScoredKeySet(indices=order, scores=cost[order], method=cfg.method,
                        cluster_sizes=sizes[order], clustering=cl)

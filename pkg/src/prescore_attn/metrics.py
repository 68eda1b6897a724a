"""Evaluation metrics: heavy-entry coverage, partition recovery, output error."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, NumericError
from .exact import attention_matrix
from .prescore import ScoredKeySet

CSV_FIELDS = ("epsilon", "keys_sampled", "method", "heavy_total", "heavy_captured",
              "percentage", "topk_percentage", "seed")


@dataclass(frozen=True)
class CoverageReport:
    epsilon: float
    keys_sampled: int
    heavy_total: int
    heavy_captured: int
    percentage: float
    topk_columns_captured: int
    topk_percentage: float

    def csv_row(self, method: str, seed: int) -> dict:
        return {"epsilon": self.epsilon, "keys_sampled": self.keys_sampled, "method": method,
                "heavy_total": self.heavy_total, "heavy_captured": self.heavy_captured,
                "percentage": self.percentage, "topk_percentage": self.topk_percentage, "seed": seed}


def _indices(selected) -> np.ndarray:
    if isinstance(selected, ScoredKeySet):
        return np.asarray(selected.indices)
    return np.asarray(selected, dtype=np.int64)


def heavy_coverage(q, k, selected, epsilon: float) -> CoverageReport:
    """Share of heavy entries (normalized weight above ``epsilon``) whose key is selected.

    Also reports how many of the ``|selected|`` columns holding the most heavy
    entries are themselves selected (ties broken by lower column index).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    a = attention_matrix(q, k, normalized=True)
    idx = _indices(selected)
    n_keys = a.shape[1]
    if idx.size and (idx.min() < 0 or idx.max() >= n_keys):
        raise DimensionMismatchError(f"selected indices out of range for {n_keys} keys")
    chosen = np.zeros(n_keys, dtype=bool)
    chosen[idx] = True
    heavy = a > epsilon
    per_col = heavy.sum(axis=0)
    total = int(per_col.sum())
    captured = int(per_col[chosen].sum())
    n_sel = int(chosen.sum())
    if total == 0:
        return CoverageReport(epsilon, n_sel, 0, 0, 100.0, 0, 100.0)
    top = np.lexsort((np.arange(n_keys), -per_col))[:n_sel]
    top_hit = int(chosen[top].sum())
    return CoverageReport(epsilon=float(epsilon), keys_sampled=n_sel, heavy_total=total,
                          heavy_captured=captured, percentage=100.0 * captured / total,
                          topk_columns_captured=top_hit,
                          topk_percentage=100.0 * top_hit / n_sel if n_sel else 100.0)


def recovery_score(labels, assignment) -> float:
    """Adjusted Rand index between two partitions."""
    labels = np.asarray(labels)
    assignment = np.asarray(assignment)
    if labels.shape != assignment.shape:
        raise DimensionMismatchError(f"length mismatch: {labels.shape} vs {assignment.shape}")
    n = labels.size
    _, li = np.unique(labels, return_inverse=True)
    _, ai = np.unique(assignment, return_inverse=True)
    table = np.zeros((li.max() + 1, ai.max() + 1), dtype=np.int64)
    np.add.at(table, (li, ai), 1)

    def pairs(x):
        x = np.asarray(x, dtype=np.float64)
        return float((x * (x - 1) / 2).sum())

    index = pairs(table)
    a = pairs(table.sum(axis=1))
    b = pairs(table.sum(axis=0))
    total = n * (n - 1) / 2
    expected = a * b / total if total else 0.0
    max_index = (a + b) / 2
    if max_index == expected:
        # both partitions trivial (all one cluster or all singletons)
        return 1.0
    return (index - expected) / (max_index - expected)


def attention_error(approx, exact) -> float:
    """Relative Frobenius error ``||approx - exact||_F / ||exact||_F``."""
    a = np.asarray(getattr(approx, "out", approx), dtype=np.float64)
    e = np.asarray(getattr(exact, "out", exact), dtype=np.float64)
    if a.shape != e.shape:
        raise DimensionMismatchError(f"shape mismatch: {a.shape} vs {e.shape}")
    norm = np.linalg.norm(e)
    if norm == 0:
        raise NumericError("exact output has zero norm")
    return float(np.linalg.norm(a - e) / norm)

"""Brute-force softmax attention and exact leverage scores.

These are the reference oracles for every approximation in the package.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatchError, NumericError, SingularGramError
from .matrix import as_matrix

CONDITION_CAP = 1e12

# query rows per chunk; bounds the n_q x n_k temporary
_ROW_CHUNK = 1024


@dataclass(frozen=True)
class AttentionOutput:
    """Exact attention ``D^-1 exp(QK^T) V``.

    ``log_row_sums`` holds ``log D_ii``; the linear-scale ``row_sums`` property
    can overflow for very large logits even though ``out`` stays finite.
    """

    out: np.ndarray
    log_row_sums: np.ndarray

    @property
    def row_sums(self) -> np.ndarray:
        return np.exp(self.log_row_sums)


def _check_qk(q, k):
    q = as_matrix(q, "q")
    k = as_matrix(k, "k")
    if q.shape[1] != k.shape[1]:
        raise DimensionMismatchError(f"q has {q.shape[1]} columns, k has {k.shape[1]}")
    return q, k


def exact_attention(q, k, v) -> AttentionOutput:
    q, k = _check_qk(q, k)
    v = as_matrix(v, "v")
    if k.shape[0] != v.shape[0]:
        raise DimensionMismatchError(f"k has {k.shape[0]} rows, v has {v.shape[0]}")
    out = np.empty((q.shape[0], v.shape[1]))
    lse = np.empty(q.shape[0])
    for start in range(0, q.shape[0], _ROW_CHUNK):
        logits = q[start:start + _ROW_CHUNK] @ k.T
        row_max = logits.max(axis=1, keepdims=True)
        w = np.exp(logits - row_max)
        denom = w.sum(axis=1)
        out[start:start + _ROW_CHUNK] = (w @ v) / denom[:, None]
        lse[start:start + _ROW_CHUNK] = row_max[:, 0] + np.log(denom)
    if not (np.all(np.isfinite(out)) and np.all(np.isfinite(lse))):
        raise NumericError("attention overflowed despite max-subtraction")
    return AttentionOutput(out=out, log_row_sums=lse)


def attention_matrix(q, k, normalized: bool = True) -> np.ndarray:
    """``exp(QK^T)``, or its row-stochastic normalization when ``normalized``."""
    q, k = _check_qk(q, k)
    logits = q @ k.T
    if not normalized:
        with np.errstate(over="ignore"):
            a = np.exp(logits)
        if not np.all(np.isfinite(a)):
            raise NumericError("exp(QK^T) overflows float64; use normalized=True")
        return a
    w = np.exp(logits - logits.max(axis=1, keepdims=True))
    return w / w.sum(axis=1, keepdims=True)


def exact_leverage_scores(a, allow_rank_deficient: bool = False) -> np.ndarray:
    """Row leverage scores ``h_i = a_i (a^T a)^+ a_i^T``.

    Computed as squared row norms of the orthogonal factor of a pivoted QR.
    A Gram condition number above ``CONDITION_CAP`` raises
    :class:`SingularGramError` unless ``allow_rank_deficient`` is set, in which
    case the scores use the numerical column space (an SVD) and sum to the
    numerical rank.
    """
    a = as_matrix(a)
    n, d = a.shape
    if n < d:
        raise DimensionMismatchError(f"need rows >= cols, got {n}x{d}")
    qf, r, _ = scipy.linalg.qr(a, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    # pivoted QR: |r_11| >= |r_22| >= ..., so the diagonal ratio tracks sqrt(cond(Gram))
    if diag[0] > 0 and diag[-1] > diag[0] / np.sqrt(CONDITION_CAP):
        sv = scipy.linalg.svdvals(r)
        if sv[-1] > 0 and (sv[0] / sv[-1]) ** 2 <= CONDITION_CAP:
            return np.einsum("ij,ij->i", qf, qf)
    if not allow_rank_deficient:
        raise SingularGramError(f"Gram matrix of a {n}x{d} input is singular or has condition number above {CONDITION_CAP:g}")
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros(n)
    rank = int(np.sum(s**2 > s[0] ** 2 / CONDITION_CAP))
    u = u[:, :rank]
    return np.einsum("ij,ij->i", u, u)

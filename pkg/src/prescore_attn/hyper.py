"""LSH-sorted block attention and its pre-scored composition.

Queries and keys are hashed with shared random hyperplanes, both sides are
sorted by the Gray-code rank of their hash, and attention is evaluated
exactly inside aligned diagonal blocks. Optional residual sampling adds
uniformly drawn off-block keys with importance weights.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .cluster import PreScoreConfig
from .errors import DimensionMismatchError, NumericError
from .exact import AttentionOutput, exact_attention
from .matrix import Rng, as_matrix, child_rng, make_rng
from .prescore import ScoredKeySet, prescore


@dataclass(frozen=True)
class HyperConfig:
    lsh_bits: int = 8
    block_size: int = 64
    residual_samples: int = 0
    min_seq_len: int = 0
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.lsh_bits <= 63:
            raise ValueError("lsh_bits must lie in [1, 63]")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if self.residual_samples < 0:
            raise ValueError("residual_samples must be >= 0")


@dataclass(frozen=True)
class PreScoredConfig:
    prescore: PreScoreConfig
    hyper: HyperConfig = field(default_factory=HyperConfig)
    delta: float = 0.0
    # residual sampling is off inside the pre-scored call unless requested
    keep_residual: bool = False

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")


@dataclass
class AttentionResult:
    out: np.ndarray
    log_row_sums: np.ndarray
    blocks_evaluated: int
    keys_retained: int
    wall_time: float
    fallback: bool = False
    selected: np.ndarray | None = None
    scored: ScoredKeySet | None = None

    @property
    def row_sums(self) -> np.ndarray:
        return np.exp(self.log_row_sums)


def angular_lsh_codes(m, lsh_bits: int, rng: Rng | None = None, hyperplanes: np.ndarray | None = None) -> np.ndarray:
    """Sign patterns of ``m`` against ``lsh_bits`` Gaussian hyperplanes.

    Bit ``b`` of ``code[i]`` is set when ``m_i . g_b > 0``. Pass either a
    generator (hyperplanes are drawn from it) or explicit ``hyperplanes``
    of shape ``(cols, lsh_bits)``.
    """
    m = as_matrix(m)
    if not 1 <= lsh_bits <= 63:
        raise ValueError("lsh_bits must lie in [1, 63]")
    if hyperplanes is None:
        if rng is None:
            raise ValueError("need rng or hyperplanes")
        hyperplanes = rng.standard_normal((m.shape[1], lsh_bits))
    if hyperplanes.shape != (m.shape[1], lsh_bits):
        raise DimensionMismatchError(f"hyperplanes shape {hyperplanes.shape} != {(m.shape[1], lsh_bits)}")
    bits = (m @ hyperplanes > 0).astype(np.uint64)
    weights = np.left_shift(np.uint64(1), np.arange(lsh_bits, dtype=np.uint64))
    return (bits * weights).sum(axis=1, dtype=np.uint64)


def gray_rank(codes: np.ndarray) -> np.ndarray:
    """Position of each code in the reflected Gray sequence (inverse Gray map)."""
    r = np.asarray(codes, dtype=np.uint64).copy()
    shift = 1
    while shift < 64:
        r ^= r >> np.uint64(shift)
        shift *= 2
    return r


def _block_bounds(n_keys: int, n_queries: int, block_size: int):
    n_blocks = max(1, math.ceil(n_keys / block_size))
    kb = [min(b * block_size, n_keys) for b in range(n_blocks + 1)]
    if n_queries == n_keys:
        qb = kb
    else:
        qb = [round(b * n_queries / n_keys) for b in kb]
    return n_blocks, kb, qb


def hyper_attention(q, k, v, cfg: HyperConfig, rng: Rng) -> AttentionResult:
    t0 = time.perf_counter()
    q = as_matrix(q, "q")
    k = as_matrix(k, "k")
    v = as_matrix(v, "v")
    if q.shape[1] != k.shape[1] or k.shape[0] != v.shape[0]:
        raise DimensionMismatchError(f"incompatible shapes q{q.shape} k{k.shape} v{v.shape}")
    n_keys = k.shape[0]
    if n_keys < cfg.min_seq_len:
        exact = exact_attention(q, k, v)
        return AttentionResult(out=exact.out, log_row_sums=exact.log_row_sums, blocks_evaluated=1,
                               keys_retained=n_keys, wall_time=time.perf_counter() - t0, fallback=True)
    if cfg.residual_samples > n_keys:
        raise ValueError(f"residual_samples={cfg.residual_samples} exceeds the {n_keys} keys")

    planes = rng.standard_normal((q.shape[1], cfg.lsh_bits))
    q_order = np.argsort(gray_rank(angular_lsh_codes(q, cfg.lsh_bits, hyperplanes=planes)), kind="stable")
    k_order = np.argsort(gray_rank(angular_lsh_codes(k, cfg.lsh_bits, hyperplanes=planes)), kind="stable")
    res_rng = child_rng(rng) if cfg.residual_samples else None

    n_blocks, kb, qb = _block_bounds(n_keys, q.shape[0], cfg.block_size)
    out = np.empty((q.shape[0], v.shape[1]))
    lse = np.empty(q.shape[0])
    for b in range(n_blocks):
        rows = q_order[qb[b]:qb[b + 1]]
        if rows.size == 0:
            continue
        k_start, k_end = kb[b], kb[b + 1]
        cols = k_order[k_start:k_end]
        qb_ = q[rows]
        logits = qb_ @ k[cols].T
        row_max = logits.max(axis=1)
        outside = n_keys - cols.size
        r = cfg.residual_samples if outside > 0 else 0
        if r:
            # draw from the off-block keys: sorted positions [0, k_start) u [k_end, n)
            pos = res_rng.integers(0, outside, size=(rows.size, r))
            pos = np.where(pos < k_start, pos, pos + cols.size)
            sampled = k_order[pos]
            res_logits = np.einsum("id,ird->ir", qb_, k[sampled])
            row_max = np.maximum(row_max, res_logits.max(axis=1))
        w = np.exp(logits - row_max[:, None])
        num = w @ v[cols]
        den = w.sum(axis=1)
        if r:
            rw = np.exp(res_logits - row_max[:, None]) * (outside / r)
            num += np.einsum("ir,irv->iv", rw, v[sampled])
            den += rw.sum(axis=1)
        if np.any(den <= 0):
            raise NumericError("estimated row sum is zero; increase residual_samples")
        out[rows] = num / den[:, None]
        lse[rows] = row_max + np.log(den)
    if not np.all(np.isfinite(out)):
        raise NumericError("approximate attention produced non-finite values")
    return AttentionResult(out=out, log_row_sums=lse, blocks_evaluated=n_blocks, keys_retained=n_keys,
                           wall_time=time.perf_counter() - t0)


def prescored_hyper_attention(q, k, v, cfg: PreScoredConfig, rng: Rng) -> AttentionResult:
    """Attend only to the keys kept by :func:`prescore`.

    Falls back to plain :func:`hyper_attention` on all keys when fewer than
    ``delta * n`` keys are kept. Retained keys are passed in ascending index
    order, so ``s = n`` reproduces the plain call exactly.
    """
    t0 = time.perf_counter()
    k = as_matrix(k, "k")
    v = as_matrix(v, "v")
    n = k.shape[0]
    scored = prescore(k, cfg.prescore, make_rng(cfg.prescore.seed))
    if len(scored) < cfg.delta * n:
        res = hyper_attention(q, k, v, cfg.hyper, rng)
        res.fallback = True
        res.scored = scored
        res.wall_time = time.perf_counter() - t0
        return res
    keep = np.sort(scored.indices)
    hcfg = cfg.hyper if cfg.keep_residual else replace(cfg.hyper, residual_samples=0)
    res = hyper_attention(q, k[keep], v[keep], hcfg, rng)
    res.selected = keep
    res.scored = scored
    res.wall_time = time.perf_counter() - t0
    return res


def uniform_sample_attention(q, k, v, samples: int, rng: Rng) -> AttentionOutput:
    """Baseline: every query attends to ``samples`` keys drawn uniformly with replacement."""
    q = as_matrix(q, "q")
    k = as_matrix(k, "k")
    v = as_matrix(v, "v")
    idx = rng.integers(0, k.shape[0], size=(q.shape[0], samples))
    logits = np.einsum("id,isd->is", q, k[idx])
    row_max = logits.max(axis=1)
    w = np.exp(logits - row_max[:, None])
    den = w.sum(axis=1)
    out = np.einsum("is,isv->iv", w, v[idx]) / den[:, None]
    return AttentionOutput(out=out, log_row_sums=row_max + np.log(den * k.shape[0] / samples))

"""Dense matrix helpers, the deterministic RNG, and the PAMX file format.

Matrices are plain C-contiguous ``float64`` numpy arrays. Random streams come
from numpy's ``Philox`` bit generator (Philox-4x64-10, a counter-based PRNG),
so a seed reproduces the same stream on every platform numpy supports.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DegenerateRowError, DimensionMismatchError, EmptyDimensionError, PrescoreError

Rng = np.random.Generator

PAMX_MAGIC = b"PAMX"
PAMX_VERSION = 1
_HEADER = struct.Struct("<4sBQQ")

# caps the n*m*d temporary in pairwise_sq_dist
_CHUNK_ELEMS = 1 << 23


def make_rng(seed: int, *spawn_key: int) -> Rng:
    """Philox generator for ``seed``; ``spawn_key`` derives independent children.

    ``make_rng(s, i)`` is the documented seed-split for parallel work item ``i``.
    """
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in spawn_key))
    return np.random.Generator(np.random.Philox(ss))


def child_rng(rng: Rng) -> Rng:
    """Derive an independent generator from the next draw of ``rng``."""
    return make_rng(int(rng.integers(0, 2**63 - 1)))


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    a = np.ascontiguousarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-dimensional, got shape {a.shape}")
    return a


def gaussian_matrix(rng: Rng, rows: int, cols: int, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
    if rows <= 0 or cols <= 0:
        raise EmptyDimensionError(f"cannot draw a {rows}x{cols} matrix")
    if std < 0:
        raise ValueError("std must be non-negative")
    if std == 0:
        return np.full((rows, cols), float(mean))
    return rng.normal(mean, std, size=(rows, cols))


def normalize_rows(m) -> np.ndarray:
    a = as_matrix(m)
    norms = np.linalg.norm(a, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise DegenerateRowError(int(zero[0]))
    return a / norms[:, None]


def pairwise_sq_dist(a, b) -> np.ndarray:
    """``out[i, j] = ||a_i - b_j||^2`` evaluated from explicit differences.

    Differences rather than the Gram expansion keep the result non-negative
    and make coincident rows exactly zero.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatchError(f"column mismatch: {a.shape[1]} vs {b.shape[1]}")
    out = np.empty((a.shape[0], b.shape[0]))
    step = max(1, _CHUNK_ELEMS // max(1, b.shape[0] * b.shape[1]))
    for start in range(0, a.shape[0], step):
        diff = a[start:start + step, None, :] - b[None, :, :]
        out[start:start + step] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def save_matrix(path, m) -> None:
    a = as_matrix(m)
    rows, cols = a.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(PAMX_MAGIC, PAMX_VERSION, rows, cols))
        fh.write(a.astype("<f8", copy=False).tobytes(order="C"))


def load_matrix(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise PrescoreError(f"{path}: truncated PAMX header")
    magic, version, rows, cols = _HEADER.unpack_from(raw)
    if magic != PAMX_MAGIC:
        raise PrescoreError(f"{path}: bad magic {magic!r}")
    if version != PAMX_VERSION:
        raise PrescoreError(f"{path}: unsupported PAMX version {version}")
    body = raw[_HEADER.size:]
    if len(body) != rows * cols * 8:
        raise PrescoreError(f"{path}: expected {rows * cols * 8} data bytes, found {len(body)}")
    data = np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(rows, cols)
    if not np.all(np.isfinite(data)):
        raise PrescoreError(f"{path}: matrix contains non-finite entries")
    return data


def save_labels(path, labels) -> None:
    Path(path).write_text("".join(f"{int(x)}\n" for x in labels))


def load_labels(path) -> np.ndarray:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    values = [int(ln) for ln in lines]
    if any(v < 0 for v in values):
        raise PrescoreError(f"{path}: labels must be unsigned integers")
    return np.asarray(values, dtype=np.int64)

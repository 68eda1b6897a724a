"""Synthetic key matrices with known heavy rows.

``generate_planted`` builds the planted-subspace model: ``d`` orthonormal
directions, ``m = ceil(1/epsilon)`` noisy copies of each, and a bulk of small
isotropic noise rows. ``generate_counterexample`` builds the large-norm
instance on which plain k-means loses the unit-norm keys.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from .cluster import Clustering
from .errors import DimensionMismatchError
from .matrix import Rng, as_matrix, gaussian_matrix, normalize_rows


@dataclass(frozen=True)
class PlantedConfig:
    n: int
    d: int
    epsilon: float
    c_S: float = 0.1
    c_N: float = 0.1
    normalize: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        # zero constants are accepted as the noiseless limit
        if self.c_S < 0 or self.c_N < 0:
            raise ValueError("c_S and c_N must be >= 0")
        if self.n < 4 * self.d * self.m:
            raise ValueError(f"n={self.n} is below 4*d*m={4 * self.d * self.m}")

    @property
    def m(self) -> int:
        return group_size(self.epsilon)

    @property
    def sigma_signal(self) -> float:
        return math.sqrt(self.c_S / self.d)

    @property
    def sigma_noise(self) -> float:
        return math.sqrt(self.c_N / (self.n * self.epsilon))


def group_size(epsilon: float) -> int:
    # guard 1/0.1 style rounding from bumping m up by one
    return max(1, math.ceil(1.0 / epsilon - 1e-9))


@dataclass
class PlantedInstance:
    matrix: np.ndarray
    labels: np.ndarray
    basis: np.ndarray
    config: Any

    @property
    def signal_rows(self) -> np.ndarray:
        return np.flatnonzero(self.labels > 0)

    @property
    def noise_rows(self) -> np.ndarray:
        return np.flatnonzero(self.labels == 0)

    def params(self) -> dict:
        return asdict(self.config) if hasattr(self.config, "__dataclass_fields__") else dict(self.config)


def random_orthonormal(rng: Rng, d: int) -> np.ndarray:
    q, r = np.linalg.qr(gaussian_matrix(rng, d, d))
    # sign fix makes the draw Haar-distributed
    q = q * np.where(np.diag(r) < 0, -1.0, 1.0)[None, :]
    return q.T


def generate_planted(cfg: PlantedConfig, rng: Rng) -> PlantedInstance:
    n, d, m = cfg.n, cfg.d, cfg.m
    basis = random_orthonormal(rng, d)
    n_signal = d * m
    labels = np.concatenate([np.repeat(np.arange(1, d + 1), m), np.zeros(n - n_signal, dtype=np.int64)])
    signal = basis[labels[:n_signal] - 1] + gaussian_matrix(rng, n_signal, d, 0.0, cfg.sigma_signal)
    noise = gaussian_matrix(rng, n - n_signal, d, 0.0, cfg.sigma_noise)
    rows = np.vstack([signal, noise])
    perm = rng.permutation(n)
    matrix = rows[perm]
    labels = labels[perm]
    if cfg.normalize:
        matrix = normalize_rows(matrix)
    return PlantedInstance(matrix=matrix, labels=labels.astype(np.int64), basis=basis, config=cfg)


def generate_counterexample(n: int, d: int, big_norm: float, rng: Rng | None = None) -> PlantedInstance:
    """Rows ``0..d/2-1`` are ``e_j``; all others equal ``big_norm * e_{d/2}``.

    ``rng`` is accepted for interface symmetry; the construction is deterministic.
    """
    if d < 2 or d % 2:
        raise ValueError("d must be a positive even integer")
    half = d // 2
    if n <= half:
        raise ValueError("n must exceed d/2")
    if big_norm <= 1:
        raise ValueError("big_norm must be much larger than 1")
    matrix = np.zeros((n, d))
    matrix[np.arange(half), np.arange(half)] = 1.0
    matrix[half:, half] = big_norm
    labels = np.zeros(n, dtype=np.int64)
    labels[:half] = np.arange(1, half + 1)
    return PlantedInstance(matrix=matrix, labels=labels, basis=np.eye(d),
                           config={"n": n, "d": d, "big_norm": float(big_norm)})


def partition_cost(matrix, assignment) -> float:
    """Within-group sum of squared l2 distances to each group's mean."""
    x = as_matrix(matrix)
    assignment = np.asarray(assignment)
    if assignment.shape[0] != x.shape[0]:
        raise DimensionMismatchError(f"{assignment.shape[0]} labels for {x.shape[0]} rows")
    total = 0.0
    for g in np.unique(assignment):
        members = x[assignment == g]
        total += float(((members - members.mean(axis=0)) ** 2).sum())
    return total


def planted_cost_gap(inst: PlantedInstance, clustering: Clustering | np.ndarray) -> float:
    """Squared-l2 cost of ``clustering`` minus that of the ground-truth partition."""
    assignment = clustering.assignment if isinstance(clustering, Clustering) else np.asarray(clustering)
    if assignment.shape[0] != inst.labels.shape[0]:
        raise DimensionMismatchError(f"{assignment.shape[0]} assignments for {inst.labels.shape[0]} labels")
    return partition_cost(inst.matrix, assignment) - partition_cost(inst.matrix, inst.labels)


def planted_queries(inst: PlantedInstance, scale: float) -> np.ndarray:
    """Self-attention queries ``scale * K``: signal rows attend to their own group."""
    return scale * inst.matrix


def signal_queries(inst: PlantedInstance) -> np.ndarray:
    """One query per planted direction, ``q_j = v_j``."""
    return inst.basis.copy()

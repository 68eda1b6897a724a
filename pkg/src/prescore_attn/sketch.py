"""Sketched leverage scores.

The sketch is a subsampled randomized trigonometric transform (SRTT):
random row signs, an orthonormal DCT-II along the rows, then ``r`` rows
sampled without replacement and rescaled by ``sqrt(n / r)``. The triangular
factor ``R`` of the sketch stands in for that of ``K``, and
``h_i ~ ||K_i R^-1||^2``.
"""
from __future__ import annotations

import numpy as np
import scipy.fft
import scipy.linalg

from .errors import DimensionMismatchError, SingularGramError
from .exact import CONDITION_CAP
from .matrix import Rng, as_matrix


def srtt_sketch(a: np.ndarray, sketch_rows: int, rng: Rng) -> np.ndarray:
    n = a.shape[0]
    signs = rng.choice(np.array([-1.0, 1.0]), size=n)
    mixed = scipy.fft.dct(a * signs[:, None], type=2, norm="ortho", axis=0)
    rows = np.sort(rng.choice(n, size=sketch_rows, replace=False))
    return mixed[rows] * np.sqrt(n / sketch_rows)


def approx_leverage_scores(k_matrix, sketch_rows: int, rng: Rng) -> np.ndarray:
    a = as_matrix(k_matrix)
    n, d = a.shape
    if sketch_rows < d:
        raise DimensionMismatchError(f"sketch_rows={sketch_rows} is below the column count {d}")
    if sketch_rows > n:
        raise DimensionMismatchError(f"sketch_rows={sketch_rows} exceeds the row count {n}")
    r = scipy.linalg.qr(srtt_sketch(a, sketch_rows, rng), mode="r")[0][:d]
    diag = np.abs(np.diag(r))
    if diag.min() == 0 or (diag.max() / diag.min()) ** 2 > CONDITION_CAP:
        raise SingularGramError("sketched triangular factor is rank deficient")
    z = scipy.linalg.solve_triangular(r, a.T, trans="T").T
    return np.einsum("ij,ij->i", z, z)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import adjusted_rand_score

from prescore_attn import (DimensionMismatchError, Method, NumericError, PlantedConfig, PreScoreConfig,
                           attention_error, exact_attention, generate_planted, heavy_coverage, hyper_attention,
                           HyperConfig, make_rng, prescore, recovery_score)
from prescore_attn.metrics import CSV_FIELDS
from prescore_attn.planted import planted_queries

from conftest import random_qkv


def test_full_selection_covers_everything():
    q, k, _ = random_qkv(0, 20, 3, scale=2.0)
    rep = heavy_coverage(q, k, np.arange(20), 0.1)
    assert rep.percentage == 100.0 and rep.topk_percentage == 100.0
    assert rep.heavy_captured == rep.heavy_total > 0


def test_no_heavy_entries_is_full_coverage():
    q, k, _ = random_qkv(1, 10, 3)
    rep = heavy_coverage(q, k, [0], 1.0)
    assert rep.heavy_total == 0 and rep.percentage == 100.0


def test_counts_match_direct_enumeration():
    q, k, _ = random_qkv(2, 30, 4, scale=1.5)
    sel = [3, 7, 11, 19]
    rep = heavy_coverage(q, k, sel, 0.05)
    a = np.exp(q @ k.T)
    a /= a.sum(axis=1, keepdims=True)
    heavy = [(i, j) for i in range(30) for j in range(30) if a[i, j] > 0.05]
    assert rep.heavy_total == len(heavy)
    assert rep.heavy_captured == sum(j in sel for _, j in heavy)
    assert rep.percentage == pytest.approx(100 * rep.heavy_captured / rep.heavy_total, abs=1e-9)
    counts = np.bincount([j for _, j in heavy], minlength=30)
    top = sorted(range(30), key=lambda j: (-counts[j], j))[:4]
    assert rep.topk_columns_captured == len(set(top) & set(sel))


def test_coverage_errors():
    q, k, _ = random_qkv(3, 5, 2)
    with pytest.raises(DimensionMismatchError):
        heavy_coverage(q, k, [5], 0.1)
    with pytest.raises(ValueError):
        heavy_coverage(q, k, [0], 0.0)


def test_csv_row_fields():
    q, k, _ = random_qkv(4, 8, 2)
    row = heavy_coverage(q, k, [1, 2], 0.2).csv_row("KMEANS", 7)
    assert tuple(row) == CSV_FIELDS
    assert row["seed"] == 7 and row["method"] == "KMEANS"


def test_kmeans_beats_random_subsets():
    inst = generate_planted(PlantedConfig(64, 4, 0.25, seed=0), make_rng(0))
    q, k = planted_queries(inst, 4.0), inst.matrix
    sel = prescore(k, PreScoreConfig(method=Method.KMEANS, k=5, s=16, seed=0), make_rng(0))
    mine = heavy_coverage(q, k, sel, 0.1).percentage
    r = make_rng(0, 1)
    rand = [heavy_coverage(q, k, r.choice(64, 16, replace=False), 0.1).percentage for _ in range(100)]
    assert mine > np.median(rand)


@pytest.mark.parametrize("seed", range(20))
def test_coverage_monotone_under_superset(seed):
    inst = generate_planted(PlantedConfig(512, 8, 0.1, seed=seed), make_rng(seed))
    q, k = planted_queries(inst, 4.0), inst.matrix
    ranking = prescore(k, PreScoreConfig(k=9, s=256, seed=seed), make_rng(seed)).indices
    pct = [heavy_coverage(q, k, ranking[:s], 0.1).percentage for s in (32, 64, 128, 256)]
    assert pct == sorted(pct)


def test_ari_examples():
    assert recovery_score([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0
    assert recovery_score([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0
    labels = np.repeat(np.arange(4), 25)
    assert abs(recovery_score(labels, np.zeros(100))) < 1e-12
    with pytest.raises(DimensionMismatchError):
        recovery_score([0, 1], [0])


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=2, max_size=40), st.permutations(range(5)))
def test_ari_matches_sklearn_and_is_symmetric(pairs, perm):
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    ari = recovery_score(a, b)
    assert ari == pytest.approx(adjusted_rand_score(a, b), abs=1e-12)
    assert recovery_score(b, a) == pytest.approx(ari, abs=1e-12)
    assert recovery_score(np.asarray(perm)[a], b) == pytest.approx(ari, abs=1e-12)


def test_attention_error_examples():
    q, k, v = random_qkv(5, 16, 4)
    ex = exact_attention(q, k, v)
    assert attention_error(ex, ex) == 0.0
    assert attention_error(2 * ex.out, ex) == pytest.approx(1.0)
    full = hyper_attention(q, k, v, HyperConfig(block_size=16), make_rng(0))
    assert attention_error(full, ex) <= 1e-10
    with pytest.raises(DimensionMismatchError):
        attention_error(np.ones((2, 2)), np.ones((2, 3)))
    with pytest.raises(NumericError):
        attention_error(np.ones((2, 2)), np.zeros((2, 2)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_attention_error_triangle(seed):
    r = make_rng(seed)
    a, b, c = r.standard_normal((3, 5, 4))
    bound = (np.linalg.norm(a - b) + np.linalg.norm(b - c)) / np.linalg.norm(c)
    assert attention_error(a, c) <= bound + 1e-12

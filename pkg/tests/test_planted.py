import numpy as np
import pytest

from prescore_attn import (DegenerateRowError, PlantedConfig, PreScoreConfig, exact_leverage_scores,
                           generate_counterexample, generate_planted, lloyd_cluster, make_rng, normalize_rows,
                           pairwise_sq_dist, partition_cost, planted_cost_gap, recovery_score)
from prescore_attn.experiments import isolates_signal
from prescore_attn.planted import group_size


def test_group_size():
    assert group_size(0.1) == 10
    assert group_size(1.0) == 1
    assert group_size(0.3) == 4
    assert group_size(0.25) == 4


def test_instance_invariants():
    cfg = PlantedConfig(500, 6, 0.2, seed=2)
    inst = generate_planted(cfg, make_rng(2))
    assert inst.matrix.shape == (500, 6)
    np.testing.assert_array_equal(np.bincount(inst.labels), [500 - 30] + [5] * 6)
    np.testing.assert_allclose(inst.basis.T @ inst.basis, np.eye(6), atol=1e-10)
    assert cfg.sigma_signal == pytest.approx(np.sqrt(0.1 / 6))
    assert cfg.sigma_noise == pytest.approx(np.sqrt(0.1 / (500 * 0.2)))
    assert inst.params()["n"] == 500


def test_normalized_rows_have_unit_norm():
    inst = generate_planted(PlantedConfig(400, 4, 0.1, normalize=True), make_rng(0))
    np.testing.assert_allclose(np.linalg.norm(inst.matrix, axis=1), 1.0, atol=1e-12)


def test_noiseless_limit():
    inst = generate_planted(PlantedConfig(200, 4, 0.5, c_S=0.0, c_N=0.0), make_rng(0))
    sig = inst.signal_rows
    np.testing.assert_array_equal(inst.matrix[sig], inst.basis[inst.labels[sig] - 1])
    assert np.all(inst.matrix[inst.noise_rows] == 0)
    with pytest.raises(DegenerateRowError):
        generate_planted(PlantedConfig(200, 4, 0.5, c_S=0.0, c_N=0.0, normalize=True), make_rng(0))


@pytest.mark.parametrize("kwargs", [dict(n=100, d=4, epsilon=0.1), dict(n=1000, d=4, epsilon=0.0),
                                    dict(n=1000, d=4, epsilon=1.5), dict(n=1000, d=4, epsilon=0.1, c_S=-1.0),
                                    dict(n=1000, d=0, epsilon=0.1)])
def test_config_violations(kwargs):
    with pytest.raises(ValueError):
        PlantedConfig(**kwargs)


def test_same_seed_same_instance():
    a = generate_planted(PlantedConfig(300, 3, 0.1, seed=1), make_rng(1))
    b = generate_planted(PlantedConfig(300, 3, 0.1, seed=1), make_rng(1))
    assert a.matrix.tobytes() == b.matrix.tobytes()
    np.testing.assert_array_equal(a.labels, b.labels)


def test_leverage_separation_example():
    inst = generate_planted(PlantedConfig(1000, 8, 0.1, 0.1, 0.1, seed=11), make_rng(11))
    h = exact_leverage_scores(inst.matrix)
    assert h[inst.signal_rows].min() > 10 * h[inst.noise_rows].max()


def test_singleton_regime_example():
    inst = generate_planted(PlantedConfig(1000, 8, 1.0, 0.1, 0.1, seed=11), make_rng(11))
    cl = lloyd_cluster(inst.matrix, PreScoreConfig(k=9, seed=11))
    assert isolates_signal(inst, cl.assignment)


def test_counterexample_layout():
    inst = generate_counterexample(10, 4, 100.0)
    np.testing.assert_array_equal(inst.matrix[:2], np.eye(4)[:2])
    np.testing.assert_array_equal(inst.matrix[2:], np.tile([0, 0, 100.0, 0], (8, 1)))
    np.testing.assert_array_equal(inst.labels, [1, 2] + [0] * 8)
    d = pairwise_sq_dist(inst.matrix, inst.matrix)
    assert d[0, 1] == 2.0 and d[0, 5] == 10001.0 and d[4, 5] == 0.0
    assert np.all(inst.matrix[:2] @ inst.matrix[2:].T == 0)


def test_counterexample_normalized_leverage():
    n, d = 100, 8
    inst = generate_counterexample(n, d, 100.0)
    h = exact_leverage_scores(normalize_rows(inst.matrix), allow_rank_deficient=True)
    np.testing.assert_allclose(h[:4], 1.0, atol=1e-12)
    np.testing.assert_allclose(h[4:], 1 / (n - d // 2), atol=1e-12)


@pytest.mark.parametrize("kwargs", [dict(n=10, d=3, big_norm=100.0), dict(n=2, d=4, big_norm=100.0),
                                    dict(n=10, d=4, big_norm=0.5)])
def test_counterexample_violations(kwargs):
    with pytest.raises(ValueError):
        generate_counterexample(**kwargs)


def test_cost_gap_identity_and_misassignment():
    inst = generate_planted(PlantedConfig(400, 4, 0.1, c_S=0.0, c_N=0.0), make_rng(3))
    inst.matrix[inst.noise_rows] = make_rng(4).standard_normal((inst.noise_rows.size, 4)) * 1e-3
    inst.matrix = normalize_rows(inst.matrix)
    assert planted_cost_gap(inst, inst.labels) == pytest.approx(0.0, abs=1e-12)
    moved = inst.labels.copy()
    moved[inst.signal_rows[0]] = 0
    assert planted_cost_gap(inst, moved) > 0.5


def test_counterexample_cost_comparison():
    inst = generate_counterexample(1000, 8, 100.0)
    isolating = np.full(1000, 3)
    isolating[:4] = np.arange(4)
    merged = np.full(1000, 3)
    merged[:4] = [0, 0, 1, 2]
    assert planted_cost_gap(inst, isolating) > planted_cost_gap(inst, merged)
    assert partition_cost(inst.matrix, merged) == pytest.approx(1.0)


def test_counterexample_kmeans_behaviour():
    inst = generate_counterexample(1000, 8, 100.0)
    raw = lloyd_cluster(inst.matrix, PreScoreConfig(k=4, seed=0))
    assert not isolates_signal(inst, raw.assignment)
    fixed = lloyd_cluster(normalize_rows(inst.matrix), PreScoreConfig(k=9, seed=0))
    assert isolates_signal(inst, fixed.assignment)
    assert recovery_score(inst.labels, fixed.assignment) == 1.0

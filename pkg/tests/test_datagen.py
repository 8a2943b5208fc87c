"""Benchmark case generation: topologies, weights, samples, disk layout."""

import os

import numpy as np
import pytest

from spectrad import datagen, sparse


def test_er_edge_count_within_four_sigma():
    d, deg = 100, 4.0
    n_pairs = d * (d - 1) // 2
    p = deg / (d - 1)
    mean = n_pairs * p
    sigma = np.sqrt(n_pairs * p * (1 - p))
    for seed in range(5):
        adj = datagen.random_dag(d, "er", deg, seed)
        assert abs(adj.nnz - mean) <= 4 * sigma


def test_er_graphs_are_acyclic_and_simple():
    for seed in range(10):
        adj = datagen.random_dag(40, "er", 3.0, seed)
        assert sparse.topological_order(adj) is not None
        assert not np.any(adj.row_ids() == adj.col_indices)
        # from_coo would have rejected duplicate coordinates already;
        # check the values are plain ones
        assert np.all(adj.values == 1.0)


def test_er_saturated_degree_gives_complete_tournament():
    d = 6
    adj = datagen.random_dag(d, "er", d - 1, 123)
    assert adj.nnz == d * (d - 1) // 2
    assert sparse.topological_order(adj) is not None


def test_sf_shape_and_count():
    d, deg = 50, 4.0
    m = 2
    adj = datagen.random_dag(d, "sf", deg, 0)
    assert adj.nnz == m * (d - m)
    # attachment order makes every edge point from a later node to an
    # earlier one
    assert np.all(adj.row_ids() > adj.col_indices)
    assert sparse.topological_order(adj) is not None


def test_sf_attachment_is_preferential():
    # early nodes should accumulate far more in-edges than late ones
    adj = datagen.random_dag(300, "sf", 4.0, 7)
    indeg = np.zeros(300)
    np.add.at(indeg, adj.col_indices, 1.0)
    early = indeg[:30].mean()
    late = indeg[270:].mean()
    assert early > 3 * late


def test_random_dag_validation():
    with pytest.raises(ValueError):
        datagen.random_dag(1, "er", 0.0, 0)
    with pytest.raises(ValueError):
        datagen.random_dag(10, "er", 10.0, 0)
    with pytest.raises(ValueError):
        datagen.random_dag(10, "er", -1.0, 0)
    with pytest.raises(ValueError):
        datagen.random_dag(10, "ring", 2.0, 0)
    with pytest.raises(ValueError):
        datagen.random_dag(3, "sf", 5.9, 0)


def test_assign_weights_range_and_signs():
    adj = datagen.random_dag(60, "er", 4.0, 1)
    w = datagen.assign_weights(adj, 2)
    mags = np.abs(w.values)
    assert np.all((mags >= 0.5) & (mags <= 2.0))
    assert np.any(w.values > 0) and np.any(w.values < 0)
    assert sparse.pattern_equal(w, adj)


def test_assign_weights_ignores_stored_values():
    adj = datagen.random_dag(20, "er", 2.0, 3)
    poisoned = adj.with_values(np.full(adj.nnz, -999.0))
    w1 = datagen.assign_weights(adj, 9)
    w2 = datagen.assign_weights(poisoned, 9)
    assert np.array_equal(w1.values, w2.values)


def test_assign_weights_custom_band_and_validation():
    adj = datagen.random_dag(30, "er", 3.0, 4)
    w = datagen.assign_weights(adj, 5, low=1.5, high=1.5)
    assert np.all(np.abs(w.values) == 1.5)
    with pytest.raises(ValueError):
        datagen.assign_weights(adj, 5, low=0.0, high=1.0)
    with pytest.raises(ValueError):
        datagen.assign_weights(adj, 5, low=2.0, high=1.0)
    cycle = sparse.from_coo(2, 2, [0, 1], [1, 0], [1.0, 1.0])
    with pytest.raises(ValueError):
        datagen.assign_weights(cycle, 5)


def test_sample_lsem_chain_covariance_matches_analytic():
    # 0 -> 1 -> 2 with unit weights: variances 1, 2, 3 down the chain
    w = sparse.from_coo(3, 3, [0, 1], [1, 2], [1.0, 1.0])
    x = datagen.sample_lsem(w, 200_000, "gauss", 11)
    cov = np.cov(x, rowvar=False)
    expect = datagen.lsem_covariance(w)
    assert np.allclose(np.diag(expect), [1.0, 2.0, 3.0])
    assert np.max(np.abs(cov - expect)) < 0.05


def test_sample_lsem_two_node_covariance():
    # single edge of weight 2: Var(child) = 5, Cov = 2
    w = sparse.from_coo(2, 2, [0], [1], [2.0])
    x = datagen.sample_lsem(w, 200_000, "gauss", 12)
    cov = np.cov(x, rowvar=False)
    assert abs(cov[0, 0] - 1.0) < 0.03
    assert abs(cov[1, 1] - 5.0) < 0.12
    assert abs(cov[0, 1] - 2.0) < 0.06


def test_lsem_covariance_noise_variances():
    w = sparse.from_coo(2, 2, [0], [1], [1.0])
    cov = datagen.lsem_covariance(w, noise_variances=[4.0, 1.0])
    assert np.allclose(cov, [[4.0, 4.0], [4.0, 5.0]])


def test_noise_families_centered_moments():
    empty = sparse.from_coo(2, 2, [], [], [])
    n = 300_000
    for noise, var in (("gauss", 1.0), ("exp", 1.0),
                       ("gumbel", np.pi ** 2 / 6)):
        x = datagen.sample_lsem(empty, n, noise, 21)
        assert abs(x.mean()) < 0.02, noise
        assert abs(x.var() - var) < 0.05, noise


def test_noise_families_raw_means():
    empty = sparse.from_coo(2, 2, [], [], [])
    x_exp = datagen.sample_lsem(empty, 200_000, "exp", 22, centered=False)
    assert abs(x_exp.mean() - 1.0) < 0.02
    x_gum = datagen.sample_lsem(empty, 200_000, "gumbel", 22, centered=False)
    assert abs(x_gum.mean() - np.euler_gamma) < 0.02


def test_sample_lsem_validation():
    w = sparse.from_coo(2, 2, [0], [1], [1.0])
    with pytest.raises(ValueError):
        datagen.sample_lsem(w, 0, "gauss", 0)
    with pytest.raises(ValueError):
        datagen.sample_lsem(w, 10, "cauchy", 0)
    cycle = sparse.from_coo(2, 2, [0, 1], [1, 0], [0.5, 0.5])
    with pytest.raises(ValueError):
        datagen.sample_lsem(cycle, 10, "gauss", 0)


def test_generate_case_defaults_and_determinism():
    a = datagen.generate_case(25, "er", 3.0, "gauss", seed=5)
    b = datagen.generate_case(25, "er", 3.0, "gauss", seed=5)
    assert a.n == 250
    assert a.x.shape == (250, 25)
    assert np.array_equal(a.x, b.x)
    assert np.array_equal(a.w_true.values, b.w_true.values)
    assert sparse.pattern_equal(a.w_true, b.w_true)
    c = datagen.generate_case(25, "er", 3.0, "gauss", seed=6)
    assert not np.array_equal(a.x, c.x)


def test_generate_case_noise_stream_is_split():
    # changing the noise family must not disturb the graph or the weights
    a = datagen.generate_case(30, "er", 3.0, "gauss", seed=8)
    b = datagen.generate_case(30, "er", 3.0, "exp", seed=8)
    assert sparse.pattern_equal(a.w_true, b.w_true)
    assert np.array_equal(a.w_true.values, b.w_true.values)
    assert not np.array_equal(a.x, b.x)


def test_save_load_round_trip(tmp_path):
    case = datagen.generate_case(15, "sf", 4.0, "gumbel", n=40, seed=3)
    out = str(tmp_path / "case0")
    paths = datagen.save_case(case, out)
    for name, path in paths.items():
        assert os.path.exists(path), name
    back = datagen.load_case(out)
    assert back.d == case.d
    assert back.model == case.model
    assert back.avg_degree == case.avg_degree
    assert back.noise == case.noise
    assert back.n == case.n
    assert back.seed == case.seed
    assert np.array_equal(back.x, case.x)
    assert sparse.pattern_equal(back.w_true, case.w_true)
    assert np.array_equal(back.w_true.values, case.w_true.values)
    assert sparse.pattern_equal(back.adjacency, case.adjacency)


def test_load_samples_rejects_empty(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(ValueError):
        datagen.load_samples(str(path))


def test_load_samples_single_row(tmp_path):
    path = tmp_path / "one.csv"
    path.write_text("1.5,-2.25\n")
    x = datagen.load_samples(str(path))
    assert x.shape == (1, 2)
    assert np.array_equal(x, [[1.5, -2.25]])

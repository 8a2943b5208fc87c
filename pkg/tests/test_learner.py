"""Learning loop behavior on small, analytically transparent problems."""

import numpy as np
import pytest

from spectrad import datagen, learner, sparse
from spectrad.acyclicity import BoundConfig, forward_bound

CHAIN_TRUTH = sparse.from_coo(2, 2, [0], [1], [2.0])


def chain_samples(n=1000, seed=42):
    return datagen.sample_lsem(CHAIN_TRUTH, n, "gauss", seed)


def small_cfg(**over):
    base = dict(seed=0, lam=0.1, theta=0.1, zeta=1.0, batch_size=1000)
    base.update(over)
    return learner.LearnConfig(**base)


def test_objective_assembly_reconstructs():
    rng = np.random.default_rng(0)
    for _ in range(50):
        loss = float(rng.uniform(0, 100))
        delta = float(rng.uniform(0, 10))
        rho = float(10 ** rng.uniform(0, 6))
        eta = float(rng.uniform(0, 50))
        want = loss + 0.5 * rho * delta * delta + eta * delta
        got = learner.penalized_objective(loss, delta, rho, eta)
        assert abs(got - want) <= 1e-12 * max(1.0, abs(want))


def test_loss_and_grad_zero_matrix():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((40, 5))
    pattern = [(i, j) for i in range(5) for j in range(5) if i != j]
    rows = [p[0] for p in pattern]
    cols = [p[1] for p in pattern]
    w = sparse.from_coo(5, 5, rows, cols, np.zeros(len(rows)))
    loss, grad = learner.loss_and_grad(w, x, lam=0.5)
    assert abs(loss - (x * x).sum() / 40) < 1e-12
    want = -(2.0 / 40) * x.T @ x
    assert np.allclose(grad.values, want[rows, cols], atol=1e-12)


def test_loss_and_grad_finite_differences():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((30, 6))
    w = sparse.from_coo(6, 6, [0, 1, 2, 4], [1, 3, 5, 0],
                        [0.8, -0.5, 0.3, 1.2])
    lam = 0.25
    _, grad = learner.loss_and_grad(w, x, lam)
    step = 1e-6
    vals = w.values.copy()
    for e in range(w.nnz):
        orig = vals[e]
        vals[e] = orig + step
        hi, _ = learner.loss_and_grad(w.with_values(vals), x, lam)
        vals[e] = orig - step
        lo, _ = learner.loss_and_grad(w.with_values(vals), x, lam)
        vals[e] = orig
        fd = (hi - lo) / (2 * step)
        assert abs(fd - grad.values[e]) < 1e-5 * max(1.0, abs(fd))


def test_loss_and_grad_candidate_superset():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((25, 4))
    w = sparse.from_coo(4, 4, [0], [1], [0.7])
    cand = sparse.from_coo(4, 4, [0, 1, 2], [1, 2, 3], np.ones(3))
    loss, grad = learner.loss_and_grad(w, x, 0.1, cand)
    r = x @ w.to_dense() - x
    want = (2.0 / 25) * x.T @ r + 0.1 * np.sign(w.to_dense())
    assert sparse.pattern_equal(grad, cand)
    assert np.allclose(grad.values,
                       want[cand.row_ids(), cand.col_indices], atol=1e-12)
    with pytest.raises(ValueError):
        learner.loss_and_grad(w, x, 0.1, sparse.empty(5, 5))
    with pytest.raises(ValueError):
        learner.loss_and_grad(w, rng.standard_normal((10, 7)), 0.1)


def test_smooth_loss_formula():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((20, 3))
    w = sparse.from_coo(3, 3, [0, 2], [1, 0], [0.5, -1.5])
    want = ((x @ w.to_dense() - x) ** 2).sum() / 20 + 0.3 * 2.0
    assert abs(learner.smooth_loss(w, x, 0.3) - want) < 1e-12


@pytest.mark.parametrize("engine", ["dense", "sparse"])
def test_inner_single_edge_example(engine):
    x = chain_samples()
    cfg = small_cfg(engine=engine)
    w0 = sparse.from_coo(2, 2, [0, 1], [1, 0], [0.5, 0.5])
    w, delta = learner.inner(x, cfg, 1.0, 1.0, w0)
    dense = w.to_dense()
    assert 1.8 <= dense[0, 1] <= 2.2
    assert dense[1, 0] == 0.0  # filtered below theta
    assert delta == 0.0  # single remaining edge is a DAG


def test_inner_t_zero_is_noop():
    x = chain_samples(n=50)
    w0 = sparse.from_coo(2, 2, [0, 1], [1, 0], [0.5, 0.5])
    cfg = small_cfg(t_inner=0)
    w, delta = learner.inner(x, cfg, 1.0, 1.0, w0)
    assert w is w0
    assert delta == forward_bound(w0, cfg.bound_config()).bound


def test_inner_zero_samples_collapse():
    x = np.zeros((50, 3))
    w0 = sparse.from_coo(3, 3, [0, 1, 2], [1, 2, 0], [0.5, 0.5, 0.5])
    cfg = learner.LearnConfig(seed=0, lam=0.5, theta=0.1, batch_size=50)
    w, delta = learner.inner(x, cfg, 1.0, 1.0, w0)
    assert w.nnz == 0 and delta == 0.0


def test_inner_numerics_error_on_bad_input():
    x = np.ones((10, 2))
    x[0, 0] = np.inf
    w0 = sparse.from_coo(2, 2, [0, 1], [1, 0], [0.5, 0.5])
    with pytest.raises(learner.NumericsError):
        learner.inner(x, small_cfg(batch_size=10), 1.0, 1.0, w0)


@pytest.mark.parametrize("seed", [0, 1])
def test_least_single_edge_recovery(seed):
    x = chain_samples()
    res = learner.least(x, small_cfg(seed=seed))
    assert res.converged
    cut = learner.post_threshold(res.w, 0.3)
    assert cut.nnz == 1
    assert cut.row_ids()[0] == 0 and cut.col_indices[0] == 1
    assert 1.8 <= cut.values[0] <= 2.2


def test_least_t_outer_zero_emits_init():
    x = chain_samples(n=100)
    cfg = small_cfg(t_outer=0)
    res = learner.least(x, cfg)
    assert not res.converged
    assert res.outer_iterations == 0 and res.trace == []
    # the returned matrix is the untouched random initialization
    from spectrad.optim import glorot_sparse_init
    ss = np.random.SeedSequence(cfg.seed)
    init_seq, _ = ss.spawn(2)
    want = glorot_sparse_init(2, cfg.zeta, np.random.default_rng(init_seq))
    assert np.array_equal(res.w.to_dense(), want.to_dense())


def test_least_huge_epsilon_one_outer():
    x = chain_samples(n=100)
    res = learner.least(x, small_cfg(epsilon=1e6))
    assert res.converged and res.outer_iterations == 1


def test_least_trace_and_dual_monotonicity():
    case = datagen.generate_case(d=10, model="er", avg_degree=2.0,
                                 noise="gauss", seed=3)
    cfg = learner.LearnConfig(seed=3, batch_size=case.n, theta=0.0, lam=0.5,
                              t_outer=6, oracle_trace=True)
    res = learner.least(case.x, cfg)
    assert len(res.trace) == res.outer_iterations
    etas = [r.eta for r in res.trace]
    assert all(b >= a for a, b in zip(etas, etas[1:]))
    rhos = [r.rho for r in res.trace]
    assert all(b == min(a * 10.0, cfg.rho_max) for a, b in zip(rhos, rhos[1:]))
    for rec in res.trace:
        assert rec.h is not None and rec.h >= 0.0
        assert rec.delta >= 0.0 and rec.nnz >= 0
    # without the oracle flag the exact column stays empty
    res2 = learner.least(case.x, learner.LearnConfig(
        seed=3, batch_size=case.n, t_outer=2))
    assert all(r.h is None for r in res2.trace)


def test_least_exact_termination_stops_on_h():
    case = datagen.generate_case(d=10, model="er", avg_degree=2.0,
                                 noise="gauss", seed=0)
    eps = 1e-2
    cfg = learner.LearnConfig(seed=0, batch_size=case.n, theta=0.0, lam=0.5,
                              epsilon=eps, termination="exact")
    res = learner.least(case.x, cfg)
    assert res.converged
    last = res.trace[-1]
    assert last.h is not None and last.h <= eps
    assert last.delta > eps  # the bound alone would not have stopped here


def test_least_exact_termination_needs_dense_scale():
    x = np.zeros((2, sparse.DENSE_GUARD + 1))
    cfg = learner.LearnConfig(termination="exact")
    with pytest.raises(ValueError):
        learner.least(x, cfg)


def test_least_progress_lines():
    x = chain_samples(n=100)
    lines = []
    learner.least(x, small_cfg(t_outer=2), progress=lines.append)
    assert lines and all(line.startswith("outer=") for line in lines)
    assert "delta=" in lines[0] and "loss=" in lines[0]


def test_least_deterministic():
    case = datagen.generate_case(d=8, model="er", avg_degree=2.0,
                                 noise="gauss", seed=5)
    cfg = learner.LearnConfig(seed=7, t_outer=3, batch_size=40)
    a = learner.least(case.x, cfg)
    b = learner.least(case.x, cfg)
    assert sparse.pattern_equal(a.w, b.w)
    assert np.array_equal(a.w.values, b.w.values)
    assert [r.delta for r in a.trace] == [r.delta for r in b.trace]


def test_least_warm_start_off_still_learns():
    x = chain_samples()
    res = learner.least(x, small_cfg(seed=0, warm_start=False, t_outer=4))
    cut = learner.post_threshold(res.w, 0.3)
    assert cut.nnz == 1 and cut.col_indices[0] == 1


def test_engine_agreement():
    case = datagen.generate_case(d=12, model="er", avg_degree=2.0,
                                 noise="gauss", seed=2)
    results = {}
    for engine in ("dense", "sparse"):
        cfg = learner.LearnConfig(seed=2, engine=engine, t_outer=3,
                                  batch_size=case.n, theta=0.0, lam=0.5)
        results[engine] = learner.least(case.x, cfg)
    wd = results["dense"].w.to_dense()
    ws = results["sparse"].w.to_dense()
    assert np.abs(wd - ws).max() <= 1e-6


def test_post_threshold_semantics():
    w = sparse.from_dense(np.array([[0.0, 0.25], [-0.4, 0.0]]))
    assert learner.post_threshold(w, 0.0) is w
    assert learner.post_threshold(w, 0.3).nnz == 1
    assert learner.post_threshold(w, 0.5).nnz == 0
    with pytest.raises(ValueError):
        learner.post_threshold(w, -1.0)


def test_input_validation():
    with pytest.raises(ValueError):
        learner.least(np.zeros((1, 5)), learner.LearnConfig())
    with pytest.raises(ValueError):
        learner.least(np.zeros((5, 1)), learner.LearnConfig())
    for bad in (dict(zeta=-0.1), dict(zeta=1.1), dict(epsilon=0.0),
                dict(lam=-1.0), dict(rho_growth=1.0), dict(theta=-1.0),
                dict(lr=0.0), dict(engine="gpu"), dict(termination="fast"),
                dict(t_outer=-1), dict(k=-1), dict(alpha=2.0)):
        with pytest.raises(ValueError):
            learner.LearnConfig(**bad)

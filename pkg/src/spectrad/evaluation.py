"""Structure-recovery metrics and the (epsilon, tau) grid search.

Directed-edge conventions, fixed here and validated in the tests against a
brute-force edge-set oracle:

* TP: predicted edge present in the truth with the same direction.
* reversed: predicted edge whose flip is a truth edge (and the edge itself
  is not); counts once in SHD and as a false discovery, never as a TP.
* FP: predicted edge absent from the truth in either direction.
* FN: truth edges without a same-direction match.
* F1 = 2TP / (2TP + FP + reversed + FN); SHD = missing + FP + reversed,
  where missing is the count of truth edges absent in both directions.
* FDR = (reversed + FP) / max(predicted, 1); TPR = TP / max(|truth|, 1);
  FPR = (reversed + FP) / max(d(d-1) - |truth|, 1).
"""

from __future__ import annotations

import concurrent.futures
import dataclasses

import numpy as np

from . import sparse
from .learner import least, post_threshold


@dataclasses.dataclass
class EvalReport:
    f1: float
    shd: int
    fdr: float
    tpr: float
    fpr: float
    auc_roc: float | None = None
    predicted_edges: int = 0
    true_positive_edges: int = 0
    best_epsilon: float | None = None
    best_tau: float | None = None


def _reverse_keys(keys, d):
    rows, cols = keys // d, keys % d
    return cols * d + rows


def compare_graphs(predicted, truth):
    """Directed comparison of two support patterns (values ignored)."""
    if predicted.shape != truth.shape:
        raise ValueError(f"shape mismatch {predicted.shape} vs {truth.shape}")
    if predicted.n_rows != predicted.n_cols:
        raise ValueError("graph comparison needs square matrices")
    d = predicted.n_rows
    p = sparse.compress(predicted).keys()
    t = sparse.compress(truth).keys()

    in_t = np.isin(p, t, assume_unique=True)
    rev_in_t = np.isin(_reverse_keys(p, d), t)
    tp = int(in_t.sum())
    reversed_ = int((~in_t & rev_in_t).sum())
    fp = int((~in_t & ~rev_in_t).sum())
    fn = int(t.size) - tp

    in_p = np.isin(t, p, assume_unique=True)
    rev_in_p = np.isin(_reverse_keys(t, d), p)
    missing = int((~in_p & ~rev_in_p).sum())
    shd = missing + fp + reversed_

    denom = 2 * tp + fp + reversed_ + fn
    f1 = 1.0 if denom == 0 else 2.0 * tp / denom
    n_pred = int(p.size)
    n_true = int(t.size)
    fdr = (reversed_ + fp) / max(n_pred, 1)
    tpr = tp / max(n_true, 1)
    fpr = (reversed_ + fp) / max(d * (d - 1) - n_true, 1)
    return EvalReport(f1=f1, shd=shd, fdr=fdr, tpr=tpr, fpr=fpr,
                      predicted_edges=n_pred, true_positive_edges=tp)


def auc_roc(w, truth):
    """Rank |W[i,j]| over all ordered off-diagonal pairs against the truth.

    Ties, including the big tie of all absent entries at score 0, get
    midranks.  Degenerate truth (no edges, or every pair an edge) has no
    ROC curve; nan is returned.
    """
    if w.shape != truth.shape:
        raise ValueError(f"shape mismatch {w.shape} vs {truth.shape}")
    if w.n_rows != w.n_cols:
        raise ValueError("auc_roc needs square matrices")
    d = w.n_rows
    n_all = d * (d - 1)
    t_keys = sparse.compress(truth).keys()
    t_keys = t_keys[t_keys // d != t_keys % d]
    n_pos = int(t_keys.size)
    if n_pos == 0 or n_pos >= n_all:
        return float("nan")

    keys = w.keys()
    scores = np.abs(w.values)
    keep = (scores != 0.0) & (keys // d != keys % d)
    keys, scores = keys[keep], scores[keep]
    n_zero = n_all - keys.size

    _, inverse, counts = np.unique(scores, return_inverse=True,
                                   return_counts=True)
    cum = np.cumsum(counts)
    group_midrank = n_zero + (np.concatenate([[0], cum[:-1]]) + cum + 1) / 2.0
    ranks = group_midrank[inverse]

    pos_scored = np.isin(keys, t_keys)
    n_pos_zero = n_pos - int(pos_scored.sum())
    rank_sum = float(ranks[pos_scored].sum()) + n_pos_zero * (n_zero + 1) / 2.0
    n_neg = n_all - n_pos
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def trace_correlation(trace):
    """Pearson correlation of the recorded (delta, h) pairs.

    Records whose h field is missing are skipped; fewer than 3 usable
    points is an error, and a zero-variance or non-finite series has no
    defined correlation (nan).
    """
    pairs = [(rec.delta, rec.h) for rec in trace if rec.h is not None]
    if len(pairs) < 3:
        raise ValueError("need at least 3 trace points with both values")
    a = np.asarray([p[0] for p in pairs], dtype=np.float64)
    b = np.asarray([p[1] for p in pairs], dtype=np.float64)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        return float("nan")
    sa, sb = a.std(), b.std()
    if sa == 0.0 or sb == 0.0:
        return float("nan")
    return float(((a - a.mean()) * (b - b.mean())).mean() / (sa * sb))


def is_dag(pattern):
    """True when the support of the (square) matrix has no directed cycle."""
    return sparse.topological_order(sparse.compress(pattern)) is not None


# ---------------------------------------------------------------------------
# Grid search over (epsilon, tau)


@dataclasses.dataclass
class GridOutcome:
    """Best cell plus everything needed to audit the sweep."""

    report: EvalReport
    w_best: sparse.SparseMatrix
    result_best: object
    cells: list
    results: list


def _learn_one(x, cfg_base, eps):
    cfg = dataclasses.replace(cfg_base, epsilon=float(eps))
    return least(x, cfg)


def grid_search_detailed(x, truth, cfg_base, eps_grid, tau_grid, jobs=1,
                         progress=None):
    """One learn per epsilon; every tau applied post hoc to each result.

    Best cell by F1, ties broken by smaller SHD, then smaller tau, then
    grid order.  With jobs > 1 the per-epsilon learns run in separate
    processes; each learn is seed-deterministic, and cells are aggregated
    in grid order either way.
    """
    eps_grid = [float(e) for e in eps_grid]
    tau_grid = [float(t) for t in tau_grid]
    if not eps_grid or not tau_grid:
        raise ValueError("grids must be non-empty")

    if jobs is not None and jobs > 1 and len(eps_grid) > 1:
        workers = min(jobs, len(eps_grid))
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_learn_one, [x] * len(eps_grid),
                                  [cfg_base] * len(eps_grid), eps_grid))
    else:
        results = []
        for eps in eps_grid:
            if progress is not None:
                progress(f"grid: learning at epsilon={eps:g}")
            results.append(_learn_one(x, cfg_base, eps))

    cells = []
    best = None
    best_w = None
    best_res = None
    for eps, res in zip(eps_grid, results):
        auc = auc_roc(res.w, truth)
        for tau in tau_grid:
            w_cut = post_threshold(res.w, tau)
            rep = compare_graphs(w_cut, truth)
            rep.auc_roc = auc
            rep.best_epsilon = eps
            rep.best_tau = tau
            cells.append(rep)
            better = (best is None
                      or rep.f1 > best.f1
                      or (rep.f1 == best.f1 and rep.shd < best.shd)
                      or (rep.f1 == best.f1 and rep.shd == best.shd
                          and tau < best.best_tau))
            if better:
                best, best_w, best_res = rep, w_cut, res
    return GridOutcome(report=best, w_best=best_w, result_best=best_res,
                       cells=cells, results=results)


def grid_search(x, truth, cfg_base, eps_grid, tau_grid, jobs=1, progress=None):
    """Report of the best (epsilon, tau) cell; see grid_search_detailed."""
    return grid_search_detailed(x, truth, cfg_base, eps_grid, tau_grid,
                                jobs=jobs, progress=progress).report

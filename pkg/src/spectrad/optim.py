"""First-order update machinery on sparse supports.

Adam state lives on exactly the same CSR pattern as the iterate; the
learner re-synchronizes supports after every expansion or filtering step,
so the elementwise update here can insist on aligned patterns.  Moments of
dropped entries are discarded; re-admitted entries restart from zero
moments.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .sparse import SparseMatrix, embed_values, from_coo, pattern_equal


@dataclass
class AdamState:
    m: SparseMatrix
    v: SparseMatrix
    t: int = 0
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(pattern, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
    """Fresh zero-moment state on the given pattern."""
    zeros = pattern.with_values(np.zeros(pattern.nnz))
    return AdamState(m=zeros, v=zeros.with_values(np.zeros(pattern.nnz)),
                     t=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(state, w, grad):
    """One bias-corrected Adam update; returns (new_state, new_w).

    ``grad`` may live on a subset of w's support (absent entries count as
    zero gradient); the moment matrices must match w's support exactly.
    """
    if not (pattern_equal(state.m, w) and pattern_equal(state.v, w)):
        raise ValueError("moment supports out of sync with the iterate")
    g = grad.values if pattern_equal(grad, w) else embed_values(grad, w).values
    t = state.t + 1
    m = state.beta1 * state.m.values + (1.0 - state.beta1) * g
    v = state.beta2 * state.v.values + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    w_new = w.with_values(
        w.values - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
    new_state = replace(state, m=w.with_values(m), v=w.with_values(v), t=t)
    return new_state, w_new


def threshold_filter(w, theta):
    """Drop entries with |value| < theta from the support (theta=0: no-op)."""
    if theta < 0:
        raise ValueError("theta must be >= 0")
    if theta == 0.0 or w.nnz == 0:
        return w
    keep = np.abs(w.values) >= theta
    if keep.all():
        return w
    counts = np.bincount(w.row_ids()[keep], minlength=w.n_rows)
    offsets = np.zeros(w.n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return SparseMatrix(w.n_rows, w.n_cols, offsets,
                        w.col_indices[keep], w.values[keep])


def sample_distinct(n_total, count, rng):
    """``count`` distinct integers from range(n_total), uniformly, seeded.

    Small ranges go through a permutation draw; huge ranges draw with
    replacement, deduplicate, and pick exactly ``count`` of the collected
    distinct values (exchangeable, so still uniform over subsets).
    """
    if count > n_total:
        raise ValueError("cannot draw more distinct values than exist")
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    if n_total <= 2_000_000:
        return rng.choice(n_total, size=count, replace=False).astype(np.int64)
    pool = np.zeros(0, dtype=np.int64)
    while pool.size < count:
        draw = rng.integers(0, n_total, size=count + count // 16 + 16,
                            dtype=np.int64)
        pool = np.unique(np.concatenate([pool, draw]))
    return rng.choice(pool, size=count, replace=False)


def glorot_sparse_init(d, density, rng):
    """Sparse Glorot-uniform start: off-diagonal support at the given
    density, values uniform on +-sqrt(6 / (2 d)); diagonal excluded."""
    if not 0.0 <= density <= 1.0:
        raise ValueError("density must lie in [0, 1]")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    n_off = d * (d - 1)
    count = int(rng.binomial(n_off, density)) if n_off and density > 0 else 0
    idx = np.sort(sample_distinct(d * (d - 1), count, rng))
    rows = idx // (d - 1) if d > 1 else np.zeros(0, dtype=np.int64)
    cols = idx % (d - 1) if d > 1 else np.zeros(0, dtype=np.int64)
    cols = cols + (cols >= rows)
    bound = np.sqrt(6.0 / (2.0 * d)) if d else 0.0
    vals = rng.uniform(-bound, bound, size=count)
    return from_coo(d, d, rows, cols, vals)

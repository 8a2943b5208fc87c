"""Synthetic benchmark cases: random DAGs, edge weights, and LSEM samples.

All generators run on numpy's PCG64 through explicit SeedSequence spawning,
so the graph topology, the edge weights, and the noise draws live on
separate streams: regenerating with a different noise family reuses the
exact same graph and weights.
"""

from __future__ import annotations

import dataclasses
import json
import os
import warnings

import numpy as np

from . import sparse
from .optim import sample_distinct

MODELS = ("er", "sf")
NOISES = ("gauss", "exp", "gumbel")


@dataclasses.dataclass
class GraphCase:
    """One generated benchmark instance."""

    d: int
    w_true: sparse.SparseMatrix
    adjacency: sparse.SparseMatrix
    model: str
    avg_degree: float
    noise: str
    n: int
    x: np.ndarray
    seed: int


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_dag(d, model, avg_degree, seed):
    """0/1 adjacency of a random DAG; entry (i, j) is an edge i -> j.

    ER: undirected G(d, p) with p = avg_degree/(d-1), each edge oriented
    from the lower to the higher position in a uniformly random permutation.
    SF: Barabasi-Albert preferential attachment (repeated-nodes sampling)
    adding round(avg_degree/2) edges per arriving node, oriented new -> old;
    node labels are the attachment order, so the result is strictly
    lower-triangular and acyclic by construction.
    """
    if d < 2:
        raise ValueError("need at least 2 nodes")
    if not 0 <= avg_degree < d:
        raise ValueError(f"avg_degree must be in [0, d); got {avg_degree}")
    model = str(model).lower()
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    rng = _rng(seed)

    if model == "er":
        n_pairs = d * (d - 1) // 2
        p = min(avg_degree / (d - 1), 1.0)
        count = int(rng.binomial(n_pairs, p))
        pos = np.sort(sample_distinct(n_pairs, count, rng))
        # decode lexicographic pair index -> (i, j) with i < j
        starts = (np.arange(d, dtype=np.int64) * (d - 1)
                  - np.arange(d, dtype=np.int64) * (np.arange(d, dtype=np.int64) - 1) // 2)
        i = np.searchsorted(starts, pos, side="right") - 1
        j = pos - starts[i] + i + 1
        perm = rng.permutation(d)
        rank = np.empty(d, dtype=np.int64)
        rank[perm] = np.arange(d)
        swap = rank[i] > rank[j]
        rows = np.where(swap, j, i)
        cols = np.where(swap, i, j)
    else:
        m = max(1, int(round(avg_degree / 2.0)))
        if m >= d:
            raise ValueError("attachment count must be below d")
        rows_list = []
        cols_list = []
        targets = list(range(m))
        repeated = []
        for source in range(m, d):
            rows_list.extend([source] * len(targets))
            cols_list.extend(targets)
            repeated.extend(targets)
            repeated.extend([source] * m)
            chosen = []
            seen = set()
            while len(chosen) < m:
                cand = repeated[int(rng.integers(0, len(repeated)))]
                if cand not in seen:
                    seen.add(cand)
                    chosen.append(cand)
            targets = chosen
        rows = np.asarray(rows_list, dtype=np.int64)
        cols = np.asarray(cols_list, dtype=np.int64)

    adj = sparse.from_coo(d, d, rows, cols, np.ones(rows.size))
    if sparse.topological_order(adj) is None:
        raise RuntimeError("generated graph is not acyclic")
    return adj


def assign_weights(pattern, seed, low=0.5, high=2.0):
    """Random edge weights uniform on [-high, -low] u [low, high].

    Values stored in ``pattern`` are ignored; only its support matters.
    Stream layout: magnitudes are drawn first, then signs.
    """
    if not 0.0 < low <= high:
        raise ValueError("need 0 < low <= high")
    if sparse.topological_order(pattern) is None:
        raise ValueError("weight assignment expects an acyclic pattern")
    rng = _rng(seed)
    mags = rng.uniform(low, high, size=pattern.nnz)
    signs = rng.integers(0, 2, size=pattern.nnz).astype(np.float64) * 2.0 - 1.0
    return pattern.with_values(mags * signs)


def sample_lsem(w_true, n, noise, seed, centered=True):
    """n samples of the linear SEM x_i = sum_j w[j,i] x_j + e_i.

    Noise families, unit scale: gauss is N(0,1); exp is Exponential(1)
    shifted by -1; gumbel has scale 1 and location -euler_gamma.  With
    centered=False the exp and gumbel shifts are dropped (ablation mode).
    The full n-by-d noise block is drawn in one call, then columns are
    filled in topological order.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    noise = str(noise).lower()
    if noise not in NOISES:
        raise ValueError(f"unknown noise {noise!r}; expected one of {NOISES}")
    order = sparse.topological_order(w_true)
    if order is None:
        raise ValueError("sampling requires an acyclic weight matrix")
    rng = _rng(seed)
    d = w_true.n_cols
    if noise == "gauss":
        x = rng.standard_normal((n, d))
    elif noise == "exp":
        x = rng.exponential(1.0, size=(n, d))
        if centered:
            x -= 1.0
    else:
        loc = -float(np.euler_gamma) if centered else 0.0
        x = rng.gumbel(loc, 1.0, size=(n, d))

    # column-major view of w_true for parent lookups
    rows = w_true.row_ids()
    csort = np.argsort(w_true.col_indices, kind="stable")
    by_col_rows = rows[csort]
    by_col_vals = w_true.values[csort]
    col_starts = np.searchsorted(w_true.col_indices[csort],
                                 np.arange(d + 1, dtype=np.int64))
    for node in order:
        lo, hi = col_starts[node], col_starts[node + 1]
        if lo == hi:
            continue
        x[:, node] += x[:, by_col_rows[lo:hi]] @ by_col_vals[lo:hi]
    if not np.all(np.isfinite(x)):
        raise RuntimeError("sample matrix contains non-finite values")
    return x


def generate_case(d, model, avg_degree, noise, n=None, seed=0,
                  weight_low=0.5, weight_high=2.0, centered=True):
    """Full pipeline: topology, weights, samples, on three split streams."""
    if n is None:
        n = 10 * d
    graph_ss, weight_ss, noise_ss = np.random.SeedSequence(seed).spawn(3)
    adjacency = random_dag(d, model, avg_degree, np.random.default_rng(graph_ss))
    w_true = assign_weights(adjacency, np.random.default_rng(weight_ss),
                            low=weight_low, high=weight_high)
    x = sample_lsem(w_true, n, noise, np.random.default_rng(noise_ss),
                    centered=centered)
    return GraphCase(d=d, w_true=w_true, adjacency=adjacency,
                     model=str(model).lower(), avg_degree=float(avg_degree),
                     noise=str(noise).lower(), n=int(n), x=x, seed=int(seed))


def lsem_covariance(w_true, noise_variances=None):
    """Analytic covariance (I - W)^-T diag(var) (I - W)^-1 of the LSEM."""
    d = w_true.n_rows
    w = w_true.to_dense()
    if noise_variances is None:
        noise_variances = np.ones(d)
    inv = np.linalg.inv(np.eye(d) - w)
    return inv.T @ np.diag(np.asarray(noise_variances, dtype=np.float64)) @ inv


# ---------------------------------------------------------------------------
# On-disk layout: Matrix Market graphs, headerless CSV samples, JSON sidecar

CASE_FILES = ("adjacency.mtx", "weights.mtx", "samples.csv", "case.json")


def save_case(case, out_dir):
    """Write a GraphCase into out_dir; returns {name: path}."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {name: os.path.join(out_dir, name) for name in CASE_FILES}
    sparse.write_matrix_market(paths["adjacency.mtx"], case.adjacency)
    sparse.write_matrix_market(paths["weights.mtx"], case.w_true)
    # 17 significant digits round-trips float64 bit for bit
    np.savetxt(paths["samples.csv"], case.x, delimiter=",", fmt="%.17g")
    meta = {"d": case.d, "model": case.model, "avg_degree": case.avg_degree,
            "noise": case.noise, "n": case.n, "seed": case.seed}
    with open(paths["case.json"], "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")
    return paths


def load_case(case_dir):
    """Read back a directory written by save_case."""
    with open(os.path.join(case_dir, "case.json")) as f:
        meta = json.load(f)
    adjacency = sparse.read_matrix_market(os.path.join(case_dir, "adjacency.mtx"))
    w_true = sparse.read_matrix_market(os.path.join(case_dir, "weights.mtx"))
    x = load_samples(os.path.join(case_dir, "samples.csv"))
    return GraphCase(d=int(meta["d"]), w_true=w_true, adjacency=adjacency,
                     model=meta["model"], avg_degree=float(meta["avg_degree"]),
                     noise=meta["noise"], n=int(meta["n"]), x=x,
                     seed=int(meta["seed"]))


def load_samples(path):
    """Headerless CSV, one sample per row, as a float64 array."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        x = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    if x.size == 0:
        raise ValueError(f"no samples in {path}")
    return x

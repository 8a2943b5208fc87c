"""CSR sparse containers and the deterministic kernels built on them.

Matrices are compressed sparse row over float64: ``row_offsets`` (length
n_rows + 1), ``col_indices`` and ``values`` (length nnz), columns strictly
increasing inside each row.  Vectors are plain 1-D float64 ndarrays.

Summation order is fixed and documented: row sums accumulate entries in
ascending column order within each row, column sums accumulate in row-major
storage order (ascending row index per column), both via a single-pass
scatter accumulator.  Repeated calls on identical inputs are bit-identical,
and no kernel here materializes a dense (n_rows x n_cols) array.
"""

from __future__ import annotations

import numpy as np

DENSE_GUARD = 2000


class SparseMatrix:
    """Immutable-by-convention CSR matrix.

    Stored zeros are permitted transiently mid-update; ``compress`` removes
    them.  Pattern arrays (``row_offsets``, ``col_indices``) are shared
    between matrices whenever an operation preserves the support, so they
    must never be mutated in place.
    """

    __slots__ = ("n_rows", "n_cols", "row_offsets", "col_indices", "values",
                 "_row_ids", "_keys")

    def __init__(self, n_rows, n_cols, row_offsets, col_indices, values,
                 check=False):
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.row_offsets = np.asarray(row_offsets, dtype=np.int64)
        self.col_indices = np.asarray(col_indices, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float64)
        self._row_ids = None
        self._keys = None
        if check:
            self.validate()

    @property
    def nnz(self):
        return int(self.col_indices.shape[0])

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    def row_ids(self):
        """Row index of every stored entry, in storage order (cached)."""
        if self._row_ids is None:
            counts = np.diff(self.row_offsets)
            self._row_ids = np.repeat(
                np.arange(self.n_rows, dtype=np.int64), counts)
        return self._row_ids

    def keys(self):
        """Global int64 key row * n_cols + col per entry; strictly increasing."""
        if self._keys is None:
            self._keys = self.row_ids() * np.int64(self.n_cols) \
                + self.col_indices
        return self._keys

    def validate(self):
        """Check every structural invariant; raise ValueError on violation."""
        if self.n_rows < 0 or self.n_cols < 0:
            raise ValueError("negative dimension")
        ro = self.row_offsets
        if ro.shape != (self.n_rows + 1,):
            raise ValueError("row_offsets has wrong length")
        if ro[0] != 0 or ro[-1] != self.col_indices.shape[0]:
            raise ValueError("row_offsets must start at 0 and end at nnz")
        if np.any(np.diff(ro) < 0):
            raise ValueError("row_offsets must be nondecreasing")
        if self.values.shape != self.col_indices.shape:
            raise ValueError("values and col_indices length mismatch")
        if self.nnz:
            if self.col_indices.min() < 0 or self.col_indices.max() >= self.n_cols:
                raise ValueError("column index out of range")
            # strictly increasing columns within each row <=> strictly
            # increasing global keys
            if np.any(np.diff(self.keys()) <= 0):
                raise ValueError("columns must be strictly increasing per row")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite value stored")
        return self

    def to_dense(self, max_dim=DENSE_GUARD):
        if max(self.n_rows, self.n_cols) > max_dim:
            raise ValueError(
                f"dense conversion refused beyond {max_dim} (got {self.shape})")
        out = np.zeros((self.n_rows, self.n_cols))
        out[self.row_ids(), self.col_indices] = self.values
        return out

    def with_values(self, values):
        """New matrix sharing this pattern with a fresh value array."""
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.values.shape:
            raise ValueError("value array does not match pattern")
        out = SparseMatrix(self.n_rows, self.n_cols, self.row_offsets,
                           self.col_indices, values)
        out._row_ids = self._row_ids
        out._keys = self._keys
        return out

    def __repr__(self):
        return (f"SparseMatrix(shape={self.shape}, nnz={self.nnz})")


def empty(n_rows, n_cols):
    return SparseMatrix(n_rows, n_cols,
                        np.zeros(n_rows + 1, dtype=np.int64),
                        np.zeros(0, dtype=np.int64), np.zeros(0))


def from_coo(n_rows, n_cols, rows, cols, vals):
    """Build CSR from triplets; entries are sorted, duplicates rejected."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    if not (rows.shape == cols.shape == vals.shape):
        raise ValueError("triplet arrays must share a length")
    if rows.size:
        if rows.min() < 0 or rows.max() >= n_rows:
            raise ValueError("row index out of range")
        if cols.min() < 0 or cols.max() >= n_cols:
            raise ValueError("column index out of range")
    keys = rows * np.int64(n_cols) + cols
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    if keys.size and np.any(np.diff(keys) == 0):
        raise ValueError("duplicate entry in triplet input")
    counts = np.bincount(rows, minlength=n_rows)
    offsets = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return SparseMatrix(n_rows, n_cols, offsets, cols[order], vals[order],
                        check=True)


def from_dense(a, tol=0.0):
    """CSR from a dense array, keeping entries with |a| > tol."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a 2-D array")
    rows, cols = np.nonzero(np.abs(a) > tol)
    return from_coo(a.shape[0], a.shape[1], rows, cols, a[rows, cols])


def row_sums(m):
    """Per-row sums, accumulated in ascending column order."""
    return np.bincount(m.row_ids(), weights=m.values,
                       minlength=m.n_rows)[:m.n_rows].astype(np.float64)


def col_sums(m):
    """Per-column sums via one scatter pass in storage order."""
    return np.bincount(m.col_indices, weights=m.values,
                       minlength=m.n_cols)[:m.n_cols].astype(np.float64)


def scale_rows_cols(m, left, right):
    """Entrywise left[i] * m[i, j] * right[j]; shares m's pattern.

    Either vector may be None, meaning no scaling on that side.
    """
    out = m.values
    if left is not None:
        left = np.asarray(left, dtype=np.float64)
        if left.shape != (m.n_rows,):
            raise ValueError("row scaling vector length mismatch")
        out = out * left[m.row_ids()]
    if right is not None:
        right = np.asarray(right, dtype=np.float64)
        if right.shape != (m.n_cols,):
            raise ValueError("column scaling vector length mismatch")
        out = out * right[m.col_indices]
    if left is None and right is None:
        out = out.copy()
    return m.with_values(out)


def hadamard(a, b):
    """Entrywise product on the support intersection."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.row_offsets is b.row_offsets and a.col_indices is b.col_indices:
        return a.with_values(a.values * b.values)
    # one support containing the other is the common case (compression
    # only ever shrinks a pattern); the intersection is then the smaller
    # support and a single ordered lookup replaces the set intersection
    small, big = (a, b) if a.nnz <= b.nnz else (b, a)
    if small.nnz == 0:
        return small.with_values(small.values)
    pos = np.searchsorted(big.keys(), small.keys())
    if pos[-1] < big.nnz and np.array_equal(big.keys()[pos], small.keys()):
        return small.with_values(small.values * big.values[pos])
    common, ia, ib = np.intersect1d(a.keys(), b.keys(), assume_unique=True,
                                    return_indices=True)
    rows = common // a.n_cols
    counts = np.bincount(rows, minlength=a.n_rows)
    offsets = np.zeros(a.n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return SparseMatrix(a.n_rows, a.n_cols, offsets,
                        (common % a.n_cols).astype(np.int64),
                        a.values[ia] * b.values[ib])


def support_mask(m):
    """0/1 pattern of m (every stored entry becomes 1.0)."""
    return m.with_values(np.ones(m.nnz))


def take_entries(m, idx):
    """Submatrix keeping the entries at sorted storage positions idx."""
    counts = np.bincount(m.row_ids()[idx], minlength=m.n_rows)
    offsets = np.zeros(m.n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return SparseMatrix(m.n_rows, m.n_cols, offsets,
                        m.col_indices[idx], m.values[idx])


def compress(m):
    """Drop stored exact zeros; returns m itself when there are none."""
    keep = m.values != 0.0
    if keep.all():
        return m
    return take_entries(m, np.flatnonzero(keep))


def union_support(a, b):
    """0/1 pattern on the union of two supports."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    keys = np.union1d(a.keys(), b.keys())
    rows = keys // a.n_cols
    counts = np.bincount(rows, minlength=a.n_rows)
    offsets = np.zeros(a.n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return SparseMatrix(a.n_rows, a.n_cols, offsets,
                        (keys % a.n_cols).astype(np.int64),
                        np.ones(keys.shape[0]))


def embed_values(m, pattern):
    """Scatter m's values into a superset pattern (absent entries 0)."""
    if m.shape != pattern.shape:
        raise ValueError(f"shape mismatch {m.shape} vs {pattern.shape}")
    pos = np.searchsorted(pattern.keys(), m.keys())
    if m.nnz and (pos.max(initial=0) >= pattern.nnz
                  or np.any(pattern.keys()[pos] != m.keys())):
        raise ValueError("support is not contained in the target pattern")
    vals = np.zeros(pattern.nnz)
    vals[pos] = m.values
    return pattern.with_values(vals)


def restrict_values(m, pattern):
    """Gather m's values on a subset pattern of m's support."""
    if m.shape != pattern.shape:
        raise ValueError(f"shape mismatch {m.shape} vs {pattern.shape}")
    pos = np.searchsorted(m.keys(), pattern.keys())
    if pattern.nnz and (pos.max(initial=0) >= m.nnz
                        or np.any(m.keys()[pos] != pattern.keys())):
        raise ValueError("target pattern is not contained in the support")
    return pattern.with_values(m.values[pos])


def pattern_equal(a, b):
    if a.shape != b.shape:
        return False
    if a.row_offsets is b.row_offsets and a.col_indices is b.col_indices:
        return True
    return (np.array_equal(a.row_offsets, b.row_offsets)
            and np.array_equal(a.col_indices, b.col_indices))


def elementwise_pow(v, a):
    """v ** a with the conventions 0**0 = 1 and 0**a = 0 for a > 0.

    Negative bases with a fractional exponent are a domain error.  Zeros are
    skipped (not exponentiated) when a != 0, which keeps the cost
    proportional to the number of nonzeros.
    """
    v = np.asarray(v, dtype=np.float64)
    a = float(a)
    if a == 0.0:
        return np.ones_like(v)
    if np.any(v < 0) and not a.is_integer():
        raise ValueError("negative base with fractional exponent")
    out = np.zeros_like(v)
    idx = np.nonzero(v)[0]
    if idx.size:
        out[idx] = np.power(v[idx], a)
    return out


def div0(num, den):
    """Elementwise num / den with quotient 0 wherever den == 0."""
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.zeros(np.broadcast_shapes(num.shape, den.shape))
    np.divide(num, den, out=out, where=den != 0.0)
    return out


def to_scipy_csr(m):
    """Zero-copy view as a scipy CSR matrix (for dense @ sparse products)."""
    import scipy.sparse as sp
    return sp.csr_matrix((m.values, m.col_indices, m.row_offsets),
                         shape=m.shape, copy=False)


def topological_order(m):
    """Kahn's algorithm on the support of a square matrix.

    Entry (i, j) is read as an edge i -> j.  Returns a list of node ids in a
    valid topological order, or None when the support contains a cycle.
    Nodes become ready in ascending id order, so the result is deterministic.
    """
    if m.n_rows != m.n_cols:
        raise ValueError("topological order needs a square matrix")
    d = m.n_rows
    indeg = np.bincount(m.col_indices, minlength=d).astype(np.int64)
    import heapq
    ready = [int(i) for i in np.flatnonzero(indeg == 0)]
    heapq.heapify(ready)
    order = []
    while ready:
        u = heapq.heappop(ready)
        order.append(u)
        lo, hi = m.row_offsets[u], m.row_offsets[u + 1]
        for v in m.col_indices[lo:hi]:
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(ready, int(v))
    if len(order) != d:
        return None
    return order


# ---------------------------------------------------------------------------
# Matrix Market coordinate I/O (1-based, real general)

_MM_HEADER = "%%MatrixMarket matrix coordinate real general"


def write_matrix_market(path, m, comment=None):
    """Write CSR as Matrix Market coordinate/real/general, 1-based indices.

    Values are written with shortest round-trip decimals so a write/read
    cycle is bit-exact.
    """
    rows = m.row_ids()
    with open(path, "w") as f:
        f.write(_MM_HEADER + "\n")
        if comment:
            for line in str(comment).splitlines():
                f.write(f"% {line}\n")
        f.write(f"{m.n_rows} {m.n_cols} {m.nnz}\n")
        for i, j, v in zip(rows, m.col_indices, m.values):
            f.write(f"{i + 1} {j + 1} {float(v)!r}\n")


def read_matrix_market(path):
    """Parse a Matrix Market coordinate/real(or integer)/general file."""
    with open(path) as f:
        header = f.readline().strip()
        fields = header.lower().split()
        if (len(fields) != 5 or fields[0] != "%%matrixmarket"
                or fields[1:3] != ["matrix", "coordinate"]
                or fields[3] not in ("real", "integer")
                or fields[4] != "general"):
            raise ValueError(f"unsupported Matrix Market header: {header!r}")
        size_line = None
        for line in f:
            line = line.strip()
            if not line or line.startswith("%"):
                continue
            size_line = line
            break
        if size_line is None:
            raise ValueError("missing size line")
        parts = size_line.split()
        if len(parts) != 3:
            raise ValueError(f"malformed size line: {size_line!r}")
        n_rows, n_cols, nnz = (int(p) for p in parts)
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz)
        seen = 0
        for line in f:
            line = line.strip()
            if not line or line.startswith("%"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"malformed entry line: {line!r}")
            if seen >= nnz:
                raise ValueError("more entries than the size line declares")
            rows[seen] = int(parts[0]) - 1
            cols[seen] = int(parts[1]) - 1
            vals[seen] = float(parts[2])
            seen += 1
        if seen != nnz:
            raise ValueError(f"expected {nnz} entries, found {seen}")
    return from_coo(n_rows, n_cols, rows, cols, vals)

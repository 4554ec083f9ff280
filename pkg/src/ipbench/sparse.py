"""Symmetric sparse storage, fill-reducing ordering and symbolic helpers.

Matrices are kept as the lower triangle (diagonal included) in compressed
column form.  Everything here is pattern/ordering machinery shared by the
factorization backends; no numerical pivoting happens in this module.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
import scipy.io
import scipy.sparse as sps

ROOT = -1


class SymTriplet(NamedTuple):
    """Coordinate lower-triangle description of a symmetric matrix."""

    n: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    @classmethod
    def from_entries(cls, n, entries):
        entries = list(entries)
        if not entries:
            return cls(n, np.zeros(0, int), np.zeros(0, int), np.zeros(0))
        r, c, v = zip(*entries)
        return cls(n, np.asarray(r, int), np.asarray(c, int), np.asarray(v, float))


@dataclass(frozen=True, eq=False)
class SymCsc:
    """Lower-triangular compressed-column storage of a symmetric matrix.

    Row indices inside each column are strictly increasing and never above
    the diagonal.
    """

    n: int
    col_start: np.ndarray
    row_idx: np.ndarray
    values: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.col_start[-1])

    def col_idx(self) -> np.ndarray:
        """Column index of every stored entry."""
        return np.repeat(np.arange(self.n), np.diff(self.col_start))

    def with_values(self, values) -> "SymCsc":
        values = np.asarray(values, dtype=float)
        if values.shape != self.values.shape:
            raise ValueError("value array does not match the pattern")
        return SymCsc(self.n, self.col_start, self.row_idx, values)

    def same_pattern(self, other: "SymCsc") -> bool:
        return (
            self.n == other.n
            and np.array_equal(self.col_start, other.col_start)
            and np.array_equal(self.row_idx, other.row_idx)
        )

    def max_abs(self) -> float:
        return float(np.abs(self.values).max()) if self.nnz else 0.0

    def to_scipy(self) -> sps.csr_matrix:
        """Full symmetric matrix (both triangles) as CSR."""
        return self._full

    @cached_property
    def _full(self) -> sps.csr_matrix:
        cols = self.col_idx()
        off = self.row_idx != cols
        r = np.concatenate([self.row_idx, cols[off]])
        c = np.concatenate([cols, self.row_idx[off]])
        v = np.concatenate([self.values, self.values[off]])
        return sps.csr_matrix((v, (r, c)), shape=(self.n, self.n))

    def to_dense(self) -> np.ndarray:
        d = np.zeros((self.n, self.n))
        cols = self.col_idx()
        d[self.row_idx, cols] = self.values
        d[cols, self.row_idx] = self.values
        return d

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.to_scipy() @ x

    def inf_norm(self) -> float:
        """Largest absolute row sum of the full symmetric matrix."""
        if self.nnz == 0:
            return 0.0
        return float(abs(self.to_scipy()).sum(axis=1).max())

    @classmethod
    def from_dense(cls, a, tol: float = 0.0) -> "SymCsc":
        a = np.asarray(a, dtype=float)
        r, c = np.nonzero(np.abs(np.tril(a)) > tol)
        return from_triplets(SymTriplet(a.shape[0], r, c, a[r, c]))


def from_triplets(t: SymTriplet) -> SymCsc:
    """Compress lower-triangle triplets, summing duplicates."""
    n = int(t.n)
    rows = np.asarray(t.rows, dtype=np.int64).ravel()
    cols = np.asarray(t.cols, dtype=np.int64).ravel()
    vals = np.asarray(t.values, dtype=float).ravel()
    if not (rows.size == cols.size == vals.size):
        raise ValueError("triplet arrays differ in length")
    if rows.size:
        if rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n:
            raise IndexError("triplet index out of range")
        if np.any(rows < cols):
            raise ValueError("upper-triangle entry in symmetric triplets")
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite value in triplets")
    key = cols * n + rows
    ukey, inv = np.unique(key, return_inverse=True)
    summed = np.zeros(ukey.size)
    np.add.at(summed, inv, vals)
    ucols = ukey // max(n, 1)
    urows = ukey - ucols * n
    col_start = np.zeros(n + 1, dtype=np.int64)
    np.add.at(col_start, ucols + 1, 1)
    np.cumsum(col_start, out=col_start)
    return SymCsc(n, col_start, urows.astype(np.int64), summed)


def check_permutation(p, n: int) -> np.ndarray:
    p = np.asarray(p, dtype=np.int64)
    if p.shape != (n,) or not np.array_equal(np.sort(p), np.arange(n)):
        raise ValueError("not a permutation of 0..n-1")
    return p


def natural_order(a: SymCsc) -> np.ndarray:
    return np.arange(a.n, dtype=np.int64)


def permute(a: SymCsc, p) -> tuple[SymCsc, np.ndarray]:
    """Return ``B = P A P^T`` (``B[i, j] = A[p[i], p[j]]``) and the value map.

    The map gives, for every stored entry of ``B``, the index of the entry of
    ``A`` it came from, so numerical values can be permuted later without
    touching the pattern again.
    """
    n = a.n
    p = check_permutation(p, n)
    inv = np.empty(n, dtype=np.int64)
    inv[p] = np.arange(n)
    r = inv[a.row_idx]
    c = inv[a.col_idx()]
    lo = np.maximum(r, c)
    hi = np.minimum(r, c)
    order = np.lexsort((lo, hi))
    col_start = np.zeros(n + 1, dtype=np.int64)
    np.add.at(col_start, hi + 1, 1)
    np.cumsum(col_start, out=col_start)
    b = SymCsc(n, col_start, lo[order], a.values[order])
    return b, order


def _adjacency(a: SymCsc) -> list[set]:
    adj = [set() for _ in range(a.n)]
    cols = a.col_idx()
    for i, j in zip(a.row_idx.tolist(), cols.tolist()):
        if i != j:
            adj[i].add(j)
            adj[j].add(i)
    return adj


def amd_order(a: SymCsc) -> np.ndarray:
    """Approximate minimum degree ordering on the symmetric pattern.

    Quotient-graph elimination with element absorption and the approximate
    external degree bound.  Ties are broken by original degree, then index,
    so the result is deterministic.
    """
    n = a.n
    var_adj = _adjacency(a)
    orig_deg = [len(s) for s in var_adj]
    elem_of = [set() for _ in range(n)]
    members: dict[int, set] = {}
    deg = list(orig_deg)
    done = [False] * n
    heap = [(deg[i], orig_deg[i], i) for i in range(n)]
    heapq.heapify(heap)
    order = []
    while heap:
        d, _, p = heapq.heappop(heap)
        if done[p] or d != deg[p]:
            continue
        done[p] = True
        order.append(p)
        absorbed = elem_of[p]
        lp = set(var_adj[p])
        for e in absorbed:
            lp |= members.pop(e)
        lp.discard(p)
        var_adj[p] = elem_of[p] = None

        # |L_e \ L_p| for every element touching the new element
        outside = {}
        for i in lp:
            for e in elem_of[i]:
                if e in absorbed:
                    continue
                if e not in outside:
                    outside[e] = len(members[e])
                outside[e] -= 1

        remaining = n - len(order)
        for i in lp:
            ei = elem_of[i]
            ei -= absorbed
            ai = var_adj[i]
            ai.discard(p)
            ai -= lp
            ext = 0
            for e in list(ei):
                w = outside[e]
                if w == 0:
                    ei.discard(e)
                    members.pop(e, None)
                else:
                    ext += w
            ei.add(p)
            k = len(lp) - 1
            deg[i] = min(remaining - 1, deg[i] + k, len(ai) + k + ext)
            heapq.heappush(heap, (deg[i], orig_deg[i], i))
        members[p] = lp
    return np.asarray(order, dtype=np.int64)


def zero_diagonal_matching(a: SymCsc) -> np.ndarray:
    """Pair each zero-diagonal row with an unmatched neighbor whose diagonal is nonzero.

    Returns ``mate`` with ``mate[i] = j`` and ``mate[j] = i`` for matched pairs
    and -1 elsewhere.  Rows are visited in index order and the largest
    coupling wins (smallest index on ties), so the result is deterministic.
    """
    n = a.n
    cols = a.col_idx()
    on_diag = a.row_idx == cols
    d = np.zeros(n)
    d[cols[on_diag]] = a.values[on_diag]
    zero = d == 0.0
    full = a.to_scipy().tocsr()
    full.sort_indices()
    mate = np.full(n, -1, dtype=np.int64)
    for i in np.nonzero(zero)[0]:
        nb = full.indices[full.indptr[i]:full.indptr[i + 1]]
        w = np.abs(full.data[full.indptr[i]:full.indptr[i + 1]])
        ok = (nb != i) & ~zero[nb] & (mate[nb] < 0) & (w > 0)
        if np.any(ok):
            cand, wc = nb[ok], w[ok]
            j = cand[np.argmax(wc)]
            mate[i], mate[j] = j, i
    return mate


def matched_amd_order(a: SymCsc) -> np.ndarray:
    """AMD on the graph with matched zero-diagonal pairs contracted.

    Each pair is expanded in place (nonzero-diagonal member first), so both
    rows land in the same front and a 2x2 pivot is available to the
    numerical phase.  Without zero diagonals this is plain AMD.
    """
    n = a.n
    mate = zero_diagonal_matching(a)
    if not np.any(mate >= 0):
        return amd_order(a)
    lead = np.where(mate >= 0, np.minimum(np.arange(n), mate), np.arange(n))
    reps, rep = np.unique(lead, return_inverse=True)
    cols = a.col_idx()
    r, c = rep[a.row_idx], rep[cols]
    lo, hi = np.maximum(r, c), np.minimum(r, c)
    k = reps.size
    lo = np.concatenate([lo, np.arange(k)])
    hi = np.concatenate([hi, np.arange(k)])
    contracted = from_triplets(SymTriplet(k, lo, hi, np.ones(lo.size)))
    order_c = amd_order(contracted)
    on_diag = a.row_idx == cols
    d = np.zeros(n)
    d[cols[on_diag]] = a.values[on_diag]
    out = []
    for v in reps[order_c].tolist():
        m = int(mate[v])
        if m < 0:
            out.append(v)
        elif d[v] != 0.0:
            out.extend((v, m))
        else:
            out.extend((m, v))
    return np.asarray(out, dtype=np.int64)


def fill_reducing_order(a: SymCsc, method: str = "amd") -> np.ndarray:
    if method == "amd":
        return amd_order(a)
    if method == "matched":
        return matched_amd_order(a)
    if method == "natural":
        return natural_order(a)
    raise ValueError(f"unknown ordering method {method!r}")


def _upper_rows(b: SymCsc):
    """For each column k of B, the rows i < k with B[k, i] != 0."""
    up = sps.csc_matrix(
        (np.ones(b.nnz), (b.col_idx(), b.row_idx)), shape=(b.n, b.n)
    )
    up.sort_indices()
    return up.indptr, up.indices


def etree_of(b: SymCsc) -> np.ndarray:
    """Elimination tree of a matrix already in pivot order (Liu's algorithm)."""
    n = b.n
    ptr, idx = _upper_rows(b)
    parent = np.full(n, ROOT, dtype=np.int64)
    ancestor = np.full(n, ROOT, dtype=np.int64)
    for k in range(n):
        for i in idx[ptr[k]:ptr[k + 1]]:
            while i != ROOT and i < k:
                nxt = ancestor[i]
                ancestor[i] = k
                if nxt == ROOT:
                    parent[i] = k
                i = nxt
    return parent


def etree(a: SymCsc, p) -> np.ndarray:
    b, _ = permute(a, p)
    return etree_of(b)


def column_structures(b: SymCsc, parent: np.ndarray) -> list[np.ndarray]:
    """Row structure (strictly below the diagonal) of every column of L."""
    n = b.n
    children = [[] for _ in range(n)]
    for j in range(n):
        if parent[j] != ROOT:
            children[parent[j]].append(j)
    sets = [None] * n
    out = [None] * n
    for j in range(n):
        s = set(b.row_idx[b.col_start[j]:b.col_start[j + 1]].tolist())
        for c in children[j]:
            s |= sets[c]
            sets[c] = None
        s.discard(j)
        sets[j] = s
        out[j] = np.fromiter(sorted(s), dtype=np.int64, count=len(s))
    return out


def symbolic_fill(a: SymCsc, p) -> int:
    """Nonzeros of the strict lower factor minus those of PAP^T."""
    b, _ = permute(a, p)
    cols = column_structures(b, etree_of(b))
    strict = int(np.count_nonzero(b.row_idx != b.col_idx()))
    return sum(len(c) for c in cols) - strict


def max_scaling(a: SymCsc) -> np.ndarray:
    """Symmetric scaling s with |s_i a_ij s_j| <= 1 (rows without entries get 1)."""
    m = np.zeros(a.n)
    v = np.abs(a.values)
    np.maximum.at(m, a.row_idx, v)
    np.maximum.at(m, a.col_idx(), v)
    s = np.ones(a.n)
    nz = m > 0
    s[nz] = 1.0 / np.sqrt(m[nz])
    return s


def read_matrix_market(path) -> SymCsc:
    m = scipy.io.mmread(path)
    m = sps.coo_matrix(m)
    lower = m.row >= m.col
    return from_triplets(SymTriplet(m.shape[0], m.row[lower], m.col[lower], m.data[lower]))


def write_matrix_market(path, a: SymCsc) -> None:
    lower = sps.coo_matrix((a.values, (a.row_idx, a.col_idx())), shape=(a.n, a.n))
    scipy.io.mmwrite(path, lower, symmetry="symmetric")

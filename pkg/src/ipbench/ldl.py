"""Sparse symmetric indefinite LDL^T factorization with inertia.

The sparse backend is multifrontal: the elimination tree (after relaxed
supernode amalgamation) drives a sequence of dense frontal matrices.  Each
front runs threshold partial pivoting with 1x1 and 2x2 pivots; fully summed
variables that fail the stability test are delayed to the parent front.  Root
fronts finish with Bunch-Kaufman pivoting so every variable is eliminated.

A dense backend backed by LAPACK's Bunch-Kaufman ``sytrf`` offers the same
contract and doubles as an oracle in tests.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps

from .sparse import (
    ROOT,
    SymCsc,
    check_permutation,
    column_structures,
    etree_of,
    fill_reducing_order,
    max_scaling,
    permute,
)

WORKERS_ENV = "IPBENCH_NUM_WORKERS"
BK_ALPHA = (1.0 + np.sqrt(17.0)) / 8.0


class DenseLimitError(ValueError):
    """Matrix too large for the dense backend."""


class SingularFactorError(ArithmeticError):
    """A zero pivot block met a nonzero right-hand-side component."""


class Inertia(NamedTuple):
    positive: int
    negative: int
    zero: int


@dataclass(frozen=True)
class PivotOptions:
    """Numerical options for the factorization.

    ``threshold`` is the partial pivoting parameter u in (0, 0.5];
    ``zero_pivot_tol`` is relative to the largest scaled matrix entry.
    """

    threshold: float = 0.01
    zero_pivot_tol: float = 1e-14
    scale: bool = True
    refine: bool = True
    nemin: int = 16

    def __post_init__(self):
        if not 0.0 < self.threshold <= 0.5:
            raise ValueError("pivot threshold must lie in (0, 0.5]")
        if self.zero_pivot_tol < 0:
            raise ValueError("zero_pivot_tol must be nonnegative")


# Stronger pivoting and a looser zero test for counting the null space of
# singular matrices: small admissible pivots under u = 0.01 amplify rounding
# in null directions well past 1e-14.
RANK_REVEALING = PivotOptions(threshold=0.1, zero_pivot_tol=1e-8)


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    workers = int(raw)
    if workers < 1:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer")
    return workers


# ----------------------------------------------------------------------------
# analysis


@dataclass(eq=False)
class SymbolicFactorization:
    n: int
    perm: np.ndarray
    parent: np.ndarray
    col_counts: np.ndarray
    pattern: SymCsc  # analyzed matrix pattern, original order
    value_map: np.ndarray  # entries of P A P^T -> entries of A
    permuted: SymCsc  # P A P^T pattern (values unused)
    # assembly tree, nodes in topological order (children first)
    node_cols: list = field(repr=False)
    node_struct: list = field(repr=False)
    node_parent: np.ndarray = field(repr=False)
    node_children: list = field(repr=False)
    node_entries: list = field(repr=False)

    @property
    def factor_nnz(self) -> int:
        """Predicted off-diagonal nonzeros of L without pivoting changes."""
        return int(self.col_counts.sum())

    @property
    def n_nodes(self) -> int:
        return len(self.node_cols)


def analyze(a: SymCsc, order=None, nemin: int = 16) -> SymbolicFactorization:
    """Symbolic analysis: elimination tree, column counts and assembly tree."""
    n = a.n
    if order is None:
        order = fill_reducing_order(a)
    order = np.asarray(order)
    if order.shape != (n,):
        raise ValueError("ordering length does not match the matrix order")
    perm = check_permutation(order, n)
    b, vmap = permute(a, perm)
    parent = etree_of(b)
    structs = column_structures(b, parent)
    counts = np.array([len(s) for s in structs], dtype=np.int64)

    # fundamental supernodes
    nchild = np.zeros(n, dtype=np.int64)
    for j in range(n):
        if parent[j] != ROOT:
            nchild[parent[j]] += 1
    sn_of = np.empty(n, dtype=np.int64)
    sn_cols: list[list[int]] = []
    for j in range(n):
        if (
            j > 0
            and parent[j - 1] == j
            and nchild[j] == 1
            and counts[j - 1] == counts[j] + 1
        ):
            sn_cols[-1].append(j)
        else:
            sn_cols.append([j])
        sn_of[j] = len(sn_cols) - 1
    nsn = len(sn_cols)
    sn_struct = [set(structs[c[-1]].tolist()) for c in sn_cols]
    sn_parent = np.full(nsn, ROOT, dtype=np.int64)
    for s, cols in enumerate(sn_cols):
        pj = parent[cols[-1]]
        if pj != ROOT:
            sn_parent[s] = sn_of[pj]

    # relaxed amalgamation: merge small children into small parents
    alive = [True] * nsn
    target = list(range(nsn))

    def find(s):
        while target[s] != s:
            target[s] = target[target[s]]
            s = target[s]
        return s

    for s in range(nsn):
        ps = sn_parent[s]
        if ps == ROOT:
            continue
        ps = find(ps)
        if len(sn_cols[s]) < nemin and len(sn_cols[ps]) < nemin:
            sn_cols[ps] = sn_cols[s] + sn_cols[ps]
            sn_struct[ps] |= sn_struct[s]
            alive[s] = False
            target[s] = ps
            sn_cols[s] = None
            sn_struct[s] = None

    nodes = [s for s in range(nsn) if alive[s]]
    new_id = {s: k for k, s in enumerate(nodes)}
    node_cols, node_struct, node_entries = [], [], []
    node_parent = np.full(len(nodes), ROOT, dtype=np.int64)
    node_children: list[list[int]] = [[] for _ in nodes]
    bcols = b.col_idx()
    for k, s in enumerate(nodes):
        cols = np.array(sorted(sn_cols[s]), dtype=np.int64)
        colset = set(cols.tolist())
        st = np.array(sorted(sn_struct[s] - colset), dtype=np.int64)
        node_cols.append(cols)
        node_struct.append(st)
        ps = sn_parent[s]
        if ps != ROOT:
            node_parent[k] = new_id[find(ps)]
        ent = np.concatenate(
            [np.arange(b.col_start[c], b.col_start[c + 1]) for c in cols]
        )
        node_entries.append((b.row_idx[ent], bcols[ent], ent))
    for k in range(len(nodes)):
        if node_parent[k] != ROOT:
            node_children[node_parent[k]].append(k)

    return SymbolicFactorization(
        n=n,
        perm=perm,
        parent=parent,
        col_counts=counts,
        pattern=a,
        value_map=vmap,
        permuted=b,
        node_cols=node_cols,
        node_struct=node_struct,
        node_parent=node_parent,
        node_children=node_children,
        node_entries=node_entries,
    )


# ----------------------------------------------------------------------------
# dense frontal kernel


def _swap(F, order, a, b):
    if a == b:
        return
    F[[a, b], :] = F[[b, a], :]
    F[:, [a, b]] = F[:, [b, a]]
    order[[a, b]] = order[[b, a]]


def _threshold_pivot(F, k, nfs, u, ztol):
    """Search the fully summed columns k..nfs-1 for an acceptable pivot.

    Candidates are tried largest diagonal first so that small pivots,
    which carry the most rounding noise, are deferred to the end.
    """
    cand = k + np.argsort(-np.abs(np.diagonal(F)[k:nfs]), kind="stable")
    for j in cand:
        col = np.abs(F[k:, j])
        d = col[j - k]
        col[j - k] = 0.0
        cmax = col.max() if col.size else 0.0
        if d <= ztol and cmax <= ztol:
            return 0, j, -1
        if d > ztol and d >= u * cmax:
            return 1, j, -1
        if nfs - k < 2:
            continue
        r = k + int(np.argmax(col[: nfs - k]))
        if col[r - k] <= ztol:
            continue
        a, b, c = F[j, j], F[r, j], F[r, r]
        det = a * c - b * b
        if det >= 0.0:
            continue
        colr = np.abs(F[k:, r])
        colr[r - k] = 0.0
        colr[j - k] = 0.0
        col[r - k] = 0.0
        gj = col.max()
        gr = colr.max()
        adet = -det
        if abs(c) * gj + abs(b) * gr > adet / u or abs(b) * gj + abs(a) * gr > adet / u:
            continue
        ev = np.abs(np.linalg.eigvalsh(np.array([[a, b], [b, c]])))
        if ev.min() <= ztol:
            continue
        return 2, j, r
    return None


def _bunch_kaufman_pivot(F, k, ztol):
    """Bunch-Kaufman choice on the trailing block; always succeeds."""
    col = np.abs(F[k + 1:, k])
    w1 = col.max() if col.size else 0.0
    a11 = abs(F[k, k])
    if max(a11, w1) <= ztol:
        return 0, k, -1
    if a11 >= BK_ALPHA * w1:
        return 1, k, -1
    r = k + 1 + int(np.argmax(col))
    colr = np.abs(F[k:, r])
    colr[r - k] = 0.0
    wr = colr.max()
    if a11 * wr >= BK_ALPHA * w1 * w1:
        return 1, k, -1
    if abs(F[r, r]) >= BK_ALPHA * wr:
        return 1, r, -1
    return 2, k, r


def _partial_ldl(F, nfs, u, ztol, force):
    """Eliminate as many of the first ``nfs`` variables of front ``F`` as possible.

    ``F`` holds the full symmetric front on entry.  On exit the eliminated
    columns carry L below the diagonal; the candidate block stays fully
    symmetric while the trailing (non fully summed) block is updated once at
    the end.  Returns ``(k, order, blocks)``.
    """
    f = F.shape[0]
    order = np.arange(f)
    blocks = []
    k = 0
    while k < nfs:
        piv = _threshold_pivot(F, k, nfs, u, ztol)
        if piv is None:
            if not force:
                break
            piv = _bunch_kaufman_pivot(F, k, ztol)
        kind, j, r = piv
        if kind == 1 and abs(F[j, j]) <= ztol:
            kind = 0
        if kind == 0:
            _swap(F, order, j, k)
            F[k + 1:, k] = 0.0
            F[k, k + 1:nfs] = 0.0
            F[k, k] = 0.0
            blocks.append((k, 1))
            k += 1
        elif kind == 1:
            _swap(F, order, j, k)
            d = F[k, k]
            col = F[k + 1:, k].copy()
            F[k + 1:, k + 1:nfs] -= np.outer(col, col[: nfs - k - 1]) / d
            F[k + 1:, k] = col / d
            blocks.append((k, 1))
            k += 1
        else:
            _swap(F, order, j, k)
            if r == k:
                r = j
            _swap(F, order, r, k + 1)
            E = F[k:k + 2, k:k + 2].copy()
            C = F[k + 2:, k:k + 2].copy()
            W = C @ np.linalg.inv(E)
            m = nfs - k - 2
            F[k + 2:, k + 2:nfs] -= W @ C[:m].T
            blk = F[k + 2:nfs, k + 2:nfs]
            F[k + 2:nfs, k + 2:nfs] = 0.5 * (blk + blk.T)
            F[k + 2:, k:k + 2] = W
            blocks.append((k, 2))
            k += 2

    # deferred update of the non fully summed block
    if nfs < f and k > 0:
        LR = F[nfs:, :k]
        WR = LR.copy()
        for s, size in blocks:
            if size == 1:
                WR[:, s] *= F[s, s]
            else:
                WR[:, s:s + 2] = LR[:, s:s + 2] @ F[s:s + 2, s:s + 2]
        F[nfs:, nfs:] -= WR @ LR.T
    return k, order, blocks


@dataclass(eq=False)
class _FrontResult:
    elim: np.ndarray  # permuted-space indices eliminated here, in pivot order
    rest: np.ndarray  # permuted-space indices of the remaining rows
    L11: np.ndarray
    L21: np.ndarray
    blocks: list  # (local offset, size, values)
    contrib: np.ndarray | None
    delayed: int


def _local_positions(idx, query):
    srt = np.argsort(idx, kind="stable")
    return srt[np.searchsorted(idx[srt], query)]


def _factor_node(sym, t, bvals, results, u, ztol):
    cols = sym.node_cols[t]
    struct = sym.node_struct[t]
    children = sym.node_children[t]
    delayed = [results[c].rest[: results[c].delayed] for c in children]
    fs = np.concatenate([cols] + delayed) if delayed else cols
    idx = np.concatenate([fs, struct])
    nfs = fs.size
    f = idx.size
    F = np.zeros((f, f))
    rows_g, cols_g, ent = sym.node_entries[t]
    if ent.size:
        lr = _local_positions(idx, rows_g)
        lc = _local_positions(idx, cols_g)
        v = bvals[ent]
        F[lr, lc] = v
        F[lc, lr] = v
    for c in children:
        res = results[c]
        if res.contrib is None or res.contrib.size == 0:
            continue
        p = _local_positions(idx, res.rest)
        F[np.ix_(p, p)] += res.contrib
        res.contrib = None

    force = sym.node_parent[t] == ROOT
    k, order, blocks = _partial_ldl(F, nfs, u, ztol, force)

    L11 = np.tril(F[:k, :k], -1)
    out_blocks = []
    for s, size in blocks:
        if size == 1:
            out_blocks.append((s, 1, np.array([F[s, s]])))
        else:
            L11[s + 1, s] = 0.0
            E = F[s:s + 2, s:s + 2]
            out_blocks.append((s, 2, np.array([E[0, 0], E[1, 0], E[1, 1]])))
    L21 = F[k:, :k].copy()
    rest = idx[order[k:]]
    contrib = None
    if k < f:
        C = np.tril(F[k:, k:])
        contrib = C + np.tril(C, -1).T
    return _FrontResult(
        elim=idx[order[:k]],
        rest=rest,
        L11=L11,
        L21=L21,
        blocks=out_blocks,
        contrib=contrib,
        delayed=nfs - k,
    )


# ----------------------------------------------------------------------------
# numeric factorization


@dataclass(eq=False)
class NumericFactorization:
    """Result of ``factorize``: ``P_eff (S A S) P_eff^T = L D L^T``.

    ``S`` is the diagonal scaling (identity when scaling is off).  The
    factor is immutable once built and may be shared between threads.
    """

    n: int
    effective_perm: np.ndarray
    scaling: np.ndarray
    inertia: Inertia
    delayed_pivots: int
    matrix: SymCsc
    refine: bool
    zero_tol: float
    # D in effective order: diagonal, subdiagonal (2x2 blocks) and block sizes
    d_diag: np.ndarray
    d_sub: np.ndarray
    block_size: np.ndarray  # 1, 2 (first row of a 2x2) or 0 (second row)
    _fronts: list = field(repr=False)  # (offset, k, L11, L21, rest_positions)

    @property
    def d_blocks(self) -> list[np.ndarray]:
        out = []
        for i in np.nonzero(self.block_size)[0]:
            if self.block_size[i] == 1:
                out.append(np.array([[self.d_diag[i]]]))
            else:
                a, b, c = self.d_diag[i], self.d_sub[i], self.d_diag[i + 1]
                out.append(np.array([[a, b], [b, c]]))
        return out

    def lower_factor(self) -> sps.csc_matrix:
        """Unit lower triangular L (diagonal stored explicitly)."""
        rows, cols, vals = [np.arange(self.n)], [np.arange(self.n)], [np.ones(self.n)]
        for off, k, L11, L21, rpos in self._fronts:
            if k == 0:
                continue
            r, c = np.nonzero(L11)
            rows.append(off + r)
            cols.append(off + c)
            vals.append(L11[r, c])
            r, c = np.nonzero(L21)
            rows.append(rpos[r])
            cols.append(off + c)
            vals.append(L21[r, c])
        return sps.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n, self.n),
        )

    def block_diagonal(self) -> sps.csc_matrix:
        n = self.n
        sub = np.where(self.block_size[:-1] == 2, self.d_sub[:-1], 0.0) if n > 1 else np.zeros(0)
        return sps.diags([sub, self.d_diag, sub], [-1, 0, 1], shape=(n, n), format="csc")

    def scaled_matrix(self) -> np.ndarray:
        """Dense ``P_eff (S A S) P_eff^T``."""
        s = self.scaling
        a = self.matrix.to_dense() * s[:, None] * s[None, :]
        p = self.effective_perm
        return a[np.ix_(p, p)]

    def reconstruct(self) -> np.ndarray:
        """Dense ``P_eff A P_eff^T`` rebuilt from the factors."""
        L = self.lower_factor().toarray()
        ldl = L @ self.block_diagonal().toarray() @ L.T
        sp = self.scaling[self.effective_perm]
        return ldl / sp[:, None] / sp[None, :]

    def growth(self) -> float:
        """max(|L||D||L|^T) relative to the largest scaled entry (at least 1)."""
        L = abs(self.lower_factor().toarray())
        D = abs(self.block_diagonal().toarray())
        s = self.scaling
        amax = np.abs(self.matrix.values * s[self.matrix.row_idx] * s[self.matrix.col_idx()])
        amax = amax.max() if amax.size else 0.0
        if amax == 0.0:
            return 1.0
        return max(1.0, float((L @ D @ L.T).max()) / amax)

    def _zero_block(self, i) -> bool:
        return self.block_size[i] == 1 and abs(self.d_diag[i]) <= self.zero_tol

    def _solve_vec(self, b: np.ndarray) -> np.ndarray:
        p = self.effective_perm
        sp = self.scaling[p]
        y = b[p] * sp
        for off, k, L11, L21, rpos in self._fronts:
            if k == 0:
                continue
            v = sla.solve_triangular(L11, y[off:off + k], lower=True, unit_diagonal=True)
            y[off:off + k] = v
            if rpos.size:
                y[rpos] -= L21 @ v
        z = np.empty_like(y)
        one = self.block_size == 1
        zero = one & (np.abs(self.d_diag) <= self.zero_tol)
        if np.any(y[zero] != 0.0):
            raise SingularFactorError("zero pivot with nonzero right-hand side")
        ok = one & ~zero
        z[ok] = y[ok] / self.d_diag[ok]
        z[zero] = 0.0
        i2 = np.nonzero(self.block_size == 2)[0]
        if i2.size:
            a, bb, c = self.d_diag[i2], self.d_sub[i2], self.d_diag[i2 + 1]
            det = a * c - bb * bb
            y1, y2 = y[i2], y[i2 + 1]
            z[i2] = (c * y1 - bb * y2) / det
            z[i2 + 1] = (a * y2 - bb * y1) / det
        for off, k, L11, L21, rpos in reversed(self._fronts):
            if k == 0:
                continue
            v = z[off:off + k]
            if rpos.size:
                v = v - L21.T @ z[rpos]
            z[off:off + k] = sla.solve_triangular(
                L11, v, lower=True, trans="T", unit_diagonal=True
            )
        x = np.empty_like(z)
        x[p] = z * sp
        return x

    def solve(self, b) -> np.ndarray:
        """Solve ``A x = b`` for one vector or a block of right-hand sides.

        Each column is processed independently so a block solve agrees
        bitwise with column-by-column solves.
        """
        return _solve_columns(self, b)


def _solve_columns(fact, b):
    b = np.asarray(b, dtype=float)
    if b.shape[0] != fact.n:
        raise ValueError("right-hand side has the wrong number of rows")
    if b.ndim == 1:
        return _refined(fact, b.copy())
    out = np.empty_like(b)
    for j in range(b.shape[1]):
        out[:, j] = _refined(fact, np.ascontiguousarray(b[:, j]))
    return out


def _refined(fact, b):
    x = fact._solve_vec(b.copy())
    if fact.refine:
        r = b - fact.matrix.matvec(x)
        x = x + fact._solve_vec(r)
    return x


def _inertia_from_blocks(d_diag, d_sub, block_size, ztol) -> Inertia:
    pos = neg = zero = 0
    for i in np.nonzero(block_size)[0]:
        if block_size[i] == 1:
            d = d_diag[i]
            if abs(d) <= ztol:
                zero += 1
            elif d > 0:
                pos += 1
            else:
                neg += 1
        else:
            E = np.array([[d_diag[i], d_sub[i]], [d_sub[i], d_diag[i + 1]]])
            for ev in np.linalg.eigvalsh(E):
                if abs(ev) <= ztol:
                    zero += 1
                elif ev > 0:
                    pos += 1
                else:
                    neg += 1
    return Inertia(pos, neg, zero)


def factorize(
    sym: SymbolicFactorization,
    a: SymCsc,
    opts: PivotOptions = PivotOptions(),
    workers: int | None = None,
) -> NumericFactorization:
    """Numeric multifrontal factorization of ``a`` (pattern must match ``sym``)."""
    if not a.same_pattern(sym.pattern):
        raise ValueError("matrix pattern differs from the analyzed pattern")
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ValueError("workers must be positive")
    n = a.n
    s = max_scaling(a) if opts.scale else np.ones(n)
    svals = a.values * s[a.row_idx] * s[a.col_idx()]
    amax = float(np.abs(svals).max()) if svals.size else 0.0
    ztol = opts.zero_pivot_tol * amax
    bvals = svals[sym.value_map]
    u = opts.threshold

    nn = sym.n_nodes
    results: list = [None] * nn
    if workers == 1 or nn < 2:
        for t in range(nn):
            results[t] = _factor_node(sym, t, bvals, results, u, ztol)
    else:
        # level schedule: a node's children always sit on earlier levels
        level = np.zeros(nn, dtype=np.int64)
        for t in range(nn):
            for c in sym.node_children[t]:
                level[t] = max(level[t], level[c] + 1)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for lev in range(int(level.max()) + 1 if nn else 0):
                batch = np.nonzero(level == lev)[0].tolist()
                done = pool.map(
                    lambda t: _factor_node(sym, t, bvals, results, u, ztol), batch
                )
                for t, res in zip(batch, done):
                    results[t] = res

    # effective order: pivots in node order
    eff_space = np.concatenate([r.elim for r in results]) if nn else np.zeros(0, int)
    position = np.empty(n, dtype=np.int64)
    position[eff_space] = np.arange(n)
    d_diag = np.zeros(n)
    d_sub = np.zeros(n)
    block_size = np.zeros(n, dtype=np.int64)
    fronts = []
    off = 0
    delayed = 0
    for r in results:
        k = r.elim.size
        for s_loc, size, vals in r.blocks:
            g = off + s_loc
            block_size[g] = size
            if size == 1:
                d_diag[g] = vals[0]
            else:
                d_diag[g], d_sub[g], d_diag[g + 1] = vals
        fronts.append((off, k, r.L11, r.L21, position[r.rest]))
        off += k
        delayed += r.delayed
    return NumericFactorization(
        n=n,
        effective_perm=sym.perm[eff_space],
        scaling=s,
        inertia=_inertia_from_blocks(d_diag, d_sub, block_size, ztol),
        delayed_pivots=delayed,
        matrix=a,
        refine=opts.refine,
        zero_tol=ztol,
        d_diag=d_diag,
        d_sub=d_sub,
        block_size=block_size,
        _fronts=fronts,
    )


def solve(fact, b) -> np.ndarray:
    return fact.solve(b)


def inertia(fact) -> Inertia:
    return fact.inertia


# ----------------------------------------------------------------------------
# dense backend


@dataclass(eq=False)
class DenseFactorization:
    """Bunch-Kaufman ``P A P^T = L D L^T`` of a dense matrix (LAPACK sytrf)."""

    n: int
    effective_perm: np.ndarray
    scaling: np.ndarray
    inertia: Inertia
    matrix: SymCsc | None
    dense: np.ndarray
    refine: bool
    zero_tol: float
    L: np.ndarray
    d_diag: np.ndarray
    d_sub: np.ndarray
    block_size: np.ndarray
    delayed_pivots: int = 0

    def block_diagonal(self) -> np.ndarray:
        D = np.diag(self.d_diag)
        i2 = np.nonzero(self.block_size == 2)[0]
        D[i2 + 1, i2] = D[i2, i2 + 1] = self.d_sub[i2]
        return D

    def reconstruct(self) -> np.ndarray:
        sp = self.scaling[self.effective_perm]
        return (self.L @ self.block_diagonal() @ self.L.T) / sp[:, None] / sp[None, :]

    def _solve_vec(self, b):
        p = self.effective_perm
        sp = self.scaling[p]
        y = sla.solve_triangular(self.L, b[p] * sp, lower=True, unit_diagonal=True)
        z = np.empty_like(y)
        one = self.block_size == 1
        zero = one & (np.abs(self.d_diag) <= self.zero_tol)
        if np.any(y[zero] != 0.0):
            raise SingularFactorError("zero pivot with nonzero right-hand side")
        ok = one & ~zero
        z[ok] = y[ok] / self.d_diag[ok]
        z[zero] = 0.0
        i2 = np.nonzero(self.block_size == 2)[0]
        if i2.size:
            a, bb, c = self.d_diag[i2], self.d_sub[i2], self.d_diag[i2 + 1]
            det = a * c - bb * bb
            z[i2] = (c * y[i2] - bb * y[i2 + 1]) / det
            z[i2 + 1] = (a * y[i2 + 1] - bb * y[i2]) / det
        w = sla.solve_triangular(self.L, z, lower=True, trans="T", unit_diagonal=True)
        x = np.empty_like(w)
        x[p] = w * sp
        return x

    def solve(self, b):
        return _solve_columns(self, b)


class _DenseMatvec:
    def __init__(self, a):
        self.a = a

    def matvec(self, x):
        return self.a @ x


def dense_factorize(a, opts: PivotOptions = PivotOptions(), limit: int = 2000) -> DenseFactorization:
    """Dense Bunch-Kaufman factorization with the same contract as ``factorize``."""
    if isinstance(a, SymCsc):
        src = a
        a = a.to_dense()
    else:
        a = np.asarray(a, dtype=float)
        src = None
    n = a.shape[0]
    if n > limit:
        raise DenseLimitError(f"dense backend limited to order {limit}, got {n}")
    if n == 0:
        raise ValueError("empty matrix")
    if opts.scale:
        m = np.abs(a).max(axis=0)
        s = np.where(m > 0, 1.0 / np.sqrt(np.where(m > 0, m, 1.0)), 1.0)
    else:
        s = np.ones(n)
    sa = a * s[:, None] * s[None, :]
    ztol = opts.zero_pivot_tol * float(np.abs(sa).max())
    lu, d, perm = sla.ldl(sa, lower=True, hermitian=False)
    L = lu[perm]
    d_diag = np.diag(d).copy()
    d_sub = np.zeros(n)
    block_size = np.ones(n, dtype=np.int64)
    i = 0
    while i < n - 1:
        if d[i + 1, i] != 0.0:
            d_sub[i] = d[i + 1, i]
            block_size[i] = 2
            block_size[i + 1] = 0
            i += 2
        else:
            i += 1
    fact = DenseFactorization(
        n=n,
        effective_perm=np.asarray(perm, dtype=np.int64),
        scaling=s,
        inertia=_inertia_from_blocks(d_diag, d_sub, block_size, ztol),
        matrix=src,
        dense=a,
        refine=opts.refine,
        zero_tol=ztol,
        L=L,
        d_diag=d_diag,
        d_sub=d_sub,
        block_size=block_size,
    )
    fact.matrix = _DenseMatvec(a)
    return fact


# ----------------------------------------------------------------------------
# backends sharing one contract


class SparseLdlBackend:
    """analyze / factorize / solve / inertia over the multifrontal kernel."""

    name = "sparse"

    def __init__(self, opts: PivotOptions = PivotOptions(), workers: int | None = None,
                 ordering: str = "matched"):
        self.opts = opts
        self.workers = workers
        self.ordering = ordering

    def analyze(self, a: SymCsc) -> SymbolicFactorization:
        return analyze(a, fill_reducing_order(a, self.ordering), nemin=self.opts.nemin)

    def factorize(self, sym, a: SymCsc) -> NumericFactorization:
        return factorize(sym, a, self.opts, self.workers)

    def solve(self, fact, b):
        return fact.solve(b)

    def inertia(self, fact) -> Inertia:
        return fact.inertia


class DenseLdlBackend:
    name = "dense"

    def __init__(self, opts: PivotOptions = PivotOptions(), limit: int = 2000):
        self.opts = opts
        self.limit = limit

    def analyze(self, a: SymCsc):
        if a.n > self.limit:
            raise DenseLimitError(f"dense backend limited to order {self.limit}, got {a.n}")
        return a

    def factorize(self, sym, a: SymCsc) -> DenseFactorization:
        return dense_factorize(a, self.opts, self.limit)

    def solve(self, fact, b):
        return fact.solve(b)

    def inertia(self, fact) -> Inertia:
        return fact.inertia


def make_backend(name: str, workers: int | None = None, opts: PivotOptions = PivotOptions()):
    if name == "sparse":
        return SparseLdlBackend(opts, workers=workers)
    if name == "dense":
        return DenseLdlBackend(opts)
    raise ValueError(f"unknown backend {name!r}")

"""Scalable elliptic control problems on uniform grids, plus a tiny analytic catalog.

All grid families use the unit square or cube with mesh width
``h = 1 / (N + 1)`` and interior nodes ``1..N`` in each direction.  Out-of-grid
neighbors of the 5- or 7-point stencil are resolved to one variable per
boundary face node (corners never appear), which is where boundary controls
or boundary states live.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sps

from .nlp import FunctionNlp, NlpProblem

ALPHA = 0.01
Y_UPPER = 3.2
U_BOUNDS = (1.8, 2.5)
SOURCE_3D = 20.0
SOURCE_2D = 15.0
DIST_SOURCE = 4.0
DIST_Y_BOUNDS = (0.0, 10.0)
DIST_U_BOUNDS = (0.1, 10.0)
DIST_ALPHA = ALPHA


@dataclass
class GeneratedNlp:
    """A problem instance with structural counts measured from its patterns."""

    problem: NlpProblem
    kind: str
    N: int
    n_vars: int
    n_cons: int
    jac_nnz: int
    hess_nnz: int
    bounds_both: int
    bounds_lower: int
    bounds_upper: int
    bounds_free: int
    name: str = ""
    f_star: float | None = None
    x_star: np.ndarray | None = None
    expected_status: str = "Optimal"
    extra: dict = field(default_factory=dict)

    @classmethod
    def measure(cls, problem: NlpProblem, kind: str, N: int, **kw) -> "GeneratedNlp":
        jr, jc = problem.jacobian_structure()
        hr, hc = problem.hessian_structure()
        lo = np.isfinite(problem.x_l)
        up = np.isfinite(problem.x_u)
        return cls(
            problem=problem,
            kind=kind,
            N=N,
            n_vars=problem.n,
            n_cons=problem.m,
            jac_nnz=_count_unique(jr, jc, problem.n),
            hess_nnz=_count_unique(hr, hc, problem.n),
            bounds_both=int(np.count_nonzero(lo & up)),
            bounds_lower=int(np.count_nonzero(lo & ~up)),
            bounds_upper=int(np.count_nonzero(~lo & up)),
            bounds_free=int(np.count_nonzero(~lo & ~up)),
            name=kw.pop("name", f"{kind}_N{N}"),
            **kw,
        )

    def census(self) -> dict:
        return {
            "kind": self.kind,
            "N": self.N,
            "n_vars": self.n_vars,
            "n_cons": self.n_cons,
            "jac_nnz": self.jac_nnz,
            "hess_nnz": self.hess_nnz,
            "bounds_both": self.bounds_both,
            "bounds_lower": self.bounds_lower,
            "bounds_upper": self.bounds_upper,
            "bounds_free": self.bounds_free,
        }


def _count_unique(r, c, n) -> int:
    key = np.asarray(r, dtype=np.int64) * max(n, 1) + np.asarray(c, dtype=np.int64)
    return int(np.unique(key).size)


def write_manifest(gen: GeneratedNlp, path) -> Path:
    """Plain ``key: value`` lines describing an instance."""
    path = Path(path)
    lines = [f"name: {gen.name}"] + [f"{k}: {v}" for k, v in gen.census().items()]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_manifest(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if ":" in line:
            k, v = line.split(":", 1)
            v = v.strip()
            out[k.strip()] = int(v) if v.lstrip("-").isdigit() else v
    return out


class GridNlp(NlpProblem):
    """Quadratic tracking objective, linear constraints plus optional bilinear terms.

    ``g(x) = A x + b * x[bil_y] * x[bil_u] - rhs`` where the bilinear part
    touches one (y, u) pair per listed row.
    """

    def __init__(self, n, jac_rows, jac_cols, jac_vals, rhs, weights, target,
                 x_l, x_u, x0, bil_rows=None, bil_y=None, bil_u=None, bil_coef=0.0):
        self.n = n
        self.m = rhs.size
        self.x_l, self.x_u, self.x0 = x_l, x_u, x0
        self.g_l = np.zeros(self.m)
        self.g_u = np.zeros(self.m)
        self._rhs = rhs
        self._w = weights
        self._t = target
        self._jr = jac_rows
        self._jc = jac_cols
        self._jv = jac_vals
        self._a = sps.csr_matrix((jac_vals, (jac_rows, jac_cols)), shape=(self.m, n))
        empty = np.zeros(0, dtype=np.int64)
        self._br = empty if bil_rows is None else bil_rows
        self._by = empty if bil_y is None else bil_y
        self._bu = empty if bil_u is None else bil_u
        self._bc = bil_coef
        if self._br.size:
            key = jac_rows * n + jac_cols
            order = np.argsort(key, kind="stable")
            self._pos_y = order[np.searchsorted(key, self._br * n + self._by, sorter=order)]
            self._pos_u = order[np.searchsorted(key, self._br * n + self._bu, sorter=order)]
        diag = np.nonzero(weights)[0]
        self._hdiag = diag
        self._hr = np.concatenate([diag, self._bu])
        self._hc = np.concatenate([diag, self._by])

    def objective(self, x):
        r = x - self._t
        return 0.5 * float(np.dot(self._w * r, r))

    def gradient(self, x):
        return self._w * (x - self._t)

    def constraints(self, x):
        g = self._a @ x - self._rhs
        if self._br.size:
            g[self._br] += self._bc * x[self._by] * x[self._bu]
        return g

    def jacobian_structure(self):
        return self._jr, self._jc

    def jacobian(self, x):
        v = self._jv.copy()
        if self._br.size:
            v[self._pos_y] += self._bc * x[self._bu]
            v[self._pos_u] += self._bc * x[self._by]
        return v

    def hessian_structure(self):
        return self._hr, self._hc

    def hessian(self, x, y, obj_factor=1.0):
        return np.concatenate([obj_factor * self._w[self._hdiag], self._bc * y[self._br]])


def _check_n(N):
    if int(N) != N or N < 1:
        raise ValueError(f"grid dimension must be a positive integer, got {N!r}")
    return int(N)


def _stencil(N: int, dim: int):
    """Off-diagonal stencil couplings of the interior grid.

    Returns ``(rows, cols)`` where rows are interior node ids and cols are
    either interior ids (``< N**dim``) or face ids ``N**dim + f * N**(dim-1) + l``
    for out-of-grid neighbors on face ``f = 2 * axis + side``.
    """
    n_int = N ** dim
    coords = np.indices((N,) * dim).reshape(dim, -1)
    ids = np.arange(n_int)
    strides = N ** np.arange(dim - 1, -1, -1)
    rows, cols = [], []
    for axis in range(dim):
        others = [a for a in range(dim) if a != axis]
        local = np.zeros(n_int, dtype=np.int64)
        for a in others:
            local = local * N + coords[a]
        for side, step in ((0, -1), (1, 1)):
            nb = coords[axis] + step
            inside = (nb >= 0) & (nb < N)
            col = np.where(
                inside,
                ids + step * strides[axis],
                n_int + (2 * axis + side) * N ** (dim - 1) + local,
            )
            rows.append(ids)
            cols.append(col)
    order = np.lexsort((np.concatenate(cols), np.concatenate(rows)))
    return np.concatenate(rows)[order], np.concatenate(cols)[order]


def _node_coords(N: int, dim: int) -> np.ndarray:
    h = 1.0 / (N + 1)
    return (np.indices((N,) * dim).reshape(dim, -1) + 1) * h


def _boundary_control(N: int, dim: int, source: float) -> GridNlp:
    h = 1.0 / (N + 1)
    n_int = N ** dim
    n_ctl = 2 * dim * N ** (dim - 1)
    n = n_int + n_ctl
    nr, nc = _stencil(N, dim)
    ids = np.arange(n_int)
    rows = np.concatenate([ids, nr])
    cols = np.concatenate([ids, nc])
    vals = np.concatenate([np.full(n_int, 2.0 * dim), -np.ones(nr.size)])
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    rhs = np.full(n_int, h * h * source)

    y_d = 3.0 + 5.0 * np.prod(_node_coords(N, dim), axis=0)
    weights = np.concatenate([np.full(n_int, h ** dim), np.full(n_ctl, ALPHA * h ** (dim - 1))])
    target = np.concatenate([y_d, np.zeros(n_ctl)])
    x_l = np.concatenate([np.full(n_int, -np.inf), np.full(n_ctl, U_BOUNDS[0])])
    x_u = np.concatenate([np.full(n_int, Y_UPPER), np.full(n_ctl, U_BOUNDS[1])])
    x0 = np.zeros(n)
    return GridNlp(n, rows, cols, vals, rhs, weights, target, x_l, x_u, x0)


def gen_boundary_control_3d(N: int) -> GeneratedNlp:
    """States on the N^3 interior grid, one control per boundary face node."""
    N = _check_n(N)
    return GeneratedNlp.measure(_boundary_control(N, 3, SOURCE_3D), "bc3d", N)


def gen_boundary_control_2d(N: int) -> GeneratedNlp:
    """Two-dimensional analogue of :func:`gen_boundary_control_3d`."""
    N = _check_n(N)
    return GeneratedNlp.measure(_boundary_control(N, 2, SOURCE_2D), "bc2d", N)


def gen_dist_control_2d(N: int) -> GeneratedNlp:
    """Distributed bilinear control with Neumann boundary rows.

    Variables are ordered interior states, boundary states, then controls::

        4 y_p - sum(neighbors) + h^2 (y_p u_p - d) = 0    interior nodes
        y_b - y_adjacent = 0                               boundary nodes
    """
    N = _check_n(N)
    h = 1.0 / (N + 1)
    n_int = N * N
    n_bnd = 4 * N
    n = 2 * n_int + n_bnd
    nr, nc = _stencil(N, 2)
    ids = np.arange(n_int)
    u_ids = n_int + n_bnd + ids

    # interior rows: diagonal, neighbors, control
    r_in = np.concatenate([ids, nr, ids])
    c_in = np.concatenate([ids, nc, u_ids])
    v_in = np.concatenate([np.full(n_int, 4.0), -np.ones(nr.size), np.zeros(n_int)])

    # boundary rows: y_b - y_adjacent
    out = nc >= n_int
    b_var = nc[out]
    b_row = n_int + (b_var - n_int)
    r_b = np.concatenate([b_row, b_row])
    c_b = np.concatenate([b_var, nr[out]])
    v_b = np.concatenate([np.ones(b_var.size), -np.ones(b_var.size)])

    rows = np.concatenate([r_in, r_b])
    cols = np.concatenate([c_in, c_b])
    vals = np.concatenate([v_in, v_b])
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    rhs = np.concatenate([np.full(n_int, h * h * DIST_SOURCE), np.zeros(n_bnd)])

    x1, x2 = _node_coords(N, 2)
    y_d = 2.0 + x1 * x2
    weights = np.concatenate([np.full(n_int, h * h), np.zeros(n_bnd), np.full(n_int, DIST_ALPHA * h * h)])
    target = np.concatenate([y_d, np.zeros(n_bnd + n_int)])
    x_l = np.concatenate([np.full(n_int + n_bnd, DIST_Y_BOUNDS[0]), np.full(n_int, DIST_U_BOUNDS[0])])
    x_u = np.concatenate([np.full(n_int + n_bnd, DIST_Y_BOUNDS[1]), np.full(n_int, DIST_U_BOUNDS[1])])
    x0 = np.ones(n)
    p = GridNlp(n, rows, cols, vals, rhs, weights, target, x_l, x_u, x0,
                bil_rows=ids, bil_y=ids, bil_u=u_ids, bil_coef=h * h)
    return GeneratedNlp.measure(p, "dist2d", N)


GENERATORS = {
    "bc2d": gen_boundary_control_2d,
    "bc3d": gen_boundary_control_3d,
    "dist2d": gen_dist_control_2d,
}


def generate(kind: str, N: int) -> GeneratedNlp:
    try:
        gen = GENERATORS[kind]
    except KeyError:
        raise ValueError(f"unknown problem kind {kind!r}; choose from {sorted(GENERATORS)}") from None
    return gen(N)


def analytic_suite() -> list[GeneratedNlp]:
    """Small problems with closed-form solutions (or a known failure status)."""
    zero1 = lambda x: np.zeros((1, 1))  # noqa: E731
    zero2 = lambda x: np.zeros((2, 2))  # noqa: E731
    ones2 = lambda x: np.ones(2)  # noqa: E731

    a = FunctionNlp(1, lambda x: x[0], lambda x: np.ones(1), zero1, [0.0], x_l=[1.0])
    b = FunctionNlp(1, lambda x: 0.5 * (x[0] - 2.0) ** 2, lambda x: x - 2.0,
                    lambda x: np.eye(1), [0.0], x_l=[0.0], x_u=[10.0])
    c = FunctionNlp(
        2, lambda x: x[0] + x[1], ones2, zero2, [2.0, 2.0], x_l=[0.0, 0.0],
        g=lambda x: np.array([x[0] * x[1]]),
        jac=lambda x: np.array([x[1], x[0]]),
        hess_g=lambda x, y: y[0] * np.array([[0.0, 1.0], [1.0, 0.0]]),
        g_l=[1.0], g_u=[1.0], m=1,
    )
    d = FunctionNlp(
        2, lambda x: x[0] + x[1], ones2, zero2, [0.0, 0.0],
        g=lambda x: np.array([x[0] - 1.0, x[1] - 1.0, x[0] + x[1] - 2.0]),
        jac=lambda x: np.array([1.0, 0.0, 0.0, 1.0, 1.0, 1.0]),
        hess_g=lambda x, y: np.zeros((2, 2)),
        g_l=np.zeros(3), g_u=np.zeros(3), m=3,
    )
    return [
        GeneratedNlp.measure(a, "analytic", 1, name="analytic_a", f_star=1.0, x_star=np.array([1.0])),
        GeneratedNlp.measure(b, "analytic", 1, name="analytic_b", f_star=0.0, x_star=np.array([2.0])),
        GeneratedNlp.measure(c, "analytic", 2, name="analytic_c", f_star=2.0, x_star=np.array([1.0, 1.0])),
        GeneratedNlp.measure(d, "analytic", 2, name="analytic_d",
                             expected_status="DegreesOfFreedomError"),
    ]

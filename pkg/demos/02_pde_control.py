"""Solve boundary and distributed control problems on a grid.

Each instance discretizes an elliptic state equation with a 5- or 7-point
stencil, tracks a target state and penalizes the controls.  The barrier
method solves it through the sparse backend; small instances are also
solved through the dense LAPACK backend as a cross-check.

Run with ``python demos/02_pde_control.py [N]`` (default N = 16).
"""
import sys

from ipbench import DenseLdlBackend, SparseLdlBackend, generate, solve
from ipbench.ipm import slack_transform

N = int(sys.argv[1]) if len(sys.argv) > 1 else 16

for kind in ("bc2d", "dist2d", "bc3d"):
    size = max(2, N // 4) if kind == "bc3d" else N
    g = generate(kind, size)
    c = g.census()
    print(f"{g.name}: {c['n_vars']} variables, {c['n_cons']} equalities, "
          f"{c['jac_nnz']} Jacobian entries, {c['bounds_both']} doubly bounded")

    res = solve(g.problem, SparseLdlBackend())
    t = res.timing
    print(f"  sparse  {res.status.value:<10} {res.iterations:3d} iterations  f = {res.objective:.10f}"
          f"  {t['total']:.2f}s ({t['linear']:.2f}s linear algebra)")
    print(f"          inertia corrections {res.inertia_corrections}, "
          f"largest delta_w {max(res.delta_w_history, default=0.0):g}")

    sf = slack_transform(g.problem)
    if sf.n_aug + sf.m <= 2000:
        dense = solve(g.problem, DenseLdlBackend())
        print(f"  dense   {dense.status.value:<10} {dense.iterations:3d} iterations  f = {dense.objective:.10f}"
              f"  |difference| {abs(dense.objective - res.objective):.1e}")
    else:
        print(f"  dense   skipped (KKT order {sf.n_aug + sf.m} > 2000)")

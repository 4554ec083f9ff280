"""Factor a saddle-point matrix and read its inertia off the block diagonal.

A KKT matrix ``[[H, J^T], [J, 0]]`` with ``H`` positive definite on the
null space of a full-rank ``J`` has exactly ``n`` positive and ``m`` negative
eigenvalues.  The multifrontal LDL^T factorization reports the same counts
from its 1x1 and 2x2 pivots, without computing any eigenvalues.

Run with ``python demos/01_inertia.py``.
"""
import numpy as np

from ipbench import SparseLdlBackend, SymCsc, analyze, factorize
from ipbench.ldl import RANK_REVEALING

rng = np.random.default_rng(0)
n, m = 12, 4

# A sparse Hessian and Jacobian.  The zero (2,2) block has no usable diagonal; the
# matched ordering places each constraint row right after a coupled variable, so
# pivoting rarely has to delay a column.
H = np.diag(rng.uniform(1.0, 3.0, n)) + np.diag(rng.uniform(-0.5, 0.5, n - 1), 1)
H = np.triu(H) + np.triu(H, 1).T
J = np.zeros((m, n))
for i in range(m):
    J[i, rng.choice(n, 3, replace=False)] = rng.standard_normal(3)
K = np.block([[H, J.T], [J, np.zeros((m, m))]])

a = SymCsc.from_dense(K)
sym = analyze(a, nemin=2)  # small fronts so the assembly tree is visible
fact = factorize(sym, a)
ev = np.linalg.eigvalsh(K)

print(f"matrix order {a.n}, stored lower entries {a.nnz}")
print(f"assembly tree nodes {sym.n_nodes}, factor entries {sym.factor_nnz}")
print(f"inertia from LDL^T      {tuple(fact.inertia)}")
print(f"inertia from eigvalsh   ({(ev > 0).sum()}, {(ev < 0).sum()}, 0)")
print(f"2x2 pivots {int((fact.block_size == 2).sum())}, delayed pivots {fact.delayed_pivots}")

p = fact.effective_perm
err = np.abs(K[np.ix_(p, p)] - fact.reconstruct()).max()
print(f"max |P K P^T - L D L^T| = {err:.2e}  (growth {fact.growth():.2f})")

b = rng.standard_normal(a.n)
x = SparseLdlBackend().solve(fact, b)
print(f"solve residual {np.abs(K @ x - b).max():.2e}")

# Duplicate a Jacobian row: the matrix becomes singular with one zero eigenvalue.
J2 = np.vstack([J, J[:1]])
K2 = np.block([[H, J2.T], [J2, np.zeros((m + 1, m + 1))]])
a2 = SymCsc.from_dense(K2)
f2 = factorize(analyze(a2), a2, RANK_REVEALING)
print(f"\nwith a repeated constraint row: inertia {tuple(f2.inertia)}")

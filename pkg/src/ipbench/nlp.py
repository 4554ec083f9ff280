"""Problem interface for the interior-point solver.

A problem has the form

    minimize f(x)  subject to  g_L <= g(x) <= g_U,  x_L <= x <= x_U

with sparse first and second derivatives.  The Hessian callback returns the
lower triangle of ``obj_factor * grad^2 f + sum_j y_j grad^2 g_j``.
"""
from __future__ import annotations

from typing import Callable

import numpy as np


class NlpProblem:
    """Base class; subclasses fill in the bounds and override the evaluators."""

    n: int
    m: int
    x_l: np.ndarray
    x_u: np.ndarray
    g_l: np.ndarray
    g_u: np.ndarray
    x0: np.ndarray

    def objective(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def constraints(self, x) -> np.ndarray:
        raise NotImplementedError

    def jacobian_structure(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def jacobian(self, x) -> np.ndarray:
        raise NotImplementedError

    def hessian_structure(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def hessian(self, x, y, obj_factor: float = 1.0) -> np.ndarray:
        raise NotImplementedError

    def validate(self) -> None:
        if np.any(self.x_l > self.x_u):
            raise ValueError("variable lower bound exceeds upper bound")
        if np.any(self.g_l > self.g_u):
            raise ValueError("constraint lower bound exceeds upper bound")
        r, c = self.hessian_structure()
        if np.any(np.asarray(r) < np.asarray(c)):
            raise ValueError("Hessian structure must be lower triangular")


class FunctionNlp(NlpProblem):
    """Problem assembled from plain callables, convenient for small models.

    The Jacobian and Hessian callables return values aligned with the given
    structures; dense structures are used when none are supplied.
    """

    def __init__(
        self,
        n: int,
        f: Callable,
        grad: Callable,
        hess_f: Callable,
        x0,
        x_l=None,
        x_u=None,
        g: Callable | None = None,
        jac: Callable | None = None,
        hess_g: Callable | None = None,
        g_l=None,
        g_u=None,
        m: int = 0,
    ):
        self.n = n
        self.m = m
        self._f, self._grad, self._hess_f = f, grad, hess_f
        self._g, self._jac, self._hess_g = g, jac, hess_g
        self.x0 = np.asarray(x0, dtype=float)
        self.x_l = np.full(n, -np.inf) if x_l is None else np.asarray(x_l, dtype=float)
        self.x_u = np.full(n, np.inf) if x_u is None else np.asarray(x_u, dtype=float)
        self.g_l = np.zeros(m) if g_l is None else np.asarray(g_l, dtype=float)
        self.g_u = np.zeros(m) if g_u is None else np.asarray(g_u, dtype=float)
        self._jr, self._jc = np.divmod(np.arange(m * n), n)
        self._hr, self._hc = np.tril_indices(n)

    def objective(self, x):
        return float(self._f(x))

    def gradient(self, x):
        return np.asarray(self._grad(x), dtype=float)

    def constraints(self, x):
        if self.m == 0:
            return np.zeros(0)
        return np.asarray(self._g(x), dtype=float)

    def jacobian_structure(self):
        return self._jr, self._jc

    def jacobian(self, x):
        if self.m == 0:
            return np.zeros(0)
        return np.asarray(self._jac(x), dtype=float).reshape(-1)

    def hessian_structure(self):
        return self._hr, self._hc

    def hessian(self, x, y, obj_factor=1.0):
        h = obj_factor * np.asarray(self._hess_f(x), dtype=float)
        if self.m:
            h = h + np.asarray(self._hess_g(x, y), dtype=float)
        return h[self._hr, self._hc]

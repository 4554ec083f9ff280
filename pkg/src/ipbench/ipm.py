"""Primal-dual barrier interior-point method for sparse nonlinear programs.

Inequality rows get slacks so every constraint becomes an equality
``c(w) = 0`` over the augmented variables ``w = (x, s)``.  Each iteration
solves the reduced symmetric Newton system

    [ W + Sigma + dw I   J^T  ] [dw]     [ grad phi + J^T y ]
    [ J                 -dc I ] [dy] = - [ c(w)             ]

with the regularization (dw, dc) raised until the matrix has exactly
``n_aug`` positive and ``m`` negative eigenvalues.  Bound multipliers are
recovered from the primal step, step lengths obey the fraction-to-the-boundary
rule, and a backtracking search with a short (theta, phi) memory accepts
trial points.
"""
from __future__ import annotations

import logging
import time
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .ldl import DenseLimitError, Inertia, PivotOptions, SingularFactorError, SparseLdlBackend
from .nlp import NlpProblem
from .sparse import SymCsc, SymTriplet, from_triplets

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps


class Status(str, Enum):
    OPTIMAL = "Optimal"
    ACCEPTABLE = "Acceptable"
    ITERATION_LIMIT = "IterationLimit"
    TIME_LIMIT = "TimeLimit"
    DEGREES_OF_FREEDOM = "DegreesOfFreedomError"
    LINEAR_SOLVE_ERROR = "LinearSolveError"
    DIVERGED = "Diverged"

    @property
    def solved(self) -> bool:
        return self in (Status.OPTIMAL, Status.ACCEPTABLE)

    def __str__(self):
        return self.value


class DegreesOfFreedomError(ValueError):
    """More equality constraints than free variables."""


class LinearSolveFailure(RuntimeError):
    """Inertia correction gave up (regularization above its cap)."""


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    acceptable_tol: float = 1e-8
    max_iter: int = 9999
    time_limit: float = 14400.0
    mu0: float = 0.1
    kappa_mu: float = 0.2
    theta_mu: float = 1.5
    kappa_eps: float = 10.0
    tau_min: float = 0.99
    delta_w0: float = 1e-4
    delta_w_growth: float = 8.0
    delta_w_first_growth: float = 100.0
    delta_w_decrease: float = 1.0 / 3.0
    delta_w_min: float = 1e-20
    delta_w_max: float = 1e40
    delta_c_coeff: float = 1e-8
    delta_c_exponent: float = 0.25
    bound_push: float = 1e-2
    bound_frac: float = 1e-2
    kappa_sigma: float = 1e10
    max_backtracks: int = 30
    s_max: float = 100.0
    theta_max_fact: float | None = 1e4
    pivot: PivotOptions = field(default_factory=PivotOptions)

    def __post_init__(self):
        positive = (
            "tol", "acceptable_tol", "mu0", "kappa_mu", "theta_mu", "tau_min",
            "delta_w0", "delta_w_growth", "delta_w_first_growth", "delta_c_coeff",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.kappa_mu < 1 < self.theta_mu:
            raise ValueError("need kappa_mu < 1 < theta_mu")
        if self.max_iter < 0 or self.time_limit < 0:
            raise ValueError("limits must be nonnegative")


# ----------------------------------------------------------------------------
# standard form


class StandardForm:
    """Slack-transformed view of a problem over ``w = (x, s)``.

    Equality rows (``g_L == g_U``) become ``g(x) - g_L = 0``; every other row
    gets a slack with bounds ``[g_L, g_U]`` and becomes ``g(x) - s = 0``.
    """

    def __init__(self, problem: NlpProblem):
        problem.validate()
        self.problem = p = problem
        self.n, self.m = p.n, p.m
        if np.any(p.x_l == p.x_u):
            raise ValueError("fixed variables (x_L == x_U) are not supported")
        eq = p.g_l == p.g_u
        self.eq_rows = np.nonzero(eq)[0]
        self.ineq_rows = np.nonzero(~eq)[0]
        n_eq = self.eq_rows.size
        if n_eq > self.n:
            raise DegreesOfFreedomError(
                f"too few degrees of freedom: {n_eq} equality constraints "
                f"for {self.n} free variables"
            )
        self.n_slack = self.ineq_rows.size
        self.n_aug = self.n + self.n_slack
        self.lower = np.concatenate([p.x_l, p.g_l[self.ineq_rows]])
        self.upper = np.concatenate([p.x_u, p.g_u[self.ineq_rows]])
        self.has_l = np.isfinite(self.lower)
        self.has_u = np.isfinite(self.upper)
        self.c_shift = np.where(eq, p.g_l, 0.0)

        jr, jc = (np.asarray(v, dtype=np.int64) for v in p.jacobian_structure())
        self.jac_rows = np.concatenate([jr, self.ineq_rows])
        self.jac_cols = np.concatenate([jc, self.n + np.arange(self.n_slack)])
        self._kkt_layout()

    def _kkt_layout(self):
        n_aug, m = self.n_aug, self.m
        hr, hc = (np.asarray(v, dtype=np.int64) for v in self.problem.hessian_structure())
        diag = np.arange(n_aug)
        cdiag = n_aug + np.arange(m)
        rows = np.concatenate([hr, diag, n_aug + self.jac_rows, cdiag])
        cols = np.concatenate([hc, diag, self.jac_cols, cdiag])
        pattern = from_triplets(SymTriplet(n_aug + m, rows, cols, np.zeros(rows.size)))
        key = cols * (n_aug + m) + rows
        ukey = pattern.col_idx() * (n_aug + m) + pattern.row_idx
        self._kkt_target = np.searchsorted(ukey, key)
        self.kkt_pattern = pattern
        self._n_hess = hr.size

    def split(self, w):
        return w[: self.n], w[self.n:]

    def jac_values(self, x) -> np.ndarray:
        return np.concatenate([self.problem.jacobian(x), -np.ones(self.n_slack)])

    def c(self, w) -> np.ndarray:
        x, s = self.split(w)
        c = self.problem.constraints(x) - self.c_shift
        c[self.ineq_rows] -= s
        return c

    def jac_t_dot(self, jvals, y) -> np.ndarray:
        return np.bincount(
            self.jac_cols, weights=jvals * y[self.jac_rows], minlength=self.n_aug
        )

    def grad_f(self, x) -> np.ndarray:
        g = np.zeros(self.n_aug)
        g[: self.n] = self.problem.gradient(x)
        return g


def slack_transform(problem: NlpProblem) -> StandardForm:
    return StandardForm(problem)


# ----------------------------------------------------------------------------
# iterate and barrier quantities


@dataclass
class Iterate:
    """Primal/dual state; ``z_l``/``z_u`` are zero where no bound exists."""

    x: np.ndarray
    s: np.ndarray
    y: np.ndarray
    z_l: np.ndarray
    z_u: np.ndarray
    mu: float

    @property
    def w(self) -> np.ndarray:
        return np.concatenate([self.x, self.s])


def _gaps(sf: StandardForm, w):
    dl = np.where(sf.has_l, w - np.where(sf.has_l, sf.lower, 0.0), 1.0)
    du = np.where(sf.has_u, np.where(sf.has_u, sf.upper, 0.0) - w, 1.0)
    return dl, du


def check_interior(sf: StandardForm, it: Iterate) -> None:
    w = it.w
    dl, du = _gaps(sf, w)
    if np.any(dl[sf.has_l] <= 0) or np.any(du[sf.has_u] <= 0):
        raise ValueError("iterate is not strictly inside its bounds")
    if np.any(it.z_l[sf.has_l] <= 0) or np.any(it.z_u[sf.has_u] <= 0):
        raise ValueError("bound multipliers must be strictly positive")
    if not it.mu > 0:
        raise ValueError("barrier parameter must be positive")


def barrier_terms(sf: StandardForm, w, mu):
    """Barrier penalty value and its gradient contribution at ``w``."""
    dl, du = _gaps(sf, w)
    if np.any(dl[sf.has_l] <= 0) or np.any(du[sf.has_u] <= 0):
        raise ValueError("point is not strictly inside its bounds")
    val = -mu * (np.log(dl[sf.has_l]).sum() + np.log(du[sf.has_u]).sum())
    grad = np.where(sf.has_l, -mu / dl, 0.0) + np.where(sf.has_u, mu / du, 0.0)
    return val, grad


def barrier_value_grad(sf: StandardForm, it: Iterate):
    """``phi_mu = f - mu * sum(log(distance to each finite bound))`` and gradient."""
    w = it.w
    pen, pgrad = barrier_terms(sf, w, it.mu)
    x = it.x
    return sf.problem.objective(x) + pen, sf.grad_f(x) + pgrad


@dataclass
class KktSystem:
    matrix: SymCsc
    rhs: np.ndarray
    n_aug: int
    m: int

    def perturbed(self, delta_w: float, delta_c: float) -> SymCsc:
        """Matrix with ``+delta_w`` on the primal and ``-delta_c`` on the dual diagonal."""
        a = self.matrix
        start = a.col_start[:-1]
        diag_pos = start[np.diff(a.col_start) > 0]
        n = a.n
        if diag_pos.size != n or not np.array_equal(a.row_idx[diag_pos], np.arange(n)):
            raise ValueError("KKT pattern must hold every diagonal entry")
        vals = a.values.copy()
        vals[diag_pos[: self.n_aug]] += delta_w
        vals[diag_pos[self.n_aug:]] -= delta_c
        return a.with_values(vals)


def _sigma(sf, it):
    w = it.w
    dl, du = _gaps(sf, w)
    return np.where(sf.has_l, it.z_l / dl, 0.0) + np.where(sf.has_u, it.z_u / du, 0.0)


def assemble_kkt(
    sf: StandardForm,
    it: Iterate,
    delta_w: float = 0.0,
    delta_c: float = 0.0,
    evals: dict | None = None,
) -> KktSystem:
    if evals is None:
        evals = evaluate(sf, it)
    hvals = evals["hess"]
    jvals = evals["jac"]
    diag = _sigma(sf, it) + delta_w
    vals = np.concatenate(
        [hvals, diag, jvals, np.full(sf.m, -float(delta_c))]
    )
    pat = sf.kkt_pattern
    values = np.bincount(sf._kkt_target, weights=vals, minlength=pat.nnz)
    grad_phi = evals["grad_phi"] if "grad_phi" in evals else barrier_value_grad(sf, it)[1]
    rhs = -np.concatenate([grad_phi + sf.jac_t_dot(jvals, it.y), evals["c"]])
    return KktSystem(pat.with_values(values), rhs, sf.n_aug, sf.m)


def evaluate(sf: StandardForm, it: Iterate) -> dict:
    x = it.x
    w = it.w
    p = sf.problem
    f = p.objective(x)
    pen, pgrad = barrier_terms(sf, w, it.mu)
    grad_f = sf.grad_f(x)
    return {
        "f": f,
        "phi": f + pen,
        "grad_f": grad_f,
        "grad_phi": grad_f + pgrad,
        "c": sf.c(w),
        "jac": sf.jac_values(x),
        "hess": p.hessian(x, it.y, 1.0),
    }


# ----------------------------------------------------------------------------
# Newton step with inertia correction


@dataclass
class StepResult:
    dx: np.ndarray
    dy: np.ndarray
    delta_w: float
    delta_c: float
    corrections: int
    factorization: object
    inertia: Inertia


def inertia_corrected_step(
    kkt: KktSystem,
    backend,
    mu: float,
    opts: SolverOptions = SolverOptions(),
    delta_w_last: float = 0.0,
    symbolic=None,
) -> StepResult:
    """Factor the (regularized) KKT matrix until its inertia is (n_aug, m, 0).

    The first attempt is unregularized.  After a wrong inertia, a reported
    zero eigenvalue switches on ``delta_c``; ``delta_w`` starts at
    ``delta_w0`` (or a fraction of the last successful value) and grows by
    ``delta_w_first_growth`` when no earlier regularization exists, by
    ``delta_w_growth`` otherwise.
    """
    target = Inertia(kkt.n_aug, kkt.m, 0)
    if symbolic is None:
        symbolic = backend.analyze(kkt.matrix)

    def attempt(dw, dc):
        fact = backend.factorize(symbolic, kkt.perturbed(dw, dc))
        return fact, backend.inertia(fact)

    dw = dc = 0.0
    corrections = 0
    fact, inert = attempt(dw, dc)
    if inert != target:
        if inert.zero > 0:
            dc = opts.delta_c_coeff * mu ** opts.delta_c_exponent
        if delta_w_last == 0.0:
            dw = opts.delta_w0
            growth = opts.delta_w_first_growth
        else:
            dw = max(opts.delta_w_min, opts.delta_w_decrease * delta_w_last)
            growth = opts.delta_w_growth
        while True:
            if dw > opts.delta_w_max:
                raise LinearSolveFailure(
                    f"inertia correction failed: delta_w above {opts.delta_w_max:g}"
                )
            corrections += 1
            fact, inert = attempt(dw, dc)
            if inert == target:
                break
            dw *= growth
    sol = backend.solve(fact, kkt.rhs)
    return StepResult(
        dx=sol[: kkt.n_aug],
        dy=sol[kkt.n_aug:],
        delta_w=dw,
        delta_c=dc,
        corrections=corrections,
        factorization=fact,
        inertia=inert,
    )


def recover_dz(sf: StandardForm, it: Iterate, dx: np.ndarray):
    """Bound multiplier steps from the linearized complementarity rows."""
    dl, du = _gaps(sf, it.w)
    mu = it.mu
    dz_l = np.where(sf.has_l, mu / dl - it.z_l - it.z_l / dl * dx, 0.0)
    dz_u = np.where(sf.has_u, mu / du - it.z_u + it.z_u / du * dx, 0.0)
    return dz_l, dz_u


def _max_step(v, dv, tau):
    """Largest alpha in (0, 1] with v + alpha dv >= (1 - tau) v for positive v."""
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-tau * v[neg] / dv[neg])))


def fraction_to_boundary(sf: StandardForm, it: Iterate, dx, dz_l, dz_u, tau=None):
    if tau is None:
        tau = max(SolverOptions.tau_min, 1.0 - it.mu)
    dl, du = _gaps(sf, it.w)
    alpha_p = min(
        _max_step(dl[sf.has_l], dx[sf.has_l], tau),
        _max_step(du[sf.has_u], -dx[sf.has_u], tau),
    )
    alpha_d = min(
        _max_step(it.z_l[sf.has_l], dz_l[sf.has_l], tau),
        _max_step(it.z_u[sf.has_u], dz_u[sf.has_u], tau),
    )
    return alpha_p, alpha_d


def mu_update(mu: float, tol: float, kappa: float = 0.2, theta: float = 1.5) -> float:
    return max(tol / 10.0, min(kappa * mu, mu ** theta))


def soc_constraint_rhs(c_trial: np.ndarray, c_current: np.ndarray, alpha: float = 1.0):
    """Constraint block used by a second-order correction."""
    return c_trial + alpha * c_current


@dataclass
class LineSearchResult:
    alpha: float
    phi: float
    theta: float
    trials: int
    corrected: bool = False


def _dominated(theta, phi, memory) -> bool:
    return any(theta >= t and phi >= p for t, p in memory)


def acceptable_point(theta, phi, theta0, phi0, alpha, grad_dot, memory, theta_cap=1e-4) -> bool:
    """Sufficient progress in infeasibility or in the barrier objective.

    An Armijo decrease of ``phi`` is enough as long as ``theta`` stays below
    ``max(theta0, theta_cap)``.
    """
    if not (np.isfinite(theta) and np.isfinite(phi)):
        return False
    if _dominated(theta, phi, memory):
        return False
    if theta <= (1.0 - 1e-5) * theta0:
        return True
    slack = 10.0 * EPS * abs(phi0)
    return phi <= phi0 + 1e-4 * alpha * grad_dot + slack and theta <= max(theta0, theta_cap)


def line_search(trial, theta0, phi0, grad_dot, alpha_max, memory=(), max_backtracks=30,
                correction=None, theta_cap=1e-4):
    """Backtrack ``alpha = alpha_max * 2**-j``; ``trial(alpha)`` returns (theta, phi).

    ``correction``, if given, is tried once when the first (full) trial is
    rejected without reducing the infeasibility; a non-``None`` result from it
    ends the search.  Returns ``None`` after ``max_backtracks`` rejected trials.
    """
    alpha = alpha_max
    for j in range(max_backtracks):
        theta, phi = trial(alpha)
        if acceptable_point(theta, phi, theta0, phi0, alpha, grad_dot, memory, theta_cap):
            return LineSearchResult(alpha, phi, theta, j + 1)
        if j == 0 and correction is not None and not theta < theta0:
            fixed = correction()
            if fixed is not None:
                return fixed
            correction = None
        alpha *= 0.5
    return None


# ----------------------------------------------------------------------------
# optimality measure


def kkt_error(sf: StandardForm, it: Iterate, mu: float, evals: dict | None = None,
              s_max: float = 100.0) -> float:
    """Scaled max-norm of the stationarity, feasibility and complementarity residuals."""
    if evals is None:
        evals = evaluate(sf, it)
    w = it.w
    stat = evals["grad_f"] + sf.jac_t_dot(evals["jac"], it.y) - it.z_l + it.z_u
    dl, du = _gaps(sf, w)
    comp = np.concatenate([
        dl[sf.has_l] * it.z_l[sf.has_l] - mu,
        du[sf.has_u] * it.z_u[sf.has_u] - mu,
    ])
    nz = int(sf.has_l.sum() + sf.has_u.sum())
    z1 = float(np.abs(it.z_l).sum() + np.abs(it.z_u).sum())
    y1 = float(np.abs(it.y).sum())
    s_d = max(s_max, (y1 + z1) / max(sf.m + nz, 1)) / s_max
    s_c = max(s_max, z1 / max(nz, 1)) / s_max
    parts = [
        np.abs(stat).max() / s_d if stat.size else 0.0,
        np.abs(evals["c"]).max() if sf.m else 0.0,
        np.abs(comp).max() / s_c if comp.size else 0.0,
    ]
    return float(max(parts))


# ----------------------------------------------------------------------------
# driver


@dataclass
class SolveResult:
    status: Status
    x: np.ndarray
    iterate: Iterate | None
    iterations: int
    objective: float
    kkt_error: float
    timing: dict
    inertia_corrections: int
    delta_w_last: float
    delta_w_history: list = field(default_factory=list)
    delta_c_history: list = field(default_factory=list)
    message: str = ""

    @property
    def solved(self) -> bool:
        return self.status.solved


def initial_iterate(sf: StandardForm, opts: SolverOptions) -> Iterate:
    p = sf.problem
    x0 = np.asarray(p.x0, dtype=float).copy()
    s0 = (p.constraints(x0) if sf.m else np.zeros(0))[sf.ineq_rows]
    w = np.concatenate([x0, s0])
    lo, up = sf.lower, sf.upper
    width = np.where(sf.has_l & sf.has_u, up - lo, np.inf)
    push_l = np.minimum(opts.bound_push * np.maximum(1.0, np.abs(np.where(sf.has_l, lo, 0.0))),
                        opts.bound_frac * width)
    push_u = np.minimum(opts.bound_push * np.maximum(1.0, np.abs(np.where(sf.has_u, up, 0.0))),
                        opts.bound_frac * width)
    w = np.where(sf.has_l, np.maximum(w, lo + push_l), w)
    w = np.where(sf.has_u, np.minimum(w, up - push_u), w)
    mu = opts.mu0
    dl, du = _gaps(sf, w)
    z_l = np.where(sf.has_l, mu / dl, 0.0)
    z_u = np.where(sf.has_u, mu / du, 0.0)
    x, s = sf.split(w)
    return Iterate(x=x.copy(), s=s.copy(), y=np.zeros(sf.m), z_l=z_l, z_u=z_u, mu=mu)


def _with_w(sf, it, w, **kw):
    x, s = sf.split(w)
    return replace(it, x=x.copy(), s=s.copy(), **kw)


def solve(problem: NlpProblem, backend=None, opts: SolverOptions = SolverOptions()) -> SolveResult:
    """Run the barrier method; every outcome is reported through ``status``."""
    t0 = time.perf_counter()
    timing = {"function": 0.0, "linear": 0.0, "total": 0.0}
    if backend is None:
        backend = SparseLdlBackend(opts.pivot)
    try:
        sf = slack_transform(problem)
    except DegreesOfFreedomError as exc:
        timing["total"] = time.perf_counter() - t0
        return SolveResult(Status.DEGREES_OF_FREEDOM, np.asarray(problem.x0, float), None, 0,
                           float("nan"), float("inf"), timing, 0, 0.0, message=str(exc))

    def timed_eval(it_):
        t = time.perf_counter()
        ev = evaluate(sf, it_)
        timing["function"] += time.perf_counter() - t
        return ev

    def trial_values(w, mu):
        t = time.perf_counter()
        try:
            pen, _ = barrier_terms(sf, w, mu)
        except ValueError:
            return np.inf, np.inf, None
        x, _ = sf.split(w)
        f = problem.objective(x)
        c = sf.c(w)
        timing["function"] += time.perf_counter() - t
        return float(np.abs(c).sum()), f + pen, c

    it = initial_iterate(sf, opts)
    symbolic = None

    memory: deque = deque(maxlen=2)
    delta_w_last = 0.0
    corrections = 0
    dw_hist, dc_hist = [], []
    iterations = 0
    status = None
    message = ""
    ev = timed_eval(it)
    err0 = kkt_error(sf, it, 0.0, ev, opts.s_max)
    theta_cap = 1e-4
    if opts.theta_max_fact is not None:
        theta_cap = opts.theta_max_fact * max(1.0, float(np.abs(ev["c"]).sum()))
    mu_floor = opts.tol / 10.0
    try:
        while True:
            err0 = kkt_error(sf, it, 0.0, ev, opts.s_max)
            if err0 <= opts.tol:
                status = Status.OPTIMAL
                break
            if iterations >= opts.max_iter:
                status = Status.ITERATION_LIMIT
                break
            if time.perf_counter() - t0 > opts.time_limit:
                status = Status.TIME_LIMIT
                break
            if not np.all(np.isfinite(it.x)) or np.abs(it.x).max(initial=0.0) > 1e20:
                status = Status.DIVERGED
                message = "iterates diverged"
                break

            # barrier parameter: decrease while the subproblem is solved well enough
            changed = False
            while it.mu > mu_floor and kkt_error(sf, it, it.mu, ev, opts.s_max) <= opts.kappa_eps * it.mu:
                it.mu = mu_update(it.mu, opts.tol, opts.kappa_mu, opts.theta_mu)
                changed = True
            if changed:
                memory.clear()
                ev = timed_eval(it)

            kkt = assemble_kkt(sf, it, 0.0, 0.0, ev)
            t = time.perf_counter()
            if symbolic is None:
                # analysis sees real values so zero diagonals can be paired
                symbolic = backend.analyze(kkt.matrix)
            step = inertia_corrected_step(kkt, backend, it.mu, opts, delta_w_last, symbolic)
            timing["linear"] += time.perf_counter() - t
            corrections += step.corrections
            if step.delta_w > 0:
                delta_w_last = step.delta_w
            dw_hist.append(step.delta_w)
            dc_hist.append(step.delta_c)

            w = it.w
            dw, dy = step.dx, step.dy
            dz_l, dz_u = recover_dz(sf, it, dw)
            tau = max(opts.tau_min, 1.0 - it.mu)
            a_p, a_d = fraction_to_boundary(sf, it, dw, dz_l, dz_u, tau)
            theta0 = float(np.abs(ev["c"]).sum())
            phi0 = ev["phi"]
            grad_dot = float(ev["grad_phi"] @ dw)
            if not memory:
                memory.append((theta0, phi0))

            soc_state = {"tried": False}

            def correction():
                # second-order correction reusing the current factorization
                soc_state["tried"] = True
                _, _, c_trial = trial_values(w + a_p * dw, it.mu)
                if c_trial is None or sf.m == 0:
                    return None
                rhs = kkt.rhs.copy()
                rhs[sf.n_aug:] = -soc_constraint_rhs(c_trial, ev["c"], a_p)
                t = time.perf_counter()
                sol = backend.solve(step.factorization, rhs)
                timing["linear"] += time.perf_counter() - t
                dw_soc = sol[: sf.n_aug]
                dzl_soc, dzu_soc = recover_dz(sf, it, dw_soc)
                a_soc, a_d_soc = fraction_to_boundary(sf, it, dw_soc, dzl_soc, dzu_soc, tau)
                theta, phi, _ = trial_values(w + a_soc * dw_soc, it.mu)
                if not acceptable_point(theta, phi, theta0, phi0, a_p, grad_dot, memory, theta_cap):
                    return None
                soc_state.update(dw=dw_soc, dy=sol[sf.n_aug:], dz_l=dzl_soc, dz_u=dzu_soc, a_d=a_d_soc)
                return LineSearchResult(a_soc, phi, theta, 1, corrected=True)

            tiny = np.max(np.abs(dw) / (1.0 + np.abs(w)), initial=0.0) < 10.0 * EPS
            if tiny:
                accepted = LineSearchResult(a_p, phi0, theta0, 0)
            else:
                accepted = line_search(
                    lambda a: trial_values(w + a * dw, it.mu)[:2],
                    theta0, phi0, grad_dot, a_p, memory, opts.max_backtracks,
                    correction=correction, theta_cap=theta_cap,
                )
                if accepted is None and not soc_state["tried"]:
                    accepted = correction()
            if accepted is None:
                status = Status.DIVERGED
                message = "line search and second-order correction failed"
                break
            if accepted.corrected:
                dw, dy = soc_state["dw"], soc_state["dy"]
                dz_l, dz_u, a_d = soc_state["dz_l"], soc_state["dz_u"], soc_state["a_d"]

            alpha = accepted.alpha
            new_w = w + alpha * dw
            z_l = it.z_l + a_d * dz_l
            z_u = it.z_u + a_d * dz_u
            dl, du = _gaps(sf, new_w)
            ks = opts.kappa_sigma
            z_l = np.where(sf.has_l, np.clip(z_l, it.mu / (ks * dl), ks * it.mu / dl), 0.0)
            z_u = np.where(sf.has_u, np.clip(z_u, it.mu / (ks * du), ks * it.mu / du), 0.0)
            it = _with_w(sf, it, new_w, y=it.y + alpha * dy, z_l=z_l, z_u=z_u)
            iterations += 1
            ev = timed_eval(it)
            memory.append((float(np.abs(ev["c"]).sum()), ev["phi"]))
            log.debug("iter %d mu %.2e err %.3e alpha %.3e amax %.3e trials %d theta %.3e dw %.1e",
                      iterations, it.mu, err0, alpha, a_p, accepted.trials, accepted.theta, step.delta_w)
    except (LinearSolveFailure, SingularFactorError, DenseLimitError, np.linalg.LinAlgError) as exc:
        status = Status.LINEAR_SOLVE_ERROR
        message = str(exc)
    except (FloatingPointError, OverflowError) as exc:
        status = Status.DIVERGED
        message = str(exc)

    err0 = kkt_error(sf, it, 0.0, ev, opts.s_max)
    if status in (Status.ITERATION_LIMIT, Status.TIME_LIMIT) and err0 <= opts.acceptable_tol:
        status = Status.ACCEPTABLE
    timing["total"] = time.perf_counter() - t0
    return SolveResult(
        status=status,
        x=it.x.copy(),
        iterate=it,
        iterations=iterations,
        objective=float(ev["f"]),
        kkt_error=err0,
        timing=timing,
        inertia_corrections=corrections,
        delta_w_last=delta_w_last,
        delta_w_history=dw_hist,
        delta_c_history=dc_hist,
        message=message,
    )

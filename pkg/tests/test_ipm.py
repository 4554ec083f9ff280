import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ipbench.ipm import (
    DegreesOfFreedomError,
    Iterate,
    KktSystem,
    SolverOptions,
    Status,
    assemble_kkt,
    barrier_value_grad,
    check_interior,
    fraction_to_boundary,
    inertia_corrected_step,
    initial_iterate,
    kkt_error,
    line_search,
    mu_update,
    recover_dz,
    slack_transform,
    soc_constraint_rhs,
    solve,
)
from ipbench.ldl import DenseLdlBackend, Inertia, SparseLdlBackend
from ipbench.nlp import FunctionNlp
from ipbench.problems import analytic_suite
from ipbench.sparse import SymCsc, SymTriplet, from_triplets

ZERO1 = lambda x: np.zeros((1, 1))  # noqa: E731


def bounded_linear(x_l=0.0, x_u=np.inf, x0=1.0):
    """min x over one bounded variable."""
    return FunctionNlp(1, lambda x: x[0], lambda x: np.ones(1), ZERO1, [x0], x_l=[x_l], x_u=[x_u])


def eq_quadratic():
    """min x^2 / 2 subject to x = 1."""
    return FunctionNlp(
        1, lambda x: 0.5 * x[0] ** 2, lambda x: x.copy(), lambda x: np.eye(1), [0.0],
        g=lambda x: x.copy(), jac=lambda x: np.ones(1), hess_g=lambda x, y: np.zeros((1, 1)),
        g_l=[1.0], g_u=[1.0], m=1,
    )


def iterate(sf, x, s=(), y=None, z_l=None, z_u=None, mu=1.0):
    n_aug = sf.n_aug
    return Iterate(
        x=np.asarray(x, float), s=np.asarray(s, float),
        y=np.zeros(sf.m) if y is None else np.asarray(y, float),
        z_l=np.zeros(n_aug) if z_l is None else np.asarray(z_l, float),
        z_u=np.zeros(n_aug) if z_u is None else np.asarray(z_u, float),
        mu=mu,
    )


def kkt_from_dense(d, n_aug, m, rhs=None):
    """KKT system with every diagonal stored (zeros included)."""
    d = np.asarray(d, float)
    n = d.shape[0]
    r, c = np.tril_indices(n)
    keep = (d[r, c] != 0) | (r == c)
    a = from_triplets(SymTriplet(n, r[keep], c[keep], d[r[keep], c[keep]]))
    return KktSystem(a, np.ones(n) if rhs is None else np.asarray(rhs, float), n_aug, m)


# ------------------------------------------------------------ slack transform


def test_bound_only_problem_has_no_slacks():
    sf = slack_transform(bounded_linear(0.0, 1.0, 0.5))
    assert sf.n_slack == 0 and sf.n_aug == 1 and sf.m == 0
    assert sf.lower.tolist() == [0.0] and sf.upper.tolist() == [1.0]


def test_range_row_gets_slack():
    p = FunctionNlp(
        1, lambda x: 0.0, lambda x: np.zeros(1), ZERO1, [1.0],
        g=lambda x: x ** 2, jac=lambda x: 2 * x, hess_g=lambda x, y: 2 * y[0] * np.eye(1),
        g_l=[0.0], g_u=[4.0], m=1,
    )
    sf = slack_transform(p)
    assert sf.n_slack == 1 and sf.n_aug == 2
    assert sf.lower[1] == 0.0 and sf.upper[1] == 4.0
    # x^2 - s = 0
    assert sf.c(np.array([3.0, 5.0]))[0] == pytest.approx(4.0)
    np.testing.assert_array_equal(sf.jac_values(np.array([3.0])), [6.0, -1.0])


def test_too_many_equalities():
    p = FunctionNlp(
        1, lambda x: x[0], lambda x: np.ones(1), ZERO1, [0.0],
        g=lambda x: np.array([x[0], 2 * x[0]]), jac=lambda x: np.array([1.0, 2.0]),
        hess_g=lambda x, y: np.zeros((1, 1)), g_l=[0.0, 0.0], g_u=[0.0, 0.0], m=2,
    )
    with pytest.raises(DegreesOfFreedomError):
        slack_transform(p)
    assert solve(p).status == Status.DEGREES_OF_FREEDOM


def test_fixed_variables_rejected():
    with pytest.raises(ValueError):
        slack_transform(bounded_linear(1.0, 1.0, 1.0))


# ---------------------------------------------------------------- barrier


def test_barrier_value_at_centered_point():
    p = FunctionNlp(2, lambda x: x.sum(), lambda x: np.ones(2), lambda x: np.zeros((2, 2)),
                    [1.0, 1.0], x_l=[0.0, 0.0])
    sf = slack_transform(p)
    phi, grad = barrier_value_grad(sf, iterate(sf, [1.0, 1.0], mu=1.0))
    assert phi == pytest.approx(2.0)
    np.testing.assert_allclose(grad, [0.0, 0.0], atol=1e-15)


def test_barrier_gradient_hand_value():
    sf = slack_transform(bounded_linear())
    _, grad = barrier_value_grad(sf, iterate(sf, [2.0], mu=1.0))
    assert grad[0] == pytest.approx(0.5)


def test_interiority_checks():
    sf = slack_transform(bounded_linear())
    with pytest.raises(ValueError):
        check_interior(sf, iterate(sf, [1.0], z_l=[1.0], mu=0.0))
    with pytest.raises(ValueError):
        check_interior(sf, iterate(sf, [0.0], z_l=[1.0]))
    with pytest.raises(ValueError):
        check_interior(sf, iterate(sf, [1.0], z_l=[0.0]))
    with pytest.raises(ValueError):
        barrier_value_grad(sf, iterate(sf, [-1.0]))
    check_interior(sf, iterate(sf, [1.0], z_l=[1.0]))


def random_bounded_problem(rng, n):
    """Smooth separable-plus-quadratic objective with mixed finite bounds."""
    a = rng.uniform(-1, 1, n)
    q = rng.standard_normal((n, n))
    q = q @ q.T / n
    x_l = np.where(rng.random(n) < 0.7, rng.uniform(-2, 0, n), -np.inf)
    x_u = np.where(rng.random(n) < 0.7, rng.uniform(1, 3, n), np.inf)
    x_l[np.isinf(x_l) & np.isinf(x_u)] = -1.0
    f = lambda x: float(np.exp(a * x).sum() + 0.5 * x @ q @ x)  # noqa: E731
    grad = lambda x: a * np.exp(a * x) + q @ x  # noqa: E731
    hess = lambda x: np.diag(a * a * np.exp(a * x)) + q  # noqa: E731
    lo = np.where(np.isfinite(x_l), x_l, -3.0)
    up = np.where(np.isfinite(x_u), x_u, 4.0)
    x = lo + (up - lo) * rng.uniform(0.1, 0.9, n)
    return FunctionNlp(n, f, grad, hess, x, x_l=x_l, x_u=x_u), x


def fd_barrier_error(sf, it, h=1e-6):
    _, g = barrier_value_grad(sf, it)
    w = it.w
    worst = 0.0
    for i in range(w.size):
        e = np.zeros_like(w)
        e[i] = h * max(1.0, abs(w[i]))
        fp = barrier_value_grad(sf, _at(sf, it, w + e))[0]
        fm = barrier_value_grad(sf, _at(sf, it, w - e))[0]
        fd = (fp - fm) / (2 * e[i])
        worst = max(worst, abs(fd - g[i]) / max(1.0, abs(g[i])))
    return worst


def _at(sf, it, w):
    return Iterate(w[: sf.n], w[sf.n:], it.y, it.z_l, it.z_u, it.mu)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(1, 10), seed=st.integers(0, 2**32 - 1), mu=st.floats(1e-3, 1.0))
def test_barrier_gradient_matches_central_differences(n, seed, mu):
    rng = np.random.default_rng(seed)
    p, x = random_bounded_problem(rng, n)
    sf = slack_transform(p)
    assert fd_barrier_error(sf, iterate(sf, x, mu=mu)) <= 1e-6


# -------------------------------------------------------------------- KKT


def test_assemble_equality_quadratic():
    sf = slack_transform(eq_quadratic())
    it = iterate(sf, [0.0], y=[0.0], mu=0.1)
    kkt = assemble_kkt(sf, it)
    np.testing.assert_array_equal(kkt.matrix.to_dense(), [[1.0, 1.0], [1.0, 0.0]])
    np.testing.assert_array_equal(kkt.rhs, [0.0, 1.0])
    assert (kkt.n_aug, kkt.m) == (1, 1)


def test_assemble_with_perturbation():
    sf = slack_transform(eq_quadratic())
    it = iterate(sf, [0.0], y=[0.0], mu=0.1)
    np.testing.assert_array_equal(
        assemble_kkt(sf, it, 0.5, 0.25).matrix.to_dense(), [[1.5, 1.0], [1.0, -0.25]]
    )
    np.testing.assert_array_equal(
        assemble_kkt(sf, it).perturbed(0.5, 0.25).to_dense(), [[1.5, 1.0], [1.0, -0.25]]
    )


def test_assemble_bound_only():
    sf = slack_transform(bounded_linear())
    kkt = assemble_kkt(sf, iterate(sf, [1.0], z_l=[1.0], mu=1.0))
    np.testing.assert_array_equal(kkt.matrix.to_dense(), [[1.0]])
    np.testing.assert_allclose(kkt.rhs, [0.0], atol=0.0)


def random_constrained(rng, n, m):
    """Quadratic objective; rows a_i.x + b_i |x|^2 / 2, some equalities, some ranges."""
    q = rng.standard_normal((n, n))
    q = q + q.T
    c = rng.standard_normal(n)
    A = rng.standard_normal((m, n))
    b = rng.standard_normal(m)
    f = lambda x: float(0.5 * x @ q @ x + c @ x)  # noqa: E731
    g = lambda x: A @ x + 0.5 * b * (x @ x)  # noqa: E731
    jac = lambda x: (A + np.outer(b, x)).reshape(-1)  # noqa: E731
    hess_g = lambda x, y: float(y @ b) * np.eye(n)  # noqa: E731
    eq = rng.random(m) < 0.5
    g_l = np.where(eq, 0.0, -1.0)
    g_u = np.where(eq, 0.0, np.where(rng.random(m) < 0.5, 2.0, np.inf))
    x_l = np.where(rng.random(n) < 0.5, -5.0, -np.inf)
    x_u = np.where(rng.random(n) < 0.5, 5.0, np.inf)
    p = FunctionNlp(n, f, lambda x: q @ x + c, lambda x: q, np.zeros(n), x_l=x_l, x_u=x_u,
                    g=g, jac=jac, hess_g=hess_g, g_l=g_l, g_u=g_u, m=m)
    return p, dict(q=q, c=c, A=A, b=b)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 4), m=st.integers(0, 3), seed=st.integers(0, 2**32 - 1),
       dw=st.sampled_from([0.0, 0.3]), dc=st.sampled_from([0.0, 0.2]))
def test_kkt_matches_dense_hand_assembly(n, m, seed, dw, dc):
    if n + m > 6 or m > n:
        return
    rng = np.random.default_rng(seed)
    p, d = random_constrained(rng, n, m)
    sf = slack_transform(p)
    x = rng.uniform(-1, 1, n)
    gx = p.constraints(x)
    s = gx[sf.ineq_rows] if m else np.zeros(0)
    s = np.where(np.isfinite(sf.upper[n:]), np.clip(s, -0.5, 1.5), np.maximum(s, -0.5))
    y = rng.standard_normal(m)
    z_l = np.where(sf.has_l, rng.uniform(0.1, 2, sf.n_aug), 0.0)
    z_u = np.where(sf.has_u, rng.uniform(0.1, 2, sf.n_aug), 0.0)
    it = Iterate(x, s, y, z_l, z_u, 0.3)
    kkt = assemble_kkt(sf, it, dw, dc)
    K = kkt.matrix.to_dense()
    assert np.array_equal(K, K.T)

    # hand assembly over w = (x, s)
    n_aug = sf.n_aug
    w = it.w
    W = np.zeros((n_aug, n_aug))
    W[:n, :n] = d["q"] + float(y @ d["b"]) * np.eye(n) if m else d["q"]
    dl = w - sf.lower
    du = sf.upper - w
    sig = np.where(sf.has_l, z_l / np.where(sf.has_l, dl, 1), 0) + np.where(sf.has_u, z_u / np.where(sf.has_u, du, 1), 0)
    J = np.zeros((m, n_aug))
    J[:, :n] = d["A"] + np.outer(d["b"], x)
    for k, r in enumerate(sf.ineq_rows):
        J[r, n + k] = -1.0
    expect = np.block([[W + np.diag(sig) + dw * np.eye(n_aug), J.T], [J, -dc * np.eye(m)]])
    np.testing.assert_allclose(K, expect, rtol=1e-14, atol=1e-14)

    mu = it.mu
    gphi = np.zeros(n_aug)
    gphi[:n] = d["q"] @ x + d["c"]
    gphi += np.where(sf.has_l, -mu / np.where(sf.has_l, dl, 1), 0) + np.where(sf.has_u, mu / np.where(sf.has_u, du, 1), 0)
    c = gx - np.where(p.g_l == p.g_u, p.g_l, 0.0)
    c[sf.ineq_rows] -= s
    np.testing.assert_allclose(kkt.rhs, -np.concatenate([gphi + J.T @ y, c]), rtol=1e-13, atol=1e-13)


# -------------------------------------------------------- inertia correction


def test_correct_inertia_accepted_without_regularization():
    step = inertia_corrected_step(kkt_from_dense([[1.0, 1.0], [1.0, 0.0]], 1, 1), SparseLdlBackend(), 0.1)
    assert step.delta_w == 0.0 and step.delta_c == 0.0 and step.corrections == 0
    assert step.inertia == Inertia(1, 1, 0)


def test_wrong_singular_inertia_needs_both_perturbations():
    kkt = kkt_from_dense([[-1.0, 0.0], [0.0, 0.0]], 1, 1)
    for be in (SparseLdlBackend(), DenseLdlBackend()):
        step = inertia_corrected_step(kkt, be, 0.1)
        assert step.delta_w > 1.0 and step.delta_c > 0.0
        assert step.inertia == Inertia(1, 1, 0)
        ev = np.linalg.eigvalsh(kkt.perturbed(step.delta_w, step.delta_c).to_dense())
        assert (ev > 0).sum() == 1 and (ev < 0).sum() == 1


def test_positive_scalar_accepted_immediately():
    step = inertia_corrected_step(kkt_from_dense([[2.0]], 1, 0, [4.0]), SparseLdlBackend(), 0.1)
    assert step.corrections == 0
    np.testing.assert_allclose(step.dx, [2.0])


def test_rank_deficient_jacobian_uses_delta_c():
    # H = I (2x2), J = [[1, 1], [1, 1]]: singular KKT
    d = np.zeros((4, 4))
    d[:2, :2] = np.eye(2)
    d[2:, :2] = 1.0
    d[:2, 2:] = 1.0
    step = inertia_corrected_step(kkt_from_dense(d, 2, 2), SparseLdlBackend(), 0.01)
    assert step.delta_c > 0.0
    assert step.inertia == Inertia(2, 2, 0)


def test_retry_schedule_first_and_later_growth():
    kkt = kkt_from_dense([[-1.0]], 1, 0)
    opts = SolverOptions()
    first = inertia_corrected_step(kkt, SparseLdlBackend(), 0.1, opts)
    # 1e-4 * 100**k is the first value above 1
    assert first.delta_w == pytest.approx(100.0)
    assert first.delta_c == 0.0
    later = inertia_corrected_step(kkt, SparseLdlBackend(), 0.1, opts, delta_w_last=first.delta_w)
    dw = first.delta_w / 3.0
    while dw <= 1.0:
        dw *= 8.0
    assert later.delta_w == pytest.approx(dw)


# -------------------------------------------------------------- dual steps


@pytest.mark.parametrize(
    "mu, x, z, dx, expect",
    [(1.0, 1.0, 1.0, 0.0, 0.0), (1.0, 2.0, 1.0, 0.0, -0.5), (0.01, 1.0, 2.0, 0.5, -2.99)],
)
def test_recover_dz_examples(mu, x, z, dx, expect):
    sf = slack_transform(bounded_linear())
    dz_l, dz_u = recover_dz(sf, iterate(sf, [x], z_l=[z], mu=mu), np.array([dx]))
    assert dz_l[0] == pytest.approx(expect)
    assert dz_u[0] == 0.0


def test_recover_dz_mirrored_for_upper_bound():
    sf = slack_transform(bounded_linear(-np.inf, 3.0, 1.0))
    _, dz_u = recover_dz(sf, iterate(sf, [1.0], z_u=[2.0], mu=0.01), np.array([-0.5]))
    # gap 2, step moves away from the bound
    assert dz_u[0] == pytest.approx(0.01 / 2 - 2.0 - 2.0 / 2 * 0.5)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), mu=st.floats(1e-6, 10.0))
def test_complementarity_rows_hold_after_recovery(seed, mu):
    rng = np.random.default_rng(seed)
    n = 5
    x_l = rng.uniform(-2, 0, n)
    x_u = x_l + rng.uniform(1, 4, n)
    p = FunctionNlp(n, lambda x: 0.0, lambda x: np.zeros(n), lambda x: np.zeros((n, n)),
                    (x_l + x_u) / 2, x_l=x_l, x_u=x_u)
    sf = slack_transform(p)
    x = x_l + (x_u - x_l) * rng.uniform(0.05, 0.95, n)
    it = iterate(sf, x, z_l=rng.uniform(0.1, 3, n), z_u=rng.uniform(0.1, 3, n), mu=mu)
    dx = rng.standard_normal(n)
    dz_l, dz_u = recover_dz(sf, it, dx)
    dl, du = x - x_l, x_u - x
    # Z dx + X dz = mu - X Z, mirrored for the upper side
    np.testing.assert_allclose(it.z_l * dx + dl * dz_l, mu - dl * it.z_l, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(-it.z_u * dx + du * dz_u, mu - du * it.z_u, rtol=1e-12, atol=1e-12)


def test_fraction_to_boundary_examples():
    sf = slack_transform(bounded_linear())
    it = iterate(sf, [1.0], z_l=[1.0], mu=0.01)
    zero = np.zeros(1)
    assert fraction_to_boundary(sf, it, np.array([-2.0]), zero, zero, 0.99)[0] == pytest.approx(0.495)
    assert fraction_to_boundary(sf, it, np.array([3.0]), zero, zero, 0.99)[0] == 1.0
    assert fraction_to_boundary(sf, it, np.array([-1.0]), zero, zero, 0.5)[0] == pytest.approx(0.5)
    # dual side against zero
    assert fraction_to_boundary(sf, it, zero, np.array([-2.0]), zero, 0.99)[1] == pytest.approx(0.495)


def test_fraction_to_boundary_default_tau():
    sf = slack_transform(bounded_linear())
    it = iterate(sf, [1.0], z_l=[1.0], mu=0.5)
    # tau = max(0.99, 1 - mu) = 0.99
    assert fraction_to_boundary(sf, it, np.array([-2.0]), np.zeros(1), np.zeros(1))[0] == pytest.approx(0.495)


# --------------------------------------------------------------- line search


def test_full_newton_step_on_quadratic():
    # min (x - 2)^2 / 2 from x = 0: dx = 2
    phi = lambda x: 0.5 * (x - 2.0) ** 2  # noqa: E731
    res = line_search(lambda a: (0.0, phi(0.0 + 2.0 * a)), 0.0, phi(0.0), -4.0, 1.0)
    assert res.alpha == 1.0 and res.trials == 1


@settings(max_examples=50, deadline=None)
@given(theta0=st.floats(1e-6, 1e6), slope=st.floats(1e-3, 1.0), rise=st.floats(0.0, 1e3))
def test_decreasing_infeasibility_is_accepted(theta0, slope, rise):
    res = line_search(lambda a: (theta0 * (1 - slope * a), 1.0 + rise * a), theta0, 1.0, 5.0, 1.0)
    assert res is not None


def test_adversarial_step_exhausts_backtracks_then_corrects_once():
    calls = {"trial": 0, "soc": 0}

    def trial(a):
        calls["trial"] += 1
        return 1.0 + a, 1.0 + a

    def correction():
        calls["soc"] += 1
        return None

    res = line_search(trial, 1.0, 0.0, 1.0, 1.0, correction=correction)
    assert res is None
    assert calls == {"trial": 30, "soc": 1}


def test_memory_rejects_dominated_points():
    # point improves phi by Armijo but is dominated by a remembered pair
    res = line_search(lambda a: (0.5, -1.0), 0.5, 0.0, -1.0, 1.0, memory=[(0.4, -2.0)], max_backtracks=3)
    assert res is None


def test_soc_rhs_examples():
    c = lambda x: x ** 2 - 1.0  # noqa: E731
    assert soc_constraint_rhs(c(1.0), c(0.0)) == pytest.approx(-1.0)
    assert soc_constraint_rhs(c(1.25), c(2.0)) == pytest.approx(3.5625)


def test_soc_reproduces_step_for_linear_constraints():
    sf = slack_transform(eq_quadratic())
    it = iterate(sf, [0.0], y=[0.0], mu=0.1)
    kkt = assemble_kkt(sf, it)
    be = SparseLdlBackend()
    step = inertia_corrected_step(kkt, be, it.mu)
    c_trial = sf.c(it.w + step.dx)
    np.testing.assert_allclose(c_trial, 0.0, atol=1e-15)
    rhs = kkt.rhs.copy()
    rhs[sf.n_aug:] = -soc_constraint_rhs(c_trial, sf.c(it.w))
    np.testing.assert_allclose(be.solve(step.factorization, rhs)[: sf.n_aug], step.dx, rtol=1e-15)


# ---------------------------------------------------------------------- mu


@pytest.mark.parametrize(
    "mu, tol, expect", [(0.1, 1e-8, 0.02), (0.01, 1e-8, 0.001), (1e-9, 1e-8, 1e-9)]
)
def test_mu_update_examples(mu, tol, expect):
    assert mu_update(mu, tol) == pytest.approx(expect, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(mu=st.floats(1e-12, 10.0), tol=st.floats(1e-12, 1e-4))
def test_mu_sequence_monotone_with_floor(mu, tol):
    mu = max(mu, tol / 10)
    for _ in range(60):
        nxt = mu_update(mu, tol)
        assert nxt <= mu and nxt >= tol / 10
        mu = nxt
    assert mu == pytest.approx(tol / 10)


# ---------------------------------------------------------------- kkt error


def test_kkt_error_at_exact_solution():
    sf = slack_transform(eq_quadratic())
    assert kkt_error(sf, iterate(sf, [1.0], y=[-1.0]), 0.0) == 0.0


def test_kkt_error_complementarity():
    sf = slack_transform(bounded_linear())
    assert kkt_error(sf, iterate(sf, [1.0], z_l=[1.0]), 1.0) == 0.0
    assert kkt_error(sf, iterate(sf, [2.0], z_l=[1.0]), 1.0) == pytest.approx(1.0)


def test_kkt_error_scaling_caps_large_multipliers():
    sf = slack_transform(bounded_linear())
    # z = 1000 dual: complementarity residual 1000 scaled by 1000 / 100
    err = kkt_error(sf, iterate(sf, [1.0], z_l=[1000.0]), 0.0)
    assert err == pytest.approx(max(999.0 / 10.0, 1000.0 / 10.0))


# ------------------------------------------------------------------- solves


def test_initial_iterate_pushed_inside():
    sf = slack_transform(bounded_linear(0.0, 1.0, 0.0))
    it = initial_iterate(sf, SolverOptions())
    assert 0.0 < it.x[0] < 1.0
    assert it.x[0] == pytest.approx(0.01)
    assert it.z_l[0] == pytest.approx(0.1 / 0.01)
    check_interior(sf, it)


@pytest.mark.parametrize("backend", [SparseLdlBackend, DenseLdlBackend])
def test_analytic_suite(backend):
    for g in analytic_suite():
        res = solve(g.problem, backend())
        assert res.status.value == g.expected_status, g.name
        if g.f_star is not None:
            assert abs(res.objective - g.f_star) <= 1e-6
            np.testing.assert_allclose(res.x, g.x_star, atol=1e-4)
            assert res.kkt_error <= 1e-8


def test_product_constraint_from_origin():
    c = next(g for g in analytic_suite() if g.name == "analytic_c").problem
    c.x0 = np.zeros(2)
    try:
        res = solve(c)
    finally:
        c.x0 = np.array([2.0, 2.0])
    assert res.status == Status.OPTIMAL
    assert res.objective == pytest.approx(2.0, abs=1e-6)


class RecordingBackend(SparseLdlBackend):
    def __init__(self):
        super().__init__()
        self.solved_with = []

    def solve(self, fact, b):
        self.solved_with.append(fact.inertia)
        return super().solve(fact, b)


class WatchedNlp(FunctionNlp):
    seen: list

    def hessian(self, x, y, obj_factor=1.0):
        self.seen.append(np.array(x))
        return super().hessian(x, y, obj_factor)


def test_steps_use_correct_inertia_and_iterates_stay_interior():
    base = next(g for g in analytic_suite() if g.name == "analytic_c").problem
    p = WatchedNlp(2, base._f, base._grad, base._hess_f, [0.0, 0.0], x_l=[0.0, 0.0],
                   g=base._g, jac=base._jac, hess_g=base._hess_g, g_l=[1.0], g_u=[1.0], m=1)
    p.seen = []
    be = RecordingBackend()
    res = solve(p, be)
    assert res.status == Status.OPTIMAL
    assert be.solved_with and all(i == Inertia(2, 1, 0) for i in be.solved_with)
    assert len(p.seen) >= res.iterations + 1
    assert all(np.all(x > 0) for x in p.seen)


def test_iteration_limit_and_acceptable():
    b = analytic_suite()[1].problem
    assert solve(b, opts=SolverOptions(max_iter=0)).status == Status.ITERATION_LIMIT
    res = solve(b, opts=SolverOptions(tol=1e-30, acceptable_tol=1e-6, max_iter=40))
    assert res.status in (Status.ACCEPTABLE, Status.OPTIMAL)
    if res.status == Status.ACCEPTABLE:
        assert res.kkt_error <= 1e-6 and res.iterations == 40


def test_time_limit():
    g = analytic_suite()[2]
    assert solve(g.problem, opts=SolverOptions(time_limit=0.0)).status == Status.TIME_LIMIT


def test_dense_limit_reports_linear_solve_error():
    g = analytic_suite()[2]
    res = solve(g.problem, DenseLdlBackend(limit=1))
    assert res.status == Status.LINEAR_SOLVE_ERROR


def test_unbounded_problem_does_not_raise():
    p = FunctionNlp(1, lambda x: -x[0], lambda x: -np.ones(1), ZERO1, [0.0], x_l=[0.0])
    res = solve(p, opts=SolverOptions(max_iter=200))
    assert res.status in (Status.DIVERGED, Status.ITERATION_LIMIT, Status.LINEAR_SOLVE_ERROR)
    assert not res.solved


def test_result_bookkeeping():
    res = solve(analytic_suite()[2].problem)
    assert set(res.timing) == {"function", "linear", "total"}
    assert res.timing["total"] >= res.timing["linear"] >= 0
    assert len(res.delta_w_history) == res.iterations
    assert res.status.solved and res.kkt_error <= 1e-8


def test_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(kappa_mu=1.5)
    with pytest.raises(ValueError):
        SolverOptions(tol=0.0)

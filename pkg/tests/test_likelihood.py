import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_design
from spgrowth import likelihood as lk
from spgrowth import weights as wm
from spgrowth.errors import CollinearityError, DomainError
from spgrowth.likelihood import ParamVector


def dense_loglik(mu, d):
    # independent oracle: slogdet and an explicit inverse
    n, p = d.n, d.p
    S = np.eye(n) - mu.rho * d.W
    E = d.Z - d.X2 @ mu.Gamma
    xi = S @ d.Y - d.X1 @ mu.beta - E @ mu.delta
    Si = np.linalg.inv(mu.Sigma_eps)
    quad = sum(E[i] @ Si @ E[i] for i in range(n))
    return (-0.5 * n * (1 + p) * math.log(2 * math.pi) - 0.5 * n * math.log(mu.sigma_xi2)
            + np.linalg.slogdet(S)[1] - 0.5 * n * np.linalg.slogdet(mu.Sigma_eps)[1] - 0.5 * quad
            - 0.5 * xi @ xi / mu.sigma_xi2)


def random_mu(d, rng):
    # a point in the neighbourhood of the generating values
    lo, hi = d.rho_interval
    p = d.p
    A = rng.standard_normal((p, p)) * 0.2 + np.eye(p)
    Gamma = np.vstack([np.full(p, 10.0), np.linspace(1.0, 0.5, p)]) + 0.2 * rng.standard_normal((d.k2, p))
    return ParamVector(rng.uniform(max(lo, -0.9), min(hi, 0.9)), rng.standard_normal(d.k1),
                       Gamma, rng.uniform(0.2, 2.0), A @ A.T, rng.standard_normal(p))


def fd_grad(f, x, rel=1e-5):
    g = np.zeros_like(x)
    for i in range(len(x)):
        h = rel * max(1.0, abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def test_build_design_columns():
    from spgrowth.panel import GrowthSample

    rng = np.random.default_rng(0)
    n = 8
    s = GrowthSample(tuple("ABCDEFGH"), rng.uniform(7, 10, n), rng.uniform(-2.5, -1, n), rng.uniform(-3, -2.7, n),
                     rng.uniform(1, 5, n), rng.uniform(-40, 40, n), rng.uniform(-120, 120, n), (1960, 1995))
    W = wm.build_weights(s.lat, s.lon)
    d = lk.build_design(s, W)
    assert np.allclose(d.X1[:, 3], W.entries @ d.X1[:, 1])
    assert np.allclose(d.X1[:, 4], W.entries @ d.X1[:, 2])
    assert np.all(d.X1[:, 3] >= s.lns.min() - 1e-15) and np.all(d.X1[:, 3] <= s.lns.max() + 1e-15)
    assert d.x1_names == lk.GROWTH_X1 and d.x2_names == lk.GROWTH_X2
    assert d.x2_nested_in_x1


def test_constant_lns_collinear():
    n = 6
    rng = np.random.default_rng(0)
    W = wm.build_weights(rng.uniform(-40, 40, n), rng.uniform(-100, 100, n)).entries
    lns = np.full(n, 0.3)
    assert np.allclose(W @ lns, 0.3)
    X1 = np.column_stack([np.ones(n), lns, rng.standard_normal(n)])
    with pytest.raises(CollinearityError) as err:
        lk.Design(rng.standard_normal(n), X1, np.ones(n), X1[:, :2], W, ("const", "lns", "x"))
    assert "lns" in str(err.value)


def test_design_immutable(design):
    with pytest.raises(ValueError):
        design.Y[0] = 1.0
    with pytest.raises(Exception):
        design.Y = np.zeros(design.n)


def test_logdet_small_cases():
    W = np.array([[0.0, 1.0], [1.0, 0.0]])
    S, ld = lk.spatial_filter_logdet(0.0, W)
    assert np.array_equal(S, np.eye(2)) and ld == 0.0
    _, ld = lk.spatial_filter_logdet(0.5, W)
    assert ld == pytest.approx(math.log(0.75), abs=1e-14)
    with pytest.raises(DomainError):
        lk.spatial_filter_logdet(1.0, W)


def test_logdet_eigen_oracle_and_monotone():
    rng = np.random.default_rng(1)
    A = rng.uniform(0, 1, (20, 20))
    np.fill_diagonal(A, 0)
    W = A / A.sum(axis=1, keepdims=True)
    _, ld = lk.spatial_filter_logdet(0.3, W)
    assert ld == pytest.approx(lk.logdet_eigen(0.3, W), abs=1e-8)
    grid = np.linspace(0, 0.99, 30)
    vals = [lk.spatial_filter_logdet(r, W)[1] for r in grid]
    assert np.all(np.diff(vals) < 0)


def test_admissible_interval():
    W = np.array([[0.0, 1.0], [1.0, 0.0]])
    lo, hi = lk.admissible_interval(W)
    assert lo == pytest.approx(-1 + 1e-6) and hi == pytest.approx(1 - 1e-6)


def test_exogenous_rho_zero_is_regression(design):
    rng = np.random.default_rng(2)
    beta, s2 = rng.standard_normal(design.k1), 0.7
    e = design.Y - design.X1 @ beta
    n = design.n
    ols = -0.5 * n * math.log(2 * math.pi * s2) - 0.5 * e @ e / s2
    assert lk.loglik_exogenous(0.0, beta, s2, design) == pytest.approx(ols, abs=1e-12 * abs(ols))
    with pytest.raises(DomainError):
        lk.loglik_exogenous(0.0, beta, 0.0, design)


def test_exogenous_dense_oracle():
    d, _ = random_design(n=30, seed=3)
    rng = np.random.default_rng(3)
    rho, beta, s2 = 0.2, rng.standard_normal(d.k1), 0.9
    S = np.eye(d.n) - rho * d.W
    r = S @ d.Y - d.X1 @ beta
    ref = -0.5 * d.n * math.log(2 * math.pi * s2) + np.linalg.slogdet(S)[1] - 0.5 * r @ r / s2
    assert lk.loglik_exogenous(rho, beta, s2, d) == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("p", [1, 2])
def test_endogenous_dense_oracle(p):
    d, _ = random_design(n=40, p=p, seed=4)
    rng = np.random.default_rng(4)
    for _ in range(10):
        mu = random_mu(d, rng)
        assert lk.loglik_endogenous(mu, d) == pytest.approx(dense_loglik(mu, d), abs=1e-10 * max(1, abs(dense_loglik(mu, d))))


def test_factorization_at_delta_zero(design):
    rng = np.random.default_rng(5)
    for _ in range(10):
        mu = random_mu(design, rng).copy(delta=np.zeros(1))
        lhs = lk.loglik_endogenous(mu, design)
        rhs = (lk.loglik_exogenous(mu.rho, mu.beta, mu.sigma_xi2, design)
               + lk.loglik_auxiliary(mu.Gamma, mu.Sigma_eps, design))
        assert lhs == pytest.approx(rhs, abs=1e-10)


def test_non_pd_sigma(design):
    mu = random_mu(design, np.random.default_rng(6)).copy(Sigma_eps=np.array([[-1.0]]))
    with pytest.raises(DomainError):
        lk.loglik_endogenous(mu, design)


def test_param_vector_round_trip():
    d, _ = random_design(n=30, p=2, seed=7)
    mu = random_mu(d, np.random.default_rng(7))
    back = ParamVector.from_vector(mu.to_vector(), d.k1, d.k2, d.p)
    assert np.array_equal(back.to_vector(), mu.to_vector())
    assert len(lk.param_names(d)) == lk.blocks(d)["size"] == len(mu.to_vector())
    M = np.array([[2.0, 0.5], [0.5, 3.0]])
    assert np.array_equal(lk.unvech(lk.vech(M), 2), M)


@pytest.mark.parametrize("p", [1, 2])
def test_score_matches_finite_differences(p):
    d, _ = random_design(n=50, p=p, seed=8)
    rng = np.random.default_rng(8)
    for _ in range(5):
        mu = random_mu(d, rng)
        g = lk.score(mu, d)
        fd = fd_grad(lambda v: lk.loglik_endogenous(v, d), mu.to_vector())
        assert np.all(np.abs(g - fd) <= 1e-6 * np.maximum(np.abs(fd), 1.0))


def test_score_at_restricted_estimate(design):
    from spgrowth.inference import restricted_estimate

    mu = restricted_estimate(design)
    g = lk.score(mu, design)
    b = lk.blocks(design)
    assert np.abs(g[b["beta"]]).max() < 1e-10 * design.n
    assert np.abs(g[b["Gamma"]]).max() < 1e-10 * design.n
    assert abs(g[b["sigma_xi2"]][0]) < 1e-9
    assert abs(g[b["Sigma_eps"]][0]) < 1e-9


@pytest.mark.parametrize("p", [1, 2])
def test_hessian_matches_score_differences(p):
    d, _ = random_design(n=50, p=p, seed=9)
    mu = random_mu(d, np.random.default_rng(9))
    H = lk.hessian(mu, d)
    v = mu.to_vector()
    J = np.zeros_like(H)
    for i in range(len(v)):
        h = 1e-5 * max(1.0, abs(v[i]))
        e = np.zeros_like(v)
        e[i] = h
        J[:, i] = (lk.score(v + e, d) - lk.score(v - e, d)) / (2 * h)
    assert np.allclose(H, H.T, atol=1e-10 * np.abs(H).max())
    assert np.all(np.abs(H - J) <= 1e-5 * np.maximum(np.abs(J), np.abs(H).max() * 1e-3))


def test_info_blocks_at_restricted_point(design):
    from spgrowth.inference import restricted_estimate

    mu = restricted_estimate(design)
    I = lk.info_matrix(mu, design)
    b = lk.blocks(design)
    assert np.abs(I[b["beta"], b["Gamma"]]).max() < 1e-10
    assert np.allclose(I, I.T, atol=1e-12)
    # restricted block is a maximum, so positive definite there
    free = np.r_[b["beta"], b["Gamma"], b["sigma_xi2"], b["Sigma_eps"]]
    assert np.linalg.eigvalsh(I[np.ix_(free, free)]).min() > 0


def test_info_indefinite_warns(design):
    mu = random_mu(design, np.random.default_rng(10)).copy(sigma_xi2=1e-3, rho=0.0)
    mu = mu.copy(delta=np.array([50.0]), Gamma=mu.Gamma + 50.0)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        lk.info_matrix(mu, design)
    assert any(issubclass(x.category, lk.ConditioningWarning) for x in w)


def test_exogenous_score_and_hessian(design):
    rng = np.random.default_rng(11)
    rho, beta, s2 = 0.3, rng.standard_normal(design.k1), 0.8
    v = np.concatenate([[rho], beta, [s2]])
    k = design.k1

    def f(x):
        return lk.loglik_exogenous(x[0], x[1:k + 1], x[-1], design)

    g = lk.score_exogenous(rho, beta, s2, design)
    assert np.allclose(g, fd_grad(f, v), rtol=1e-6, atol=1e-6)
    H = lk.hessian_exogenous(rho, beta, s2, design)
    J = np.column_stack([fd_grad(lambda x: lk.score_exogenous(x[0], x[1:k + 1], x[-1], design)[i], v)
                         for i in range(len(v))])
    assert np.allclose(H, J, rtol=1e-5, atol=1e-4)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_permutation_invariance(seed):
    d, _ = random_design(n=25, seed=seed % 1000)
    rng = np.random.default_rng(seed)
    mu = random_mu(d, rng)
    perm = rng.permutation(d.n)
    dp = d.permuted(perm)
    assert lk.loglik_endogenous(mu, dp) == pytest.approx(lk.loglik_endogenous(mu, d), rel=1e-11)
    assert np.allclose(lk.score(mu, dp), lk.score(mu, d), rtol=1e-8, atol=1e-8)
    assert np.allclose(lk.info_matrix(mu, dp), lk.info_matrix(mu, d), rtol=1e-8, atol=1e-10)

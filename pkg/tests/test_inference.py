import numpy as np
import pytest
from scipy import stats

from conftest import random_design
from spgrowth import estimators as es
from spgrowth import inference as inf
from spgrowth import likelihood as lk
from spgrowth import weights as wm
from spgrowth.errors import DomainError, InvalidInputError, NotNestedError
from test_estimators import growth_design, structural_design


def test_test_result_kind_checked():
    with pytest.raises(InvalidInputError):
        inf.TestResult(1.0, 1, 0.3, "t_test")
    r = inf.TestResult(1.0, 1, 0.3, "wald")
    assert r.to_dict() == {"kind": "wald", "statistic": 1.0, "df": 1, "p_value": 0.3}


def test_stars():
    assert [inf.stars(p) for p in (0.005, 0.03, 0.07, 0.12, 0.5)] == ["*", "**", "***", "&", ""]
    assert [inf.stars(p, True) for p in (0.005, 0.03, 0.07, 0.12, 0.5)] == ["***", "**", "*", "&", ""]
    assert inf.stars(float("nan")) == ""
    assert inf.star_legend() == "*: 1%, **: 5%, ***: 10%, &: 15%"


def test_ncx2_matches_scipy():
    rng = np.random.default_rng(0)
    for _ in range(50):
        df, nc, x = rng.integers(1, 5), rng.uniform(0, 30), rng.uniform(0.1, 60)
        ref = stats.ncx2.sf(x, df, nc)
        if ref > 1e-12:
            assert inf.ncx2_sf(x, df, nc) == pytest.approx(ref, rel=1e-8)
    assert inf.ncx2_sf(3.0, 2, 0.0) == pytest.approx(stats.chi2.sf(3.0, 2), rel=1e-12)
    assert inf.ncx2_power(1, 0.0) == pytest.approx(0.05, rel=1e-10)
    assert inf.ncx2_power(1, 5.0) < inf.ncx2_power(1, 10.0)


def test_restricted_estimate(design):
    mu = inf.restricted_estimate(design)
    assert mu.rho == 0.0 and np.all(mu.delta == 0)
    e = design.Y - design.X1 @ mu.beta
    assert np.abs(design.X1.T @ e).max() < 1e-8
    assert mu.sigma_xi2 == pytest.approx(e @ e / design.n)


def test_lm_and_rs_basic(design):
    for f, kind in ((inf.lm_delta, "lm_delta"), (inf.robust_rs_delta, "robust_rs_delta")):
        r = f(design)
        assert r.kind == kind and r.df == design.p and r.statistic >= 0
        assert r.p_value == pytest.approx(stats.chi2.sf(r.statistic, r.df))


def test_strong_endogeneity_detected():
    d, _ = random_design(n=200, seed=1, rho=0.0, delta=1.5)
    assert inf.lm_delta(d).p_value < 0.01
    assert inf.robust_rs_delta(d).p_value < 0.01


def test_robust_reduces_to_standard(monkeypatch, design):
    real = inf.info_blocks

    def decoupled(info, d):
        blk = real(info, d)
        blk["delta_rho.beta"] = np.zeros_like(blk["delta_rho.beta"])
        return blk

    monkeypatch.setattr(inf, "info_blocks", decoupled)
    mu = inf.restricted_estimate(design)
    b = lk.blocks(design)
    # with no coupling the robust score equals the standard one
    assert inf.robust_rs_delta(design, mu).statistic == pytest.approx(inf.lm_delta(design, mu).statistic, abs=1e-8)
    assert b["delta"].stop - b["delta"].start == design.p


def test_p2_statistics():
    d, _ = random_design(n=120, p=2, seed=2, delta=0.0, rho=0.0)
    r = inf.robust_rs_delta(d)
    assert r.df == 2 and 0 <= r.p_value <= 1


def test_noncentrality_trivial_and_ordering():
    rng = np.random.default_rng(3)
    for p in (1, 2):
        A = rng.standard_normal((p + 1, p + 1))
        M = A @ A.T + 0.1 * np.eye(p + 1)
        blk = {"delta.beta": M[:p, :p], "delta_rho.beta": M[:p, p:], "rho.beta": M[p:, p:]}
        assert inf.noncentrality(np.zeros(p), 0.0, blk) == (0.0, 0.0)
        dd = rng.standard_normal(p)
        phi1, phi2 = inf.noncentrality(dd, 0.0, blk)
        assert phi1 == pytest.approx(dd @ M[:p, :p] @ dd)
        assert 0 <= phi2 <= phi1 + 1e-12


def test_noncentrality_from_full_info(design):
    mu = inf.restricted_estimate(design)
    info = -lk.hessian(mu, design) / design.n
    a = inf.noncentrality([1.0], 0.5, info, design)
    b = inf.noncentrality([1.0], 0.5, inf.info_blocks(info, design))
    assert a == b


def iid_moran(n=200, seed=0):
    rng = np.random.default_rng(seed)
    W = wm.build_weights(rng.uniform(-60, 60, n), rng.uniform(-180, 180, n))
    return W, rng


def test_moran_positive_dependence():
    W, rng = iid_moran(150)
    hits = 0
    S = np.eye(150) - 0.8 * W.entries
    for s in range(40):
        # spatial autoregressive field; a single smoothing pass W x is too weak on a dense W
        r = inf.morans_i(np.linalg.solve(S, rng.standard_normal(150)), W)
        hits += r.statistic > 0 and r.extra["z"] > 2
    assert hits >= 38


def test_moran_guards():
    W, _ = iid_moran(20)
    with pytest.raises(DomainError):
        inf.morans_i(np.ones(20), W)
    with pytest.raises(InvalidInputError):
        inf.morans_i(np.ones(19), W)


def test_moran_oracle():
    W, rng = iid_moran(30)
    e = rng.standard_normal(30)
    A = W.entries
    c = e - e.mean()
    assert inf.morans_i(e, W).statistic == pytest.approx(30 / A.sum() * (c @ A @ c) / (c @ c), rel=1e-12)
    assert inf.morans_i(e, W).extra["expected"] == pytest.approx(-1 / 29)


def test_wald_restriction_under_null():
    crit = stats.chi2.ppf(0.95, 1)
    small = sum(inf.restriction_tests(es.fit_ols(growth_design(1000, seed=s, noise=0.3))).statistic < crit
                for s in range(20))
    assert small >= 18


def test_wald_detects_violation():
    d = growth_design(400, beta=(1.0, 1.0, -0.2, 0, 0), noise=0.1)
    assert inf.restriction_tests(es.fit_ols(d)).p_value < 1e-6


def test_lr_and_nesting():
    d = structural_design(n=150, seed=2, noise=0.3)
    u = es.fit_sdm_ml(d)
    c, _ = es.fit_constrained(d)
    r = inf.restriction_tests(u, c)
    assert r.kind == "lr" and r.df == 2 and r.statistic >= 0
    assert inf.restriction_tests(u, u.__class__(**{**u.__dict__, "model_tag": "constrained_exog"})).statistic == 0
    with pytest.raises(NotNestedError):
        inf.restriction_tests(u)
    with pytest.raises(NotNestedError):
        inf.restriction_tests(es.fit_endogenous_ml(d), c)
    with pytest.raises(NotNestedError):
        inf.restriction_tests(es.FitResult({"x": 1.0}, np.eye(1), 0.0, "ols"))


def test_phi_presence():
    s = es.StructuralParams(0.3, 0.0, 0.5, vcov=np.eye(3) * 0.01)
    assert inf.phi_presence_wald(s).statistic == 0.0
    s = es.StructuralParams(0.3, 0.2, 0.5, vcov=np.eye(3) * 0.01)
    assert inf.phi_presence_wald(s).statistic == pytest.approx(4.0)
    with pytest.raises(DomainError):
        inf.phi_presence_wald(es.StructuralParams(0.3, 0.2, 0.5))


def test_phi_presence_power():
    rej = 0
    for s in range(25):
        _, sp = es.fit_constrained(structural_design(n=400, seed=s, alpha=0.3, phi=0.4, gamma=0.5, noise=0.3))
        rej += inf.phi_presence_wald(sp).p_value < 0.05
    assert rej / 25 > 0.8


def test_social_return():
    r = inf.social_return(es.StructuralParams(0.276, 0.180, 0.557))
    assert r.estimate == pytest.approx(0.683, abs=2e-3) and r.precludes_endogenous_growth
    assert inf.social_return(es.StructuralParams(0.4, 0.0, 0.3)).estimate == 0.4
    with pytest.raises(DomainError):
        inf.social_return(es.StructuralParams(0.4, 0.1, 1.0))


def test_permutation_invariance(design):
    perm = np.random.default_rng(4).permutation(design.n)
    dp = design.permuted(perm)
    assert inf.lm_delta(dp).statistic == pytest.approx(inf.lm_delta(design).statistic, rel=1e-9)
    assert inf.robust_rs_delta(dp).statistic == pytest.approx(inf.robust_rs_delta(design).statistic, rel=1e-9)
    e = np.random.default_rng(5).standard_normal(design.n)
    assert inf.morans_i(e[perm], dp.W).statistic == pytest.approx(inf.morans_i(e, design.W).statistic, rel=1e-10)

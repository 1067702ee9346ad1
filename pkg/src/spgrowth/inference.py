"""Endogeneity score tests, restriction tests, Moran's I and noncentrality predictions.

Score tests are evaluated at the joint-null estimate (rho = 0, delta = 0):
OLS of Y on X1, OLS of Z on X2 and residual-moment variances.  All
information blocks are partialled on beta,

    I_{a.b} = I_aa - I_ab I_bb^{-1} I_ba,

and computed from the analytic Hessian divided by n.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import special, stats

from . import likelihood as lk
from .errors import (
    ConditioningError,
    DomainError,
    InvalidInputError,
    NotNestedError,
    SingularInformationError,
)
from .likelihood import ParamVector

TEST_KINDS = ("lm_delta", "robust_rs_delta", "wald", "lr", "morans_i")

# default marks (more stars = weaker evidence) and the usual ordering
STARS_LITERAL = ((0.01, "*"), (0.05, "**"), (0.10, "***"), (0.15, "&"))
STARS_CONVENTIONAL = ((0.01, "***"), (0.05, "**"), (0.10, "*"), (0.15, "&"))


@dataclass
class TestResult:
    statistic: float
    df: int
    p_value: float
    kind: str
    noncentrality: float = None
    extra: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if self.kind not in TEST_KINDS:
            raise InvalidInputError(f"unknown test kind {self.kind!r}")

    def to_dict(self):
        d = {"kind": self.kind, "statistic": float(self.statistic), "df": int(self.df),
             "p_value": float(self.p_value)}
        if self.noncentrality is not None:
            d["noncentrality"] = float(self.noncentrality)
        return d


def stars(p, conventional=False):
    """Significance marker for p-value ``p``; empty above 15%."""
    if p is None or not np.isfinite(p):
        return ""
    for cut, mark in (STARS_CONVENTIONAL if conventional else STARS_LITERAL):
        if p < cut:
            return mark
    return ""


def star_legend(conventional=False):
    table = STARS_CONVENTIONAL if conventional else STARS_LITERAL
    return ", ".join(f"{m}: {int(round(c * 100))}%" for c, m in table)


# ------------------------------------------------------ noncentral chi-square


def ncx2_sf(x, df, nc, rtol=1e-10):
    """Upper tail of the noncentral chi-square as a Poisson mixture of central tails.

    Terms are summed outward from the Poisson mode until the remaining
    Poisson mass is below ``rtol`` times the accumulated sum.
    """
    if nc < 0 or df <= 0:
        raise InvalidInputError("need nc >= 0 and df > 0")
    if x <= 0:
        return 1.0
    if nc == 0:
        return float(stats.chi2.sf(x, df))
    lam = 0.5 * nc
    j0 = int(lam)
    jmax = j0 + int(40 * math.sqrt(lam + 1.0)) + 200

    def term(j):
        w = math.exp(-lam + j * math.log(lam) - special.gammaln(j + 1))
        t = stats.chi2.sf(x, df + 2 * j)
        return w * t, t

    total = 0.0
    # central tails grow with j, so the upward remainder is bounded by the Poisson tail mass
    for j in range(j0, jmax):
        total += term(j)[0]
        if stats.poisson.sf(j, lam) <= rtol * total:
            break
    # downward the tails shrink, so the remainder is bounded by cdf(j - 1) times the current tail
    for j in range(j0 - 1, -1, -1):
        t, tail = term(j)
        total += t
        if stats.poisson.cdf(j - 1, lam) * tail <= rtol * total:
            break
    return float(min(total, 1.0))


def ncx2_power(df, nc, level=0.05):
    """Rejection probability of a chi-square(df) test at ``level`` under noncentrality ``nc``."""
    return ncx2_sf(stats.chi2.isf(level, df), df, nc)


# --------------------------------------------------------- restricted fit


def restricted_estimate(design):
    """Joint-null estimate with rho = 0 and delta = 0.

    beta by OLS of Y on X1, Gamma by OLS of Z on X2, sigma_xi2 and
    Sigma_eps from residual moments (divisor n).
    """
    beta, *_ = np.linalg.lstsq(design.X1, design.Y, rcond=None)
    Gamma, *_ = np.linalg.lstsq(design.X2, design.Z, rcond=None)
    e = design.Y - design.X1 @ beta
    E = design.Z - design.X2 @ Gamma
    n = design.n
    return ParamVector(0.0, beta, Gamma, float(e @ e) / n, E.T @ E / n, np.zeros(design.p))


def info_blocks(info, design):
    """Partialled information blocks I_{delta.beta}, I_{delta rho.beta}, I_{rho.beta}."""
    b = lk.blocks(design)
    ib, idl, ir = b["beta"], b["delta"], b["rho"]
    I = np.asarray(info)
    Ibb = I[ib, ib]
    try:
        Ibb_inv = np.linalg.inv(Ibb)
    except np.linalg.LinAlgError:
        raise SingularInformationError("I_beta,beta is singular") from None
    I_d = I[idl, idl] - I[idl, ib] @ Ibb_inv @ I[ib, idl]
    I_dr = I[idl, ir] - I[idl, ib] @ Ibb_inv @ I[ib, ir]
    I_r = I[ir, ir] - I[ir, ib] @ Ibb_inv @ I[ib, ir]
    return {"delta.beta": I_d, "delta_rho.beta": I_dr, "rho.beta": I_r}


def _restricted_pieces(design, mu=None):
    mu = restricted_estimate(design) if mu is None else mu
    b = lk.blocks(design)
    g = lk.score(mu, design) / design.n
    info = -lk.hessian(mu, design) / design.n
    info = 0.5 * (info + info.T)
    return mu, g[b["delta"]], g[b["rho"]], info_blocks(info, design)


def _chi2(stat, df, kind, **extra):
    return TestResult(float(stat), int(df), float(stats.chi2.sf(stat, df)), kind, extra=extra)


def lm_delta(design, restricted=None):
    """Standard LM test of delta = 0 assuming rho = 0; chi-square(p) under the joint null."""
    mu, L_d, _, blk = _restricted_pieces(design, restricted)
    I_d = blk["delta.beta"]
    try:
        stat = design.n * L_d @ np.linalg.solve(I_d, L_d)
    except np.linalg.LinAlgError:
        raise SingularInformationError("I_delta.beta is singular") from None
    return _chi2(max(float(stat), 0.0), design.p, "lm_delta")


def robust_rs_delta(design, restricted=None):
    """Robust Rao score test of delta = 0, immune to local misspecification of rho."""
    mu, L_d, L_r, blk = _restricted_pieces(design, restricted)
    I_d, I_dr, I_r = blk["delta.beta"], blk["delta_rho.beta"], blk["rho.beta"]
    if not abs(I_r[0, 0]) > 0:
        raise SingularInformationError("I_rho.beta is singular")
    adj = I_dr @ np.linalg.solve(I_r, np.eye(1))
    L_star = L_d - adj @ L_r
    V = I_d - adj @ I_dr.T
    V = 0.5 * (V + V.T)
    w = np.linalg.eigvalsh(V)
    if not w.min() > 0:
        raise ConditioningError("adjusted variance is not positive definite", float(w.min()))
    stat = design.n * L_star @ np.linalg.solve(V, L_star)
    return _chi2(max(float(stat), 0.0), design.p, "robust_rs_delta")


def noncentrality(delta_local, rho_local, info, design=None):
    """Noncentrality parameters (phi1, phi2) of the standard and robust tests.

    Parameters
    ----------
    delta_local : array_like
        Delta_delta, the local departure of delta scaled by sqrt(n).
    rho_local : float
        Delta_rho, likewise for rho.
    info : dict or ndarray
        Output of :func:`info_blocks`, or a full information matrix (then
        ``design`` is needed to locate the blocks), evaluated at mu0.
    """
    blk = info if isinstance(info, dict) else info_blocks(info, design)
    I_d, I_dr, I_r = blk["delta.beta"], blk["delta_rho.beta"], blk["rho.beta"]
    dd = np.atleast_1d(np.asarray(delta_local, dtype=float))
    dr = np.atleast_1d(np.asarray(rho_local, dtype=float))
    try:
        a = I_d @ dd + I_dr @ dr
        phi1 = float(a @ np.linalg.solve(I_d, a))
        V = I_d - I_dr @ np.linalg.solve(I_r, I_dr.T)
    except np.linalg.LinAlgError:
        raise SingularInformationError("singular information block") from None
    phi2 = float(dd @ V @ dd)
    return phi1, phi2


# --------------------------------------------------------------- Moran's I


def morans_i(residuals, W):
    """Moran's I of regression residuals with a normal-approximation z-score.

    Uses E[I] = -1/(n-1) and the variance under the normality assumption;
    both are approximations for regression residuals.
    """
    e = np.asarray(residuals, dtype=float).reshape(-1)
    A = W.entries if hasattr(W, "entries") else np.asarray(W, dtype=float)
    n = e.shape[0]
    if A.shape != (n, n):
        raise InvalidInputError("W and residuals disagree in size")
    e = e - e.mean()
    ee = float(e @ e)
    if not ee > 1e-300:
        raise DomainError("residuals have zero variance")
    S0 = A.sum()
    I = n / S0 * float(e @ A @ e) / ee
    S1 = 0.5 * np.sum((A + A.T) ** 2)
    S2 = np.sum((A.sum(axis=0) + A.sum(axis=1)) ** 2)
    EI = -1.0 / (n - 1)
    var = (n * n * S1 - n * S2 + 3 * S0 * S0) / (S0 * S0 * (n * n - 1)) - EI * EI
    z = (I - EI) / math.sqrt(var)
    return TestResult(I, 1, float(2 * stats.norm.sf(abs(z))), "morans_i",
                      extra={"z": z, "expected": EI, "variance": var})


# ------------------------------------------------------------ restrictions


def restriction_tests(unconstrained, constrained=None):
    """Test the theoretical restrictions.

    OLS fits get a Wald test of coef(lns) + coef(ln_ngd) = 0 (df 1) and need
    no constrained fit.  Spatial fits get LR = 2(lnL_u - lnL_c) with df 2.
    """
    if unconstrained.model_tag == "ols":
        est, V = unconstrained.estimates, unconstrained.vcov
        names = unconstrained.names
        try:
            i, j = names.index("lns"), names.index("ln_ngd")
        except ValueError:
            raise NotNestedError("OLS fit lacks lns / ln_ngd") from None
        r = np.zeros(len(names))
        r[[i, j]] = 1.0
        val = float(r @ unconstrained.coef)
        var = float(r @ V @ r)
        if not var > 0:
            raise SingularInformationError("Wald variance is not positive")
        return _chi2(val * val / var, 1, "wald")
    if constrained is None:
        raise NotNestedError("LR test needs a constrained fit")
    pairs = {"sdm_exog": "constrained_exog", "sar_endog": "constrained_endog"}
    if pairs.get(unconstrained.model_tag) != constrained.model_tag or unconstrained.nobs != constrained.nobs:
        raise NotNestedError(f"{constrained.model_tag} is not nested in {unconstrained.model_tag}")
    lr = 2.0 * (unconstrained.loglik - constrained.loglik)
    if lr < 0:
        if lr < -1e-6 * max(1.0, abs(unconstrained.loglik)):
            raise NotNestedError(f"constrained log-likelihood exceeds unconstrained by {-lr / 2:.3g}")
        lr = 0.0
    return _chi2(lr, 2, "lr")


def phi_presence_wald(structural):
    """Wald statistic (phi / se(phi))^2 for the presence of the home externality."""
    se = structural.se("phi")
    if not np.isfinite(se) or not np.isfinite(structural.phi):
        raise DomainError("standard error of phi is not finite")
    if se == 0:
        if structural.phi == 0:
            return _chi2(0.0, 1, "wald")
        raise DomainError("standard error of phi is zero")
    return _chi2((structural.phi / se) ** 2, 1, "wald")


@dataclass
class SocialReturn:
    estimate: float
    se: float
    precludes_endogenous_growth: bool

    @property
    def p_value(self):
        if not self.se > 0:
            return np.nan
        return float(2 * stats.norm.sf(abs(self.estimate / self.se)))


def social_return(structural):
    """alpha + phi / (1 - gamma), its delta-method se and whether it is below one."""
    if structural.gamma == 1.0:
        raise DomainError("gamma = 1 is a pole of the social return")
    val = structural.social_return
    return SocialReturn(float(val), float(structural.social_return_se), bool(val < 1.0))

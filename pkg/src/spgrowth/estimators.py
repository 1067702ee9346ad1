"""OLS, exogenous-W ML, endogenous-W control-function ML and constrained structural fits."""

from dataclasses import dataclass, field
import logging
import warnings

import numpy as np
from scipy import linalg, optimize, stats

from . import likelihood as lk
from .errors import CollinearityError, DomainError, UnidentifiedError
from .likelihood import ParamVector

log = logging.getLogger(__name__)

GRAD_TOL = 1e-6
REL_TOL = 1e-10
MAX_ITER = 500


@dataclass
class FitResult:
    """Point estimates, asymptotic covariance and fit diagnostics."""

    estimates: dict
    vcov: np.ndarray
    loglik: float
    model_tag: str
    convergence: dict = field(default_factory=dict)
    nobs: int = 0
    params: ParamVector = None
    extra: dict = field(default_factory=dict)

    @property
    def names(self):
        return list(self.estimates)

    @property
    def coef(self):
        return np.array(list(self.estimates.values()))

    @property
    def se(self):
        return dict(zip(self.estimates, np.sqrt(np.clip(np.diag(self.vcov), 0.0, None))))

    def pvalue(self, name):
        se = self.se[name]
        if not se > 0:
            return np.nan
        return float(2 * stats.norm.sf(abs(self.estimates[name] / se)))

    @property
    def converged(self):
        return self.convergence.get("status") == "converged"

    def to_dict(self):
        return {
            "model_tag": self.model_tag, "nobs": self.nobs, "loglik": self.loglik,
            "estimates": {k: float(v) for k, v in self.estimates.items()},
            "se": {k: float(v) for k, v in self.se.items()},
            "vcov": np.asarray(self.vcov).tolist(),
            "convergence": {k: (float(v) if isinstance(v, (np.floating, float)) else v)
                            for k, v in self.convergence.items()},
        }


@dataclass
class StructuralParams:
    """Capital share, home externality, interdependence and the aggregate social return.

    ``vcov`` is the delta-method covariance of (alpha, phi, gamma); entries
    are NaN where a component is not identified.
    """

    alpha: float
    phi: float = np.nan
    gamma: float = np.nan
    beta0: float = np.nan
    vcov: np.ndarray = None
    social_return_se: float = np.nan
    status: str = "ok"

    @property
    def social_return(self):
        if np.isnan(self.gamma):
            return self.alpha if np.isnan(self.phi) else np.nan
        if self.gamma == 1.0:
            return np.nan
        return self.alpha + self.phi / (1.0 - self.gamma)

    def se(self, name):
        if self.vcov is None:
            return np.nan
        i = ("alpha", "phi", "gamma").index(name)
        v = self.vcov[i, i]
        return float(np.sqrt(v)) if v >= 0 else np.nan

    def to_dict(self):
        return {"alpha": self.alpha, "phi": self.phi, "gamma": self.gamma, "beta0": self.beta0,
                "social_return": self.social_return, "social_return_se": self.social_return_se,
                "se": {k: self.se(k) for k in ("alpha", "phi", "gamma")}, "status": self.status}


# ------------------------------------------------------------------ structural


def forward_map(alpha, phi, gamma):
    """Reduced-form coefficients implied by (alpha, phi, gamma)."""
    k = 1.0 - alpha - phi
    beta1 = (alpha + phi) / k
    theta2 = alpha * gamma / k
    return {"beta1": beta1, "beta2": -beta1, "theta1": -theta2, "theta2": theta2, "rho": gamma}


def _structural_jacobian(beta1, theta1, rho):
    a = 1.0 + beta1
    da = np.array([theta1 / (rho * a * a), -1.0 / (rho * a), theta1 / (rho * rho * a)])
    dphi = np.array([1.0 / (a * a), 0.0, 0.0]) - da
    return np.vstack([da, dphi, [0.0, 0.0, 1.0]])


def recover_structural(beta1, theta1, rho, vcov=None, beta0=np.nan):
    """Invert the constraint map: (beta1, theta1, rho) -> (alpha, phi, gamma).

    ``vcov`` is the 3 x 3 covariance of (beta1, theta1, rho); when given, the
    delta-method covariance of (alpha, phi, gamma) and the standard error of
    the social return are attached.

    Raises
    ------
    UnidentifiedError
        If rho == 0 (alpha is not identified; ``alpha_plus_phi`` is) or
        beta1 == -1.
    """
    if 1.0 + beta1 == 0.0:
        raise UnidentifiedError("1 + beta1 = 0: capital shares not identified")
    if rho == 0.0:
        raise UnidentifiedError("rho = 0: alpha not identified separately from phi",
                                alpha_plus_phi=beta1 / (1.0 + beta1))
    gamma = rho
    alpha = -theta1 / (gamma * (1.0 + beta1))
    phi = beta1 / (1.0 + beta1) - alpha
    out = StructuralParams(alpha, phi, gamma, beta0)
    if vcov is not None:
        J = _structural_jacobian(beta1, theta1, rho)
        out.vcov = J @ np.asarray(vcov) @ J.T
        if gamma != 1.0:
            g = np.array([1.0, 1.0 / (1.0 - gamma), phi / (1.0 - gamma) ** 2])
            out.social_return_se = float(np.sqrt(max(g @ out.vcov @ g, 0.0)))
    return out


# ------------------------------------------------------------------------ OLS


def _column_index(design, names):
    if all(c in design.x1_names for c in names):
        return [design.x1_names.index(c) for c in names]
    raise CollinearityError(f"design lacks columns {names}")


def _ols(y, X):
    XtX = X.T @ X
    try:
        c = linalg.cho_factor(XtX)
    except linalg.LinAlgError:
        raise CollinearityError("regressor matrix is rank deficient") from None
    b = linalg.cho_solve(c, X.T @ y)
    e = y - X @ b
    return b, e, linalg.cho_solve(c, np.eye(X.shape[1]))


def fit_ols(design, columns=("const", "lns", "ln_ngd")):
    """Least squares of Y on the named X1 columns with classical covariance.

    Falls back to all X1 columns when the design does not carry the growth
    column names.
    """
    if all(c in design.x1_names for c in columns):
        idx = _column_index(design, columns)
        names = list(columns)
    else:
        idx = list(range(design.k1))
        names = list(design.x1_names)
    X = design.X1[:, idx]
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise CollinearityError("OLS regressors are rank deficient", names)
    b, e, XtXi = _ols(design.Y, X)
    n, k = X.shape
    rss = float(e @ e)
    s2 = rss / (n - k)
    s2_ml = rss / n
    ll = -0.5 * n * (lk.LOG_2PI + np.log(s2_ml) + 1.0) if s2_ml > 0 else np.inf
    return FitResult(
        dict(zip(names, b)), s2 * XtXi, ll, "ols",
        {"status": "converged", "iterations": 0, "grad_norm": 0.0}, n,
        extra={"residuals": e, "sigma2": s2, "X": X},
    )


def fit_ols_constrained(design):
    """OLS with the restriction coefficient(lns) = -coefficient(ln_ngd).

    Returns the fit and the implied capital share alpha = b / (1 + b) with its
    delta-method standard error.
    """
    i0, i1, i2 = _column_index(design, ("const", "lns", "ln_ngd"))
    X = np.column_stack([design.X1[:, i0], design.X1[:, i1] - design.X1[:, i2]])
    b, e, XtXi = _ols(design.Y, X)
    n = design.n
    s2 = float(e @ e) / (n - 2)
    vc = s2 * XtXi
    fit = FitResult({"const": b[0], "lns_minus_ln_ngd": b[1]}, vc,
                    -0.5 * n * (lk.LOG_2PI + np.log(float(e @ e) / n) + 1.0), "ols_constrained",
                    {"status": "converged", "iterations": 0, "grad_norm": 0.0}, n, extra={"residuals": e})
    a = b[1] / (1.0 + b[1])
    da = 1.0 / (1.0 + b[1]) ** 2
    sp = StructuralParams(a, beta0=b[0], vcov=np.diag([da * da * vc[1, 1], np.nan, np.nan]))
    sp.social_return_se = float(np.sqrt(da * da * vc[1, 1]))
    return fit, sp


# -------------------------------------------------------------- profile in rho


def _rho_profile(design, Xa):
    """Maximize the likelihood concentrated on rho for regressors ``Xa``.

    Returns (rho, coefficients, residuals).
    """
    Q, _ = np.linalg.qr(Xa)
    e0 = design.Y - Q @ (Q.T @ design.Y)
    e1 = design.WY - Q @ (Q.T @ design.WY)
    a, b, c = e0 @ e0, e0 @ e1, e1 @ e1
    n = design.n
    lo, hi = design.rho_interval

    def neg(rho):
        ssr = a - 2 * rho * b + rho * rho * c
        if not ssr > 0:
            return np.inf if ssr < 0 else -np.inf
        _, logdet = lk._filter_lu(rho, design)
        return 0.5 * n * np.log(ssr / n) - logdet

    res = optimize.minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10, "maxiter": 500})
    rho = float(res.x)
    coef, *_ = np.linalg.lstsq(Xa, design.Y - rho * design.WY, rcond=None)
    resid = design.Y - rho * design.WY - Xa @ coef
    return rho, coef, resid


def _exog_hessian_fit(design, rho, beta, s2):
    H = lk.hessian_exogenous(rho, beta, s2, design)
    g = lk.score_exogenous(rho, beta, s2, design)
    return H, g


def _newton_exog(design, rho, beta, s2, max_iter=20):
    """Newton refinement of (rho, beta, s2) for the exogenous likelihood."""
    v = np.concatenate([[rho], beta, [s2]])
    k = design.k1

    def f(v):
        return lk.loglik_exogenous(v[0], v[1:k + 1], v[-1], design)

    fv = f(v)
    it = 0
    for it in range(1, max_iter + 1):
        g = lk.score_exogenous(v[0], v[1:k + 1], v[-1], design)
        if np.abs(g).max() / design.n < 1e-10:
            it -= 1
            break
        H = lk.hessian_exogenous(v[0], v[1:k + 1], v[-1], design)
        step = _newton_direction(H, g)
        t = 1.0
        while t > 1e-10:
            cand = v + t * step
            try:
                if cand[-1] > 0:
                    fc = f(cand)
                    if fc >= fv - 1e-12 * abs(fv):
                        break
            except DomainError:
                pass
            t *= 0.5
        else:
            break
        v, fprev, fv = cand, fv, fc
        if abs(fv - fprev) <= REL_TOL * abs(fv) and np.abs(g).max() / design.n < GRAD_TOL:
            break
    return v, it


def _newton_direction(H, g):
    # ascent direction from the (possibly modified) negative Hessian
    A = -0.5 * (H + H.T)
    try:
        c = linalg.cho_factor(A)
        return linalg.cho_solve(c, g)
    except linalg.LinAlgError:
        w, V = np.linalg.eigh(A)
        w = np.maximum(np.abs(w), 1e-8 * max(1.0, np.abs(w).max()))
        return V @ ((V.T @ g) / w)


def fit_sdm_ml(design, tag="sdm_exog"):
    """ML for the spatial lag model with W treated as exogenous.

    rho is found by a bounded one-dimensional search of the concentrated
    likelihood (beta and sigma2 in closed form), then refined by Newton
    steps on the full likelihood.  Covariance is the inverse negative Hessian.
    """
    rho, beta, e = _rho_profile(design, design.X1)
    s2 = float(e @ e) / design.n
    v, iters = _newton_exog(design, rho, beta, s2)
    k = design.k1
    rho, beta, s2 = float(v[0]), v[1:k + 1], float(v[-1])
    H = lk.hessian_exogenous(rho, beta, s2, design)
    g = lk.score_exogenous(rho, beta, s2, design)
    gn = float(np.abs(g).max() / design.n)
    try:
        vcov = np.linalg.inv(-H)
    except np.linalg.LinAlgError:
        vcov = np.full_like(H, np.nan)
    names = ["rho"] + list(design.x1_names) + ["sigma2"]
    status = "converged" if gn < GRAD_TOL else "nonconvergent"
    if status != "converged":
        log.warning("exogenous ML did not converge: gradient %.3e", gn)
    return FitResult(
        dict(zip(names, v)), vcov, lk.loglik_exogenous(rho, beta, s2, design), tag,
        {"status": status, "iterations": iters, "grad_norm": gn}, design.n,
        extra={"residuals": design.Y - rho * design.WY - design.X1 @ beta, "sigma2": s2},
    )


# ---------------------------------------------------------- endogenous W, ML


def _scale_factors(design):
    c = design.Z.std(axis=0)
    c[~(c > 0)] = 1.0
    return c


def _scaled(design, c):
    return lk.Design(design.Y, design.X1, design.Z / c, design.X2, design.W, design.x1_names, design.x2_names,
                     design.z_names, dict(design.tag))


def _scale_transform(design, c):
    """Diagonal map from scaled-Z natural parameters to raw-Z natural parameters."""
    b = lk.blocks(design)
    t = np.ones(b["size"])
    t[b["Gamma"]] = np.repeat(c, design.k2)
    t[b["Sigma_eps"]] = [c[i] * c[j] for i, j in lk._vech_index(design.p)]
    t[b["delta"]] = 1.0 / c
    return t


def _start_auxiliary(design):
    Gamma, *_ = np.linalg.lstsq(design.X2, design.Z, rcond=None)
    E = design.Z - design.X2 @ Gamma
    return Gamma, E.T @ E / design.n, E


def _profile_start(design):
    # exact ML when X2 lies in the span of X1: Gamma by OLS, then SY on [X1, E]
    Gamma, Sigma, E = _start_auxiliary(design)
    rho, coef, resid = _rho_profile(design, np.column_stack([design.X1, E]))
    k = design.k1
    return ParamVector(rho, coef[:k], Gamma, float(resid @ resid) / design.n, Sigma, coef[k:])


def _exog_start(design):
    Gamma, Sigma, E = _start_auxiliary(design)
    rho, beta, e = _rho_profile(design, design.X1)
    return ParamVector(rho, beta, Gamma, float(e @ e) / design.n, Sigma, np.zeros(design.p))


def _ols_start(design):
    Gamma, Sigma, E = _start_auxiliary(design)
    beta, e, _ = _ols(design.Y, design.X1)
    return ParamVector(0.0, beta, Gamma, float(e @ e) / design.n, Sigma, np.zeros(design.p))


def _to_theta(mu, design):
    L = np.linalg.cholesky(mu.Sigma_eps)
    lv = []
    for i, j in lk._vech_index(design.p):
        lv.append(np.log(L[i, j]) if i == j else L[i, j])
    return np.concatenate([[mu.rho], mu.beta, mu.Gamma.ravel(order="F"), [np.log(mu.sigma_xi2)], lv, mu.delta])


def _from_theta(theta, design):
    b = lk.blocks(design)
    p = design.p
    L = np.zeros((p, p))
    for val, (i, j) in zip(theta[b["Sigma_eps"]], lk._vech_index(p)):
        L[i, j] = np.exp(val) if i == j else val
    return ParamVector(theta[0], theta[b["beta"]], theta[b["Gamma"]].reshape((design.k2, p), order="F"),
                       np.exp(theta[b["sigma_xi2"]][0]), L @ L.T, theta[b["delta"]]), L


def _theta_grad(g, mu, L, design):
    b = lk.blocks(design)
    p = design.p
    out = g.copy()
    out[b["sigma_xi2"]] = g[b["sigma_xi2"]] * mu.sigma_xi2
    G = np.zeros((p, p))
    for val, (i, j) in zip(g[b["Sigma_eps"]], lk._vech_index(p)):
        if i == j:
            G[i, i] = val
        else:
            G[i, j] = G[j, i] = 0.5 * val
    GL = 2.0 * G @ L
    out[b["Sigma_eps"]] = [GL[i, j] * (L[i, j] if i == j else 1.0) for i, j in lk._vech_index(p)]
    return out


def _quasi_newton(mu0, design, free=None, max_iter=MAX_ITER):
    """L-BFGS-B on the average log-likelihood in unconstrained coordinates."""
    theta0 = _to_theta(mu0, design)
    n = design.n
    lo, hi = design.rho_interval
    bounds = [(lo, hi)] + [(None, None)] * (len(theta0) - 1)
    mask = np.ones(len(theta0), bool) if free is None else free
    fixed = theta0.copy()

    def full(t):
        x = fixed.copy()
        x[mask] = t
        return x

    def fun(t):
        x = full(t)
        try:
            mu, L = _from_theta(x, design)
            f = lk.loglik_endogenous(mu, design)
            g = _theta_grad(lk.score(mu, design), mu, L, design)
        except (DomainError, np.linalg.LinAlgError, FloatingPointError):
            return np.inf, np.zeros(mask.sum())
        if not np.isfinite(f):
            return np.inf, np.zeros(mask.sum())
        log.debug("qn: f=%.12g |g|=%.3e", f / n, np.abs(g[mask]).max() / n)
        return -f / n, -g[mask] / n

    with np.errstate(over="ignore", invalid="ignore"):
        res = optimize.minimize(fun, theta0[mask], jac=True, method="L-BFGS-B",
                                bounds=[bd for bd, m in zip(bounds, mask) if m],
                                options={"maxiter": max_iter, "ftol": 1e-15, "gtol": 1e-10})
    mu, _ = _from_theta(full(res.x), design)
    return mu, int(res.nit)


def _valid(mu, design):
    lo, hi = design.rho_interval
    if not lo <= mu.rho <= hi or not mu.sigma_xi2 > 0:
        return False
    try:
        np.linalg.cholesky(mu.Sigma_eps)
    except np.linalg.LinAlgError:
        return False
    return True


def _newton(mu, design, free=None, max_iter=50, grad_tol=1e-9):
    """Damped Newton iterations on the natural parameters; returns (mu, iterations, converged)."""
    v = mu.to_vector()
    mask = np.ones(len(v), bool) if free is None else free
    k1, k2, p, n = design.k1, design.k2, design.p, design.n

    def unpack(x):
        return ParamVector.from_vector(x, k1, k2, p)

    fv = lk.loglik_endogenous(unpack(v), design)
    it = 0
    converged = False
    while it < max_iter:
        g = lk.score(unpack(v), design)[mask]
        if np.abs(g).max() / n < grad_tol:
            converged = True
            break
        H = lk.hessian(unpack(v), design)[np.ix_(mask, mask)]
        step = np.zeros(len(v))
        step[mask] = _newton_direction(H, g)
        it += 1
        t = 1.0
        accepted = False
        while t > 1e-12:
            cand = v + t * step
            mc = unpack(cand)
            if _valid(mc, design):
                try:
                    fc = lk.loglik_endogenous(mc, design)
                except DomainError:
                    fc = -np.inf
                if fc >= fv - 1e-13 * abs(fv):
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            break
        v, fprev, fv = cand, fv, fc
        if abs(fv - fprev) <= REL_TOL * max(1.0, abs(fv)) and np.abs(g).max() / n < GRAD_TOL:
            gn = np.abs(lk.score(unpack(v), design)[mask]).max() / n
            if gn < GRAD_TOL:
                converged = True
                break
    return unpack(v), it, converged


def _perturb(mu, design, scale=0.1):
    lo, hi = design.rho_interval
    rho = mu.rho + scale if mu.rho + scale < hi else mu.rho - scale
    return mu.copy(rho=max(lo, rho), delta=mu.delta * 0.5)


def fit_endogenous_ml(design, start=None, multistart=True, fix_delta_zero=False, tag="sar_endog"):
    """Control-function ML of the SAR model with W built from Z.

    Parameters
    ----------
    design : Design
    start : ParamVector, optional
        If given, iterate from this point only (Newton, falling back to
        quasi-Newton) instead of the multi-start policy.
    multistart : bool
        Run three starts (exogenous warm start, OLS start with rho = 0, and a
        perturbation of the better of the two) and keep the best.  With
        ``False`` only the warm start is used.  When X2 lies in the span of
        X1 the warm start is the exact maximizer of the rho-profile.
    fix_delta_zero : bool
        Impose delta = 0; the fit then separates into exogenous SAR ML and
        OLS of the auxiliary equation.

    Returns
    -------
    FitResult
        ``vcov`` is the inverse of the negative Hessian (n times the
        information) at the optimum.
    """
    c = _scale_factors(design)
    ds = _scaled(design, c)
    T = _scale_transform(design, c)
    b = lk.blocks(design)
    free = np.ones(b["size"], bool)
    if fix_delta_zero:
        free[b["delta"]] = False

    def to_scaled(mu):
        return ParamVector.from_vector(mu.to_vector() / T, design.k1, design.k2, design.p)

    candidates = []
    iters_total = 0
    if start is not None:
        mu0 = to_scaled(start)
        if fix_delta_zero:
            mu0 = mu0.copy(delta=np.zeros(design.p))
        mu, it, ok = _newton(mu0, ds, free)
        iters_total += it
        if not ok:
            mu, it2 = _quasi_newton(mu0, ds, free)
            mu, it3, ok = _newton(mu, ds, free)
            iters_total += it2 + it3
        candidates.append(mu)
    else:
        # (start, exact): exact starts already maximize the likelihood up to rounding
        if fix_delta_zero:
            starts = [(_exog_start(ds), True)]
        elif ds.x2_nested_in_x1:
            starts = [(_profile_start(ds), True)]
        else:
            starts = [(_exog_start(ds), False)]
        if multistart:
            starts.append((_ols_start(ds), False))
        for s, exact in starts:
            if not exact:
                s, it = _quasi_newton(s, ds, free)
                iters_total += it
            mu, it, _ = _newton(s, ds, free)
            iters_total += it
            candidates.append(mu)
        if multistart:
            best = max(candidates, key=lambda m: lk.loglik_endogenous(m, ds))
            s, it = _quasi_newton(_perturb(best, ds), ds, free)
            mu, it2, _ = _newton(s, ds, free)
            iters_total += it + it2
            candidates.append(mu)
    lls = [lk.loglik_endogenous(m, ds) for m in candidates]
    mu_s = candidates[int(np.argmax(lls))]
    g = lk.score(mu_s, ds)[free]
    gn = float(np.abs(g).max() / design.n)
    status = "converged" if gn < GRAD_TOL else "nonconvergent"
    if status != "converged":
        log.warning("endogenous ML did not converge: gradient %.3e", gn)

    H = lk.hessian(mu_s, ds)
    vcov_s = np.full_like(H, 0.0)
    try:
        vcov_s[np.ix_(free, free)] = np.linalg.inv(-H[np.ix_(free, free)])
    except np.linalg.LinAlgError:
        vcov_s[:] = np.nan
    vcov = vcov_s * np.outer(T, T)
    mu = ParamVector.from_vector(mu_s.to_vector() * T, design.k1, design.k2, design.p)
    ll = lk.loglik_endogenous(mu, design)
    names = lk.param_names(design)
    E, xi = lk._pieces(mu, design)
    return FitResult(
        dict(zip(names, mu.to_vector())), vcov, ll, tag,
        {"status": status, "iterations": iters_total, "grad_norm": gn, "starts": len(candidates)},
        design.n, params=mu, extra={"residuals": xi, "control": E},
    )


# ----------------------------------------------------------------- constrained


def constrained_design(design):
    """Impose coefficient(ln_ngd) = -coefficient(lns) and likewise for their spatial lags."""
    i = _column_index(design, ("const", "lns", "ln_ngd", "W_lns", "W_ln_ngd"))
    X = design.X1
    Xc = np.column_stack([X[:, i[0]], X[:, i[1]] - X[:, i[2]], X[:, i[3]] - X[:, i[4]]])
    return design.with_x1(Xc, ("const", "lns_minus_ln_ngd", "W_lns_minus_W_ln_ngd"))


def fit_constrained(design, endogenous=False, multistart=True):
    """Constrained spatial fit and the structural parameters it implies.

    The restrictions are linear in the reduced form, and (beta1, theta1, rho)
    maps one-to-one onto (alpha, phi, gamma) away from rho = 0 and
    beta1 = -1, so the fit is done in reduced form and mapped back with
    delta-method covariance.

    Returns
    -------
    (FitResult, StructuralParams)
    """
    dc = constrained_design(design)
    if endogenous:
        fit = fit_endogenous_ml(dc, multistart=multistart, tag="constrained_endog")
        names = ["beta[lns_minus_ln_ngd]", "beta[W_lns_minus_W_ln_ngd]", "rho"]
        b0 = fit.estimates["beta[const]"]
    else:
        fit = fit_sdm_ml(dc, tag="constrained_exog")
        names = ["lns_minus_ln_ngd", "W_lns_minus_W_ln_ngd", "rho"]
        b0 = fit.estimates["const"]
    idx = [fit.names.index(k) for k in names]
    b1, t1, rho = (fit.estimates[k] for k in names)
    V = fit.vcov[np.ix_(idx, idx)]
    try:
        sp = recover_structural(b1, t1, rho, V, beta0=b0)
    except UnidentifiedError as exc:
        warnings.warn(str(exc), stacklevel=2)
        sp = StructuralParams(np.nan, np.nan, rho, b0, status=str(exc))
    return fit, sp

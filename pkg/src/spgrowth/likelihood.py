"""Design matrices, spatial filter and the SAR likelihoods with exogenous or endogenous W.

The endogenous-W model is the control-function system

    Y = rho W Y + X1 beta + (Z - X2 Gamma) delta + xi,   xi ~ N(0, s2 I)
    Z = X2 Gamma + eps,                                  eps_i ~ N(0, Sigma)

with W built from Z.  Parameters are packed in the order
(rho, beta, vec(Gamma), s2, vech(Sigma), delta); vec is column-major and
vech stacks the lower triangle column by column.
"""

from dataclasses import dataclass, field
from functools import cached_property
import logging
import warnings

import numpy as np
from scipy import linalg

from .errors import CollinearityError, DimensionError, DomainError
from .weights import WeightsMatrix

log = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)
RHO_BUFFER = 1e-6


class ConditioningWarning(UserWarning):
    pass


def _check_rank(X, names, what):
    rank = np.linalg.matrix_rank(X)
    if rank < X.shape[1]:
        # find a minimal dependent set: drop columns greedily
        dependent = []
        keep = []
        for j in range(X.shape[1]):
            trial = keep + [j]
            if np.linalg.matrix_rank(X[:, trial]) < len(trial):
                dependent.append(names[j])
            else:
                keep.append(j)
        raise CollinearityError(f"{what} is rank deficient; collinear columns: {', '.join(dependent)}", dependent)


@dataclass(frozen=True, eq=False)
class Design:
    """Immutable model data.  ``W`` is a dense row-normalized matrix."""

    Y: np.ndarray
    X1: np.ndarray
    Z: np.ndarray
    X2: np.ndarray
    W: np.ndarray
    x1_names: tuple = ()
    x2_names: tuple = ()
    z_names: tuple = ()
    tag: dict = field(default_factory=dict)

    def __post_init__(self):
        W = self.W.entries if isinstance(self.W, WeightsMatrix) else self.W
        arrays = {
            "Y": np.asarray(self.Y, dtype=float).reshape(-1),
            "X1": np.atleast_2d(np.asarray(self.X1, dtype=float)),
            "Z": np.asarray(self.Z, dtype=float).reshape(len(self.Y), -1),
            "X2": np.atleast_2d(np.asarray(self.X2, dtype=float)),
            "W": np.asarray(W, dtype=float),
        }
        n = arrays["Y"].shape[0]
        for k in ("X1", "Z", "X2"):
            if arrays[k].shape[0] != n:
                raise DimensionError(f"{k} has {arrays[k].shape[0]} rows, expected {n}")
        if arrays["W"].shape != (n, n):
            raise DimensionError(f"W has shape {arrays['W'].shape}, expected {(n, n)}")
        for k, a in arrays.items():
            a = a.copy()
            a.setflags(write=False)
            object.__setattr__(self, k, a)
        k1, k2, p = arrays["X1"].shape[1], arrays["X2"].shape[1], arrays["Z"].shape[1]
        object.__setattr__(self, "x1_names", tuple(self.x1_names) or tuple(f"x1_{j}" for j in range(k1)))
        object.__setattr__(self, "x2_names", tuple(self.x2_names) or tuple(f"x2_{j}" for j in range(k2)))
        object.__setattr__(self, "z_names", tuple(self.z_names) or tuple(f"z{j}" for j in range(p)))
        _check_rank(self.X1, self.x1_names, "X1")
        _check_rank(self.X2, self.x2_names, "X2")

    @property
    def n(self):
        return self.Y.shape[0]

    @property
    def k1(self):
        return self.X1.shape[1]

    @property
    def k2(self):
        return self.X2.shape[1]

    @property
    def p(self):
        return self.Z.shape[1]

    @cached_property
    def WY(self):
        return self.W @ self.Y

    @cached_property
    def rho_interval(self):
        return admissible_interval(self.W)

    @cached_property
    def x2_nested_in_x1(self):
        """True when every X2 column lies in the column span of X1."""
        coef, *_ = np.linalg.lstsq(self.X1, self.X2, rcond=None)
        resid = self.X2 - self.X1 @ coef
        return bool(np.all(np.abs(resid) <= 1e-9 * (1.0 + np.abs(self.X2).max())))

    def with_x1(self, X1, names):
        return Design(self.Y, X1, self.Z, self.X2, self.W, names, self.x2_names, self.z_names, dict(self.tag))

    def with_y(self, Y):
        return Design(Y, self.X1, self.Z, self.X2, self.W, self.x1_names, self.x2_names, self.z_names, dict(self.tag))

    def permuted(self, order):
        o = np.asarray(order)
        return Design(self.Y[o], self.X1[o], self.Z[o], self.X2[o], self.W[np.ix_(o, o)], self.x1_names,
                      self.x2_names, self.z_names, dict(self.tag))


GROWTH_X1 = ("const", "lns", "ln_ngd", "W_lns", "W_ln_ngd")
GROWTH_X2 = ("const", "lns")


def build_design(sample, W, z=None):
    """Growth design: X1 = [1, lns, ln_ngd, W lns, W ln_ngd], X2 = [1, lns], Z = GDI."""
    Wd = W.entries if isinstance(W, WeightsMatrix) else np.asarray(W, dtype=float)
    n = sample.n
    if Wd.shape != (n, n):
        raise DimensionError(f"W has shape {Wd.shape} for a sample of {n} units")
    one = np.ones(n)
    X1 = np.column_stack([one, sample.lns, sample.ln_ngd, Wd @ sample.lns, Wd @ sample.ln_ngd])
    X2 = np.column_stack([one, sample.lns])
    Z = sample.z if z is None else z
    tag = dict(W.kernel_tag) if isinstance(W, WeightsMatrix) else {}
    return Design(sample.lny, X1, np.asarray(Z, float).reshape(n, -1), X2, Wd, GROWTH_X1, GROWTH_X2, ("z",), tag)


def admissible_interval(W):
    """Open interval of rho for which I - rho W is nonsingular, with a small buffer.

    The lower end is 1/lambda_min for the most negative real eigenvalue of W
    (-1 when there is none); the upper end is 1/lambda_max.
    """
    W = W.entries if isinstance(W, WeightsMatrix) else np.asarray(W)
    lam = linalg.eigvals(W)
    scale = max(1.0, np.abs(lam).max())
    real = lam.real[np.abs(lam.imag) <= 1e-10 * scale]
    neg = real[real < 0]
    lo = 1.0 / neg.min() if len(neg) else -1.0
    pos = real[real > 0]
    hi = 1.0 / pos.max() if len(pos) else 1.0
    return (lo + RHO_BUFFER, hi - RHO_BUFFER)


def _check_rho(rho, interval):
    if not interval[0] <= rho <= interval[1]:
        raise DomainError(f"rho = {rho!r} outside admissible interval ({interval[0]:.6g}, {interval[1]:.6g})")


def spatial_filter_logdet(rho, W, interval=None):
    """S = I - rho W and ln|det S| via LU with partial pivoting."""
    Wd = W.entries if isinstance(W, WeightsMatrix) else np.asarray(W, dtype=float)
    if interval is None:
        interval = admissible_interval(Wd)
    _check_rho(rho, interval)
    S = np.eye(Wd.shape[0]) - rho * Wd
    lu, _ = linalg.lu_factor(S, check_finite=False)
    return S, float(np.sum(np.log(np.abs(np.diag(lu)))))


def logdet_eigen(rho, W):
    """ln|det(I - rho W)| as a sum over eigenvalues; reference implementation for tests."""
    Wd = W.entries if isinstance(W, WeightsMatrix) else np.asarray(W)
    lam = linalg.eigvals(Wd)
    return float(np.sum(np.log(np.abs(1.0 - rho * lam))))


def _filter_lu(rho, design):
    _check_rho(rho, design.rho_interval)
    S = np.eye(design.n) - rho * design.W
    lu = linalg.lu_factor(S, check_finite=False)
    return lu, float(np.sum(np.log(np.abs(np.diag(lu[0])))))


# --------------------------------------------------------------------- params


def _vech_index(p):
    return [(i, j) for j in range(p) for i in range(j, p)]


def vech(M):
    return np.array([M[i, j] for i, j in _vech_index(M.shape[0])])


def unvech(v, p):
    M = np.zeros((p, p))
    for val, (i, j) in zip(v, _vech_index(p)):
        M[i, j] = M[j, i] = val
    return M


def _vech_basis(p):
    out = []
    for i, j in _vech_index(p):
        D = np.zeros((p, p))
        D[i, j] = D[j, i] = 1.0
        out.append(D)
    return out


@dataclass
class ParamVector:
    """Full parameter of the endogenous-W likelihood.

    ``Sigma_eps`` is the p x p covariance of the auxiliary disturbance and
    ``delta`` the loading of the control function Z - X2 Gamma.
    """

    rho: float
    beta: np.ndarray
    Gamma: np.ndarray
    sigma_xi2: float
    Sigma_eps: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        self.rho = float(self.rho)
        self.beta = np.asarray(self.beta, dtype=float).reshape(-1)
        self.delta = np.asarray(self.delta, dtype=float).reshape(-1)
        p = self.delta.shape[0]
        self.Gamma = np.asarray(self.Gamma, dtype=float).reshape(-1, p)
        self.Sigma_eps = np.asarray(self.Sigma_eps, dtype=float).reshape(p, p)
        self.sigma_xi2 = float(self.sigma_xi2)

    @property
    def p(self):
        return self.delta.shape[0]

    def to_vector(self):
        return np.concatenate([[self.rho], self.beta, self.Gamma.ravel(order="F"), [self.sigma_xi2],
                               vech(self.Sigma_eps), self.delta])

    @classmethod
    def from_vector(cls, v, k1, k2, p):
        v = np.asarray(v, dtype=float)
        i = 1
        beta = v[i:i + k1]; i += k1
        Gamma = v[i:i + k2 * p].reshape((k2, p), order="F"); i += k2 * p
        s2 = v[i]; i += 1
        m = p * (p + 1) // 2
        Sigma = unvech(v[i:i + m], p); i += m
        delta = v[i:i + p]
        return cls(v[0], beta, Gamma, s2, Sigma, delta)

    def copy(self, **changes):
        d = dict(rho=self.rho, beta=self.beta.copy(), Gamma=self.Gamma.copy(), sigma_xi2=self.sigma_xi2,
                 Sigma_eps=self.Sigma_eps.copy(), delta=self.delta.copy())
        d.update(changes)
        return ParamVector(**d)


def param_names(design=None, x1_names=None, x2_names=None, z_names=None):
    """Labels of the packed parameter vector, from a design or from name tuples."""
    if design is not None:
        x1_names, x2_names, z_names = design.x1_names, design.x2_names, design.z_names
    p = len(z_names)
    names = ["rho"] + [f"beta[{c}]" for c in x1_names]
    names += [f"Gamma[{r},{c}]" for c in z_names for r in x2_names]
    names += ["sigma_xi2"]
    names += [f"Sigma_eps[{z_names[i]},{z_names[j]}]" for i, j in _vech_index(p)]
    names += [f"delta[{c}]" for c in z_names]
    return names


def blocks(design):
    """Slices of each parameter group in the packed vector."""
    k1, k2, p = design.k1, design.k2, design.p
    i = 0
    out = {"rho": slice(0, 1)}
    i = 1
    out["beta"] = slice(i, i + k1); i += k1
    out["Gamma"] = slice(i, i + k2 * p); i += k2 * p
    out["sigma_xi2"] = slice(i, i + 1); i += 1
    m = p * (p + 1) // 2
    out["Sigma_eps"] = slice(i, i + m); i += m
    out["delta"] = slice(i, i + p); i += p
    out["size"] = i
    return out


def _as_params(mu, design):
    if isinstance(mu, ParamVector):
        return mu
    return ParamVector.from_vector(mu, design.k1, design.k2, design.p)


def _check_params(mu):
    if not mu.sigma_xi2 > 0:
        raise DomainError("sigma_xi2 must be positive")
    try:
        L = np.linalg.cholesky(mu.Sigma_eps)
    except np.linalg.LinAlgError:
        raise DomainError("Sigma_eps is not positive definite") from None
    return L


# ---------------------------------------------------------------- likelihoods


def loglik_exogenous(rho, beta, sigma2, design):
    """Gaussian SAR log-likelihood of Y given X1 with W treated as fixed."""
    if not sigma2 > 0:
        raise DomainError("sigma2 must be positive")
    _, logdet = _filter_lu(rho, design)
    e = design.Y - rho * design.WY - design.X1 @ np.asarray(beta, float)
    n = design.n
    return -0.5 * n * (LOG_2PI + np.log(sigma2)) + logdet - 0.5 * (e @ e) / sigma2


def loglik_auxiliary(Gamma, Sigma_eps, design):
    """Gaussian log-likelihood of the auxiliary equation Z = X2 Gamma + eps."""
    p = design.p
    Gamma = np.asarray(Gamma, float).reshape(design.k2, p)
    Sigma = np.asarray(Sigma_eps, float).reshape(p, p)
    try:
        L = np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError:
        raise DomainError("Sigma_eps is not positive definite") from None
    E = design.Z - design.X2 @ Gamma
    U = linalg.solve_triangular(L, E.T, lower=True)
    n = design.n
    return -0.5 * n * p * LOG_2PI - n * np.sum(np.log(np.diag(L))) - 0.5 * np.sum(U * U)


def _pieces(mu, design):
    E = design.Z - design.X2 @ mu.Gamma
    xi = design.Y - mu.rho * design.WY - design.X1 @ mu.beta - E @ mu.delta
    return E, xi


def loglik_endogenous(mu, design):
    """Control-function log-likelihood of (Y, Z) with W built from Z."""
    mu = _as_params(mu, design)
    L = _check_params(mu)
    _, logdet = _filter_lu(mu.rho, design)
    E, xi = _pieces(mu, design)
    n, p = design.n, design.p
    U = linalg.solve_triangular(L, E.T, lower=True)
    return (-0.5 * n * (1 + p) * LOG_2PI - 0.5 * n * np.log(mu.sigma_xi2) + logdet
            - n * np.sum(np.log(np.diag(L))) - 0.5 * np.sum(U * U) - 0.5 * (xi @ xi) / mu.sigma_xi2)


def _sigma_grad_matrix(Sinv, A, n):
    # derivative of -(n/2) ln|Sigma| - tr(Sigma^-1 A)/2 w.r.t. an unconstrained Sigma
    return -0.5 * n * Sinv + 0.5 * Sinv @ A @ Sinv


def score(mu, design):
    """Analytic gradient of ``loglik_endogenous`` in the packed parameter order."""
    mu = _as_params(mu, design)
    _check_params(mu)
    lu, _ = _filter_lu(mu.rho, design)
    E, xi = _pieces(mu, design)
    s2 = mu.sigma_xi2
    n, p = design.n, design.p
    trA = np.trace(linalg.lu_solve(lu, design.W, check_finite=False))
    Sinv = np.linalg.inv(mu.Sigma_eps)
    G = _sigma_grad_matrix(Sinv, E.T @ E, n)
    g_gamma = design.X2.T @ E @ Sinv - np.outer(design.X2.T @ xi, mu.delta) / s2
    out = np.concatenate([
        [-trA + (xi @ design.WY) / s2],
        design.X1.T @ xi / s2,
        g_gamma.ravel(order="F"),
        [-0.5 * n / s2 + 0.5 * (xi @ xi) / s2 ** 2],
        [np.sum(G * D) for D in _vech_basis(p)],
        E.T @ xi / s2,
    ])
    if log.isEnabledFor(logging.DEBUG):
        log.debug("score at rho=%.6g: |g|max=%.3e", mu.rho, np.abs(out).max())
    return out


def hessian(mu, design):
    """Analytic Hessian of ``loglik_endogenous``."""
    mu = _as_params(mu, design)
    _check_params(mu)
    lu, _ = _filter_lu(mu.rho, design)
    E, xi = _pieces(mu, design)
    s2, d = mu.sigma_xi2, mu.delta
    n, p, k2 = design.n, design.p, design.k2
    X1, X2, WY = design.X1, design.X2, design.WY
    A = linalg.lu_solve(lu, design.W, check_finite=False)
    Sinv = np.linalg.inv(mu.Sigma_eps)
    EE = E.T @ E
    basis = _vech_basis(p)
    b = blocks(design)
    H = np.zeros((b["size"], b["size"]))

    def put(r, c, val):
        val = np.asarray(val, float).reshape(H[b[r], b[c]].shape)
        H[b[r], b[c]] = val
        if r != c:
            H[b[c], b[r]] = val.T

    put("rho", "rho", -np.sum(A * A.T) - (WY @ WY) / s2)
    put("rho", "beta", -(X1.T @ WY) / s2)
    put("rho", "Gamma", np.outer(X2.T @ WY, d).ravel(order="F") / s2)
    put("rho", "sigma_xi2", -(xi @ WY) / s2 ** 2)
    put("rho", "delta", -(E.T @ WY) / s2)
    put("beta", "beta", -(X1.T @ X1) / s2)
    put("beta", "Gamma", np.kron(d[None, :], X1.T @ X2) / s2)
    put("beta", "sigma_xi2", -(X1.T @ xi) / s2 ** 2)
    put("beta", "delta", -(X1.T @ E) / s2)
    put("Gamma", "Gamma", -np.kron(Sinv + np.outer(d, d) / s2, X2.T @ X2))
    put("Gamma", "sigma_xi2", np.outer(X2.T @ xi, d).ravel(order="F") / s2 ** 2)
    g_sig = np.empty((k2 * p, len(basis)))
    base = X2.T @ E
    for l, D in enumerate(basis):
        g_sig[:, l] = (-base @ Sinv @ D @ Sinv).ravel(order="F")
    put("Gamma", "Sigma_eps", g_sig)
    g_del = np.empty((k2 * p, p))
    X2xi = X2.T @ xi
    for m in range(p):
        em = np.zeros(p)
        em[m] = 1.0
        g_del[:, m] = ((np.outer(X2.T @ E[:, m], d) - np.outer(X2xi, em)) / s2).ravel(order="F")
    put("Gamma", "delta", g_del)
    put("sigma_xi2", "sigma_xi2", 0.5 * n / s2 ** 2 - (xi @ xi) / s2 ** 3)
    put("sigma_xi2", "delta", -(E.T @ xi) / s2 ** 2)
    m = len(basis)
    hss = np.empty((m, m))
    SAS = Sinv @ EE @ Sinv
    for l, Dl in enumerate(basis):
        dG = 0.5 * n * Sinv @ Dl @ Sinv - 0.5 * Sinv @ Dl @ SAS - 0.5 * SAS @ Dl @ Sinv
        for k, Dk in enumerate(basis):
            hss[k, l] = np.sum(dG * Dk)
    put("Sigma_eps", "Sigma_eps", hss)
    put("delta", "delta", -EE / s2)
    return H


def info_matrix(mu, design):
    """Average negative Hessian, -(1/n) d2 lnL / dmu dmu'.

    Warns with ``ConditioningWarning`` when the matrix is not positive
    semi-definite at the evaluation point.
    """
    info = -hessian(mu, design) / design.n
    info = 0.5 * (info + info.T)
    ev = np.linalg.eigvalsh(info)
    if ev.min() < -1e-10 * max(1.0, ev.max()):
        warnings.warn(f"information matrix is indefinite (min eigenvalue {ev.min():.3e})", ConditioningWarning,
                      stacklevel=2)
    return info


def score_exogenous(rho, beta, sigma2, design):
    """Gradient of ``loglik_exogenous`` over (rho, beta, sigma2)."""
    lu, _ = _filter_lu(rho, design)
    e = design.Y - rho * design.WY - design.X1 @ beta
    trA = np.trace(linalg.lu_solve(lu, design.W, check_finite=False))
    return np.concatenate([[-trA + (e @ design.WY) / sigma2], design.X1.T @ e / sigma2,
                           [-0.5 * design.n / sigma2 + 0.5 * (e @ e) / sigma2 ** 2]])


def hessian_exogenous(rho, beta, sigma2, design):
    lu, _ = _filter_lu(rho, design)
    A = linalg.lu_solve(lu, design.W, check_finite=False)
    e = design.Y - rho * design.WY - design.X1 @ beta
    X1, WY, s2, k = design.X1, design.WY, sigma2, design.k1
    H = np.zeros((k + 2, k + 2))
    H[0, 0] = -np.sum(A * A.T) - (WY @ WY) / s2
    H[0, 1:k + 1] = H[1:k + 1, 0] = -(X1.T @ WY) / s2
    H[0, -1] = H[-1, 0] = -(e @ WY) / s2 ** 2
    H[1:k + 1, 1:k + 1] = -(X1.T @ X1) / s2
    H[1:k + 1, -1] = H[-1, 1:k + 1] = -(X1.T @ e) / s2 ** 2
    H[-1, -1] = 0.5 * design.n / s2 ** 2 - (e @ e) / s2 ** 3
    return H

"""Synthetic data for the endogenous-W model and a reproducible Monte Carlo harness.

Every replication draws from its own generator spawned from the master seed
(``numpy.random.SeedSequence``), so results do not depend on the number of
workers or the order in which replications finish.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
import io
import logging
import math
import time

import numpy as np
import pandas as pd
from scipy import stats

from . import estimators as es
from . import inference as inf
from . import likelihood as lk
from . import panel as pn
from . import weights as wm
from .errors import (
    ConfigError,
    DomainError,
    ReplicationFailureError,
    SpatialGrowthError,
)
from .likelihood import ParamVector

log = logging.getLogger(__name__)

TARGETS = ("estimator", "tests")
MAX_FAILURE_RATE = 0.05


@dataclass
class DgpConfig:
    """Data-generating process and Monte Carlo settings.

    The outcome equation is Y = rho W Y + X1 beta + eps delta + xi with
    Z = X2 Gamma + eps and W built from unit coordinates and Z.  X1 holds a
    constant, ``k_exog`` standard normal regressors and, when ``durbin`` is
    set, their spatial lags; X2 holds the constant and the first regressor.

    When ``local_rho_scale`` (``local_delta_scale``) is given the true rho
    (delta) is replaced by Delta / sqrt(n).
    """

    n: int = 200
    rho: float = 0.5
    beta: tuple = (1.0, 1.0, -1.0, 0.5, -0.5)
    gamma: tuple = (10.0, 1.0)
    sigma_xi2: float = 0.25
    sigma_eps2: float = 1.0
    delta: float = 0.8
    durbin: bool = True
    k_exog: int = 2
    physical: str = "inverse_square"
    economic: str = "neg_exponential"
    s_star: float = wm.DEFAULT_S_STAR
    coord_law: str = "band"
    lat_band: float = 60.0
    local_rho_scale: float = None
    local_delta_scale: float = None
    seed: int = 20240607
    replications: int = 200
    level: float = 0.05

    def __post_init__(self):
        self.beta = tuple(float(b) for b in self.beta)
        self.gamma = tuple(float(g) for g in self.gamma)
        if self.n < 10:
            raise ConfigError("n must be at least 10")
        if self.replications < 1:
            raise ConfigError("replications must be positive")
        if len(self.beta) != self.k1:
            raise ConfigError(f"beta needs {self.k1} entries for this design, got {len(self.beta)}")
        if len(self.gamma) != 2:
            raise ConfigError("gamma needs 2 entries (constant, first regressor)")
        if not (self.sigma_xi2 > 0 and self.sigma_eps2 > 0):
            raise ConfigError("variances must be positive")
        if self.coord_law not in ("band", "grid"):
            raise ConfigError(f"unknown coordinate law {self.coord_law!r}")
        if self.physical not in wm.PHYSICAL_KINDS:
            raise ConfigError(f"unknown physical kernel {self.physical!r}")
        if self.economic is not None and self.economic not in wm.ECONOMIC_KINDS:
            raise ConfigError(f"unknown economic kernel {self.economic!r}")
        if not 0 < self.level < 1:
            raise ConfigError("level must be in (0, 1)")

    @property
    def k1(self):
        return 1 + self.k_exog * (2 if self.durbin else 1)

    @property
    def true_rho(self):
        if self.local_rho_scale is not None:
            return self.local_rho_scale / math.sqrt(self.n)
        return self.rho

    @property
    def true_delta(self):
        if self.local_delta_scale is not None:
            return self.local_delta_scale / math.sqrt(self.n)
        return self.delta

    def truth(self):
        return ParamVector(self.true_rho, np.array(self.beta), np.array(self.gamma).reshape(2, 1),
                           self.sigma_xi2, np.array([[self.sigma_eps2]]), np.array([self.true_delta]))

    def names(self):
        xs = [f"x{j + 1}" for j in range(self.k_exog)]
        x1 = ["const"] + xs + ([f"W_{x}" for x in xs] if self.durbin else [])
        return tuple(x1), ("const", "x1"), ("z",)

    def to_dict(self):
        return asdict(self)


PRESETS = {
    # Durbin design used for consistency and coverage
    "coverage": dict(n=400, rho=0.5, delta=0.8, durbin=True, replications=200),
    # size under local misspecification of rho; strong signal makes the W-Z coupling visible
    "size": dict(n=200, durbin=False, beta=(1.0, 3.0, -1.0), sigma_xi2=0.25, sigma_eps2=1.0,
                 local_rho_scale=1.5, delta=0.0, replications=2000),
    # local alternatives in delta with rho = 0
    "power": dict(n=400, durbin=False, beta=(1.0, 3.0, -1.0), rho=0.0, sigma_xi2=2.0, sigma_eps2=1.0,
                  local_delta_scale=3.0, replications=1000),
}


def preset(name, **overrides):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
    return DgpConfig(**{**PRESETS[name], **overrides})


def draw_coordinates(n, rng, law="band", lat_band=60.0):
    """Unit locations: uniform on the sphere within |lat| <= lat_band, or a jittered grid."""
    if law == "band":
        s = math.sin(math.radians(lat_band))
        lat = np.degrees(np.arcsin(rng.uniform(-s, s, n)))
        lon = rng.uniform(-180.0, 180.0, n)
        return lat, lon
    side = int(math.ceil(math.sqrt(n)))
    gl = np.linspace(-lat_band, lat_band, side)
    gg = np.linspace(-175.0, 175.0, side)
    LA, LO = np.meshgrid(gl, gg, indexing="ij")
    lat, lon = LA.ravel()[:n], LO.ravel()[:n]
    lat = np.clip(lat + rng.uniform(-0.5, 0.5, n), -90, 90)
    return lat, lon + rng.uniform(-0.5, 0.5, n)


def draw_disturbances(n, sigma_xi2, Sigma_eps, delta, rng):
    """Draw (v, eps) with v = eps delta + xi, so cov(v, eps) = Sigma_eps delta."""
    Sigma_eps = np.atleast_2d(Sigma_eps)
    p = Sigma_eps.shape[0]
    eps = rng.standard_normal((n, p)) @ np.linalg.cholesky(Sigma_eps).T
    xi = math.sqrt(sigma_xi2) * rng.standard_normal(n)
    v = eps @ np.atleast_1d(delta) + xi
    return v, eps, xi


def simulate_dgp(config, rng=None):
    """One draw of (design, truth) from ``config``.

    Raises
    ------
    DomainError
        If the true rho is inadmissible for the realized W twice in a row,
        or Z is not positive.
    """
    rng = np.random.default_rng(config.seed) if rng is None else rng
    n = config.n
    truth = config.truth()
    x1_names, x2_names, z_names = config.names()
    for attempt in range(2):
        lat, lon = draw_coordinates(n, rng, config.coord_law, config.lat_band)
        X = rng.standard_normal((n, config.k_exog))
        X2 = np.column_stack([np.ones(n), X[:, 0]])
        v, eps, xi = draw_disturbances(n, config.sigma_xi2, truth.Sigma_eps, truth.delta, rng)
        Z = X2 @ truth.Gamma + eps
        if np.any(Z <= 0):
            raise DomainError("simulated Z is not positive; raise the constant in gamma")
        W = wm.build_weights(lat, lon, Z[:, 0], physical=config.physical, economic=config.economic,
                             s_star=config.s_star).entries
        lo, hi = lk.admissible_interval(W)
        if lo < truth.rho < hi:
            break
        log.info("rho %.3f inadmissible for drawn W (%.3f, %.3f); redrawing", truth.rho, lo, hi)
    else:
        raise DomainError("true rho inadmissible for two consecutive W draws")
    X1 = np.column_stack([np.ones(n), X] + ([W @ X] if config.durbin else []))
    Y = np.linalg.solve(np.eye(n) - truth.rho * W, X1 @ truth.beta + v)
    tag = {"lat": lat, "lon": lon}
    d = lk.Design(Y, X1, Z, X2, W, x1_names, x2_names, z_names, tag)
    d.__dict__["rho_interval"] = (lo, hi)  # seed the cached property; saves a second eigensolve
    return d, truth


# ------------------------------------------------------------------ harness


def _replicate(args):
    config, targets, r, seed_seq = args
    rng = np.random.default_rng(seed_seq)
    out = {"rep": r, "ok": True, "error": ""}
    try:
        d, truth = simulate_dgp(config, rng)
        if "estimator" in targets:
            fit = es.fit_endogenous_ml(d, multistart=False)
            if not fit.converged:
                raise SpatialGrowthError(f"nonconvergent fit (gradient {fit.convergence['grad_norm']:.2e})")
            se = fit.se
            for k, v in fit.estimates.items():
                out[f"est:{k}"] = float(v)
                out[f"se:{k}"] = float(se[k])
        if "tests" in targets:
            mu_r = inf.restricted_estimate(d)
            lm = inf.lm_delta(d, mu_r)
            rs = inf.robust_rs_delta(d, mu_r)
            out.update({"stat:lm_delta": lm.statistic, "p:lm_delta": lm.p_value,
                        "stat:robust_rs_delta": rs.statistic, "p:robust_rs_delta": rs.p_value})
            info = lk.info_matrix(truth, d)
            phi1, phi2 = inf.noncentrality(truth.delta * math.sqrt(d.n), truth.rho * math.sqrt(d.n), info, d)
            out.update({"phi1": phi1, "phi2": phi2,
                        "pred:lm_delta": inf.ncx2_power(d.p, max(phi1, 0.0), config.level),
                        "pred:robust_rs_delta": inf.ncx2_power(d.p, max(phi2, 0.0), config.level)})
    except (SpatialGrowthError, np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        out = {"rep": r, "ok": False, "error": f"{type(exc).__name__}: {exc}"}
    return out


@dataclass
class McReport:
    """Aggregated Monte Carlo results.

    ``runtime`` is kept in memory only; written files depend on (seed,
    config) alone so reruns are byte-identical.
    """

    config: dict
    targets: tuple
    estimators: pd.DataFrame = None
    tests: pd.DataFrame = None
    replications: pd.DataFrame = None
    failures: list = field(default_factory=list)
    runtime: float = 0.0

    def to_delimited(self, sep="\t"):
        buf = io.StringIO()
        for name, df in (("estimators", self.estimators), ("tests", self.tests)):
            if df is not None:
                buf.write(f"# {name}\n")
                buf.write(df.to_csv(sep=sep, index=False, float_format="%.10g", lineterminator="\n"))
        return buf.getvalue()

    def summary(self):
        c = self.config
        lines = [f"Monte Carlo: n = {c['n']}, replications = {c['replications']}, seed = {c['seed']}",
                 f"truth: rho = {_fmt(self._truth_rho())}, delta = {_fmt(self._truth_delta())}",
                 f"failed replications: {len(self.failures)}"]
        if self.estimators is not None:
            lines.append("")
            lines.append(f"{'parameter':<22}{'truth':>10}{'mean':>10}{'bias':>10}{'rmse':>10}{'coverage':>10}")
            for r in self.estimators.itertuples():
                lines.append(f"{r.parameter:<22}{r.truth:>10.4f}{r.mean:>10.4f}{r.bias:>10.4f}"
                             f"{r.rmse:>10.4f}{r.coverage:>10.3f}")
        if self.tests is not None:
            lines.append("")
            lines.append(f"{'test':<18}{'level':>7}{'reject':>9}{'se':>8}{'predicted':>11}{'mean stat':>11}{'KS':>8}")
            for r in self.tests.itertuples():
                lines.append(f"{r.test:<18}{r.level:>7.2f}{r.rejection:>9.4f}{r.se:>8.4f}"
                             f"{r.predicted:>11.4f}{r.mean_statistic:>11.4f}{r.ks_uniform:>8.4f}")
        return "\n".join(lines) + "\n"

    def _truth_rho(self):
        c = self.config
        return c["local_rho_scale"] / math.sqrt(c["n"]) if c.get("local_rho_scale") is not None else c["rho"]

    def _truth_delta(self):
        c = self.config
        return c["local_delta_scale"] / math.sqrt(c["n"]) if c.get("local_delta_scale") is not None else c["delta"]

    def rejection(self, test):
        return float(self.tests.set_index("test").loc[test, "rejection"])

    def row(self, parameter):
        return self.estimators.set_index("parameter").loc[parameter]

    def write(self, outdir, prefix="mc"):
        from pathlib import Path

        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        if self.estimators is not None:
            p = out / f"{prefix}_estimators.tsv"
            p.write_text(self.estimators.to_csv(sep="\t", index=False, float_format="%.10g", lineterminator="\n"))
            paths.append(p)
        if self.tests is not None:
            p = out / f"{prefix}_tests.tsv"
            p.write_text(self.tests.to_csv(sep="\t", index=False, float_format="%.10g", lineterminator="\n"))
            paths.append(p)
        p = out / f"{prefix}_replications.tsv"
        p.write_text(self.replications.to_csv(sep="\t", index=False, float_format="%.17g", lineterminator="\n"))
        paths.append(p)
        p = out / f"{prefix}_summary.txt"
        p.write_text(self.summary())
        paths.append(p)
        return paths


def _fmt(x):
    return f"{x:.6g}"


def _aggregate_estimators(rows, truth_vec, names, z=1.959963984540054):
    out = []
    for k, t in zip(names, truth_vec):
        est = np.array([r[f"est:{k}"] for r in rows])
        se = np.array([r[f"se:{k}"] for r in rows])
        m = len(est)
        err = est - t
        cover = np.abs(err) <= z * se
        cov = float(np.mean(cover))
        out.append({"parameter": k, "truth": float(t), "mean": float(np.sum(est) / m), "bias": float(np.sum(err) / m),
                    "rmse": float(math.sqrt(np.sum(err * err) / m)), "mean_se": float(np.sum(se) / m),
                    "coverage": cov, "coverage_se": math.sqrt(cov * (1 - cov) / m), "replications": m})
    return pd.DataFrame(out)


def _aggregate_tests(rows, level):
    out = []
    for test in ("lm_delta", "robust_rs_delta"):
        p = np.array([r[f"p:{test}"] for r in rows])
        s = np.array([r[f"stat:{test}"] for r in rows])
        pred = np.array([r[f"pred:{test}"] for r in rows])
        m = len(p)
        rej = float(np.sum(p < level) / m)
        out.append({"test": test, "level": level, "rejection": rej, "se": math.sqrt(rej * (1 - rej) / m),
                    "predicted": float(np.sum(pred) / m), "mean_statistic": float(np.sum(s) / m),
                    "ks_uniform": float(stats.kstest(p, "uniform").statistic),
                    "ks_chi2": float(stats.kstest(s, "chi2", args=(1,)).statistic), "replications": m})
    return pd.DataFrame(out)


def run_mc(config, targets=("estimator",), workers=1):
    """Run ``config.replications`` independent replications and aggregate.

    Parameters
    ----------
    config : DgpConfig
    targets : sequence of {"estimator", "tests"}
        ``estimator``: bias, RMSE and 95% Wald-interval coverage of every
        parameter of the endogenous-W ML fit.  ``tests``: rejection rates of
        the standard LM and robust RS tests of delta = 0 at ``config.level``,
        with analytic predictions from the noncentrality at the truth.
    workers : int
        Process count; results are identical for any value.

    Raises
    ------
    ReplicationFailureError
        More than 5% of replications failed.
    """
    targets = tuple(targets)
    bad = [t for t in targets if t not in TARGETS]
    if bad or not targets:
        raise ConfigError(f"unknown targets {bad}; expected some of {TARGETS}")
    t0 = time.perf_counter()
    seqs = np.random.SeedSequence(config.seed).spawn(config.replications)
    jobs = [(config, targets, r, s) for r, s in enumerate(seqs)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_replicate, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    else:
        rows = [_replicate(j) for j in jobs]
    rows.sort(key=lambda r: r["rep"])
    failures = [(r["rep"], r["error"]) for r in rows if not r["ok"]]
    if len(failures) > MAX_FAILURE_RATE * config.replications:
        head = "; ".join(f"rep {i}: {e}" for i, e in failures[:5])
        raise ReplicationFailureError(f"{len(failures)} of {config.replications} replications failed ({head})")
    good = [r for r in rows if r["ok"]]
    report = McReport(config.to_dict(), targets, failures=failures)
    if "estimator" in targets:
        truth = config.truth()
        names = lk.param_names(None, *config.names())
        report.estimators = _aggregate_estimators(good, truth.to_vector(), names)
    if "tests" in targets:
        report.tests = _aggregate_tests(good, config.level)
    report.replications = pd.DataFrame(rows).drop(columns=["ok"]).fillna("")
    report.runtime = time.perf_counter() - t0
    return report


# ------------------------------------------------------- synthetic PWT panel


def synthetic_pwt_extract(seed=0, countries=None, years=(1960, 2010), alpha=0.3, phi=0.1, gamma=0.5,
                          beta0=5.0, noise=0.1):
    """A PWT 7.1-schema country-year panel generated from the structural model.

    Terminal log output per worker follows the spatial Durbin reduced form
    implied by (alpha, phi, gamma) with the inverse-square physical weights,
    using the mean investment share and (n + g + delta) of each country.

    Returns
    -------
    (pandas.DataFrame, dict)
        The panel with columns ``isocode, year, rgdpch, rgdpwok, POP, ki,
        rgdptt`` and the truth ``{alpha, phi, gamma, beta0, social_return}``.
    """
    rng = np.random.default_rng(seed)
    table = pn.load_centroids()
    codes = sorted(table if countries is None else countries)
    n = len(codes)
    lat = np.array([table[c][0] for c in codes])
    lon = np.array([table[c][1] for c in codes])
    start, end = years
    T = np.arange(start, end + 1)
    span = end - start
    ngrow = rng.uniform(0.002, 0.035, n)
    s = rng.uniform(0.06, 0.35, n)
    share = rng.uniform(0.35, 0.55, n)
    L0 = np.exp(rng.normal(np.log(4e3), 1.3, n))  # thousands of workers
    ki = 100 * s[:, None] * np.exp(rng.normal(0, 0.08, (n, len(T))))
    lns = np.log(ki.mean(axis=1) / 100)
    ln_ngd = np.log(ngrow + 0.05)
    W = wm.build_weights(lat, lon).entries
    fm = es.forward_map(alpha, phi, gamma)
    X = np.column_stack([np.ones(n), lns, ln_ngd, W @ lns, W @ ln_ngd])
    b = np.array([beta0, fm["beta1"], fm["beta2"], fm["theta1"], fm["theta2"]])
    lny = np.linalg.solve(np.eye(n) - gamma * W, X @ b + noise * rng.standard_normal(n))
    g = rng.uniform(0.0, 0.03, n)
    rows = []
    for i, c in enumerate(codes):
        t = T - start
        workers = L0[i] * np.exp(ngrow[i] * t)
        pop = workers / share[i]
        rgdpwok = np.exp(lny[i] - g[i] * (span - t))
        rgdpch = rgdpwok * workers / pop
        rgdptt = rgdpch * np.exp(rng.normal(0, 0.04, len(T)))
        for k, yr in enumerate(T):
            rows.append((c, int(yr), rgdpch[k], rgdpwok[k], pop[k], ki[i, k], rgdptt[k]))
    df = pd.DataFrame(rows, columns=["isocode", "year", "rgdpch", "rgdpwok", "POP", "ki", "rgdptt"])
    truth = {"alpha": alpha, "phi": phi, "gamma": gamma, "beta0": beta0,
             "social_return": alpha + phi / (1 - gamma)}
    return df, truth

"""Fit the nine growth models for one window and render nine-column report tables.

Results are kept as plain dictionaries (``results.json``) so a report can be
re-rendered with another star convention without refitting.
"""

from importlib import resources
import json
import logging

import numpy as np
from scipy import stats

from . import estimators as es
from . import inference as inf
from . import likelihood as lk
from . import weights as wm
from .errors import SpatialGrowthError

log = logging.getLogger(__name__)

ROWS = (
    ("rs", "Endogeneity test (RS)"),
    ("const", "Constant terms"),
    ("lns", "lns"),
    ("ln_ngd", "lnngd"),
    ("W_lns", "Wlns"),
    ("W_ln_ngd", "Wln(n+g+delta)"),
    ("W_lny", "Wlny"),
    ("morans_i", "Moran's I"),
    ("restriction", "Test of Restriction"),
    ("alpha", "alpha"),
    ("phi", "phi"),
    ("gamma", "gamma"),
    ("social_return", "alpha+phi/(1-gamma)"),
    ("phi_presence", "Presence of phi (Wald)"),
)
ROW_KEYS = tuple(k for k, _ in ROWS)

# model number -> (kind, physical kernel, economic kernel)
MODELS = {
    1: ("ols", None, None),
    2: ("exog", "inverse_square", None),
    3: ("endog", "inverse_square", "neg_exponential"),
    4: ("endog", "inverse_square", "power_difference"),
    5: ("endog", "inverse_square", "ratio_proximity"),
    6: ("exog", "neg_exponential", None),
    7: ("endog", "neg_exponential", "neg_exponential"),
    8: ("endog", "neg_exponential", "power_difference"),
    9: ("endog", "neg_exponential", "ratio_proximity"),
}

PHYSICAL_LABEL = {"inverse_square": "Wd1", "neg_exponential": "Wd2"}
ECONOMIC_LABEL = {"neg_exponential": "exp(-2d)", "power_difference": "|zi-zj|^-2s*", "ratio_proximity": "ratio"}

COEF_ROWS = ("const", "lns", "ln_ngd", "W_lns", "W_ln_ngd")


def model_header(m):
    kind, phys, econ = MODELS[m]
    if kind == "ols":
        return "Solow-Swan"
    if econ is None:
        return PHYSICAL_LABEL[phys]
    return f"{PHYSICAL_LABEL[phys]}o{ECONOMIC_LABEL[econ]}"


def _cell(value, p=None, status="ok", note="", **extra):
    c = {"value": None if value is None else float(value), "p": None if p is None else float(p),
         "status": status, "note": note}
    c.update(extra)
    return c


def _missing():
    return _cell(None, status="missing")


def _nc(note):
    return _cell(None, status="nc", note=note)


def _zp(est, se):
    if se is None or not np.isfinite(se) or not se > 0:
        return None
    return float(2 * stats.norm.sf(abs(est / se)))


def _weights(sample, phys, econ, config):
    return wm.build_weights(sample.lat, sample.lon, sample.z, physical=phys, economic=econ,
                            s_star=config.get("s_star", wm.DEFAULT_S_STAR),
                            epsilon=config.get("epsilon", wm.DEFAULT_EPSILON))


def _structural_cells(sp):
    cells = {}
    for k in ("alpha", "phi", "gamma"):
        v = getattr(sp, k)
        if np.isnan(v):
            cells[k] = _missing()
        else:
            se = sp.se(k)
            cells[k] = _cell(v, _zp(v, se), se=se)
    try:
        sr = inf.social_return(sp)
        cells["social_return"] = _cell(sr.estimate, _zp(sr.estimate, sr.se), se=sr.se,
                                       below_one=sr.precludes_endogenous_growth)
    except SpatialGrowthError as exc:
        cells["social_return"] = _nc(str(exc))
    return cells


def fit_model(m, sample, config):
    """Fit model ``m`` (1-9) and return its table cells and diagnostics.

    Failures never propagate: an unconverged or failed fit turns the cells it
    feeds into "nc" and records the reason in ``diagnostics``.
    """
    kind, phys, econ = MODELS[m]
    cells = {k: _missing() for k in ROW_KEYS}
    diag = []
    if kind == "ols":
        d = _ols_design(sample)
        try:
            fit = es.fit_ols(d)
            for k in ("const", "lns", "ln_ngd"):
                cells[k] = _cell(fit.estimates[k], fit.pvalue(k), se=fit.se[k])
            mi = []
            for ph in ("inverse_square", "neg_exponential"):
                t = inf.morans_i(fit.extra["residuals"], _weights(sample, ph, None, config))
                mi.append({"label": PHYSICAL_LABEL[ph], "value": t.statistic, "p": t.p_value, "z": t.extra["z"]})
            cells["morans_i"] = _cell(mi[0]["value"], mi[0]["p"], values=mi)
            w = inf.restriction_tests(fit)
            cells["restriction"] = _cell(w.statistic, w.p_value, test="Wald")
            _, sp = es.fit_ols_constrained(d)
            se = sp.se("alpha")
            cells["alpha"] = _cell(sp.alpha, _zp(sp.alpha, se), se=se)
        except (SpatialGrowthError, np.linalg.LinAlgError) as exc:
            diag.append(f"model {m}: {type(exc).__name__}: {exc}")
            for k in ("const", "lns", "ln_ngd", "morans_i", "restriction", "alpha"):
                if cells[k]["status"] == "missing":
                    cells[k] = _nc(str(exc))
        return {"cells": cells, "diagnostics": diag}

    endog = kind == "endog"
    try:
        W = _weights(sample, phys, econ, config)
        d = lk.build_design(sample, W)
    except (SpatialGrowthError, np.linalg.LinAlgError) as exc:
        diag.append(f"model {m}: weights/design: {type(exc).__name__}: {exc}")
        return {"cells": {k: (_nc(str(exc)) if k not in ("morans_i",) else _missing()) for k in ROW_KEYS},
                "diagnostics": diag}
    if endog:
        try:
            rs = inf.robust_rs_delta(d)
            cells["rs"] = _cell(rs.statistic, rs.p_value)
        except (SpatialGrowthError, np.linalg.LinAlgError) as exc:
            cells["rs"] = _nc(str(exc))
            diag.append(f"model {m}: RS test: {exc}")
    fit = None
    try:
        fit = es.fit_endogenous_ml(d, multistart=config.get("multistart", True)) if endog else es.fit_sdm_ml(d)
        if not fit.converged:
            raise SpatialGrowthError(f"unconstrained fit did not converge (gradient {fit.convergence['grad_norm']:.2e})")
        pre = "beta[" if endog else ""
        post = "]" if endog else ""
        for k in COEF_ROWS:
            name = f"{pre}{k}{post}"
            cells[k] = _cell(fit.estimates[name], fit.pvalue(name), se=fit.se[name])
        cells["W_lny"] = _cell(fit.estimates["rho"], fit.pvalue("rho"), se=fit.se["rho"])
        if endog:
            cells["delta"] = _cell(fit.estimates["delta[z]"], fit.pvalue("delta[z]"), se=fit.se["delta[z]"])
    except (SpatialGrowthError, np.linalg.LinAlgError) as exc:
        diag.append(f"model {m}: unconstrained fit: {type(exc).__name__}: {exc}")
        for k in COEF_ROWS + ("W_lny", "restriction"):
            cells[k] = _nc(str(exc))
        fit = None
    try:
        cfit, sp = es.fit_constrained(d, endogenous=endog, multistart=config.get("multistart", True))
        if not cfit.converged:
            raise SpatialGrowthError(f"constrained fit did not converge (gradient {cfit.convergence['grad_norm']:.2e})")
        if fit is not None:
            lr = inf.restriction_tests(fit, cfit)
            cells["restriction"] = _cell(lr.statistic, lr.p_value, test="LR")
        cells.update(_structural_cells(sp))
        try:
            t = inf.phi_presence_wald(sp)
            cells["phi_presence"] = _cell(t.statistic, t.p_value)
        except SpatialGrowthError as exc:
            cells["phi_presence"] = _nc(str(exc))
    except (SpatialGrowthError, np.linalg.LinAlgError) as exc:
        diag.append(f"model {m}: constrained fit: {type(exc).__name__}: {exc}")
        for k in ("restriction", "alpha", "phi", "gamma", "social_return", "phi_presence"):
            if cells[k]["status"] == "missing":
                cells[k] = _nc(str(exc))
    return {"cells": cells, "diagnostics": diag}


def _ols_design(sample):
    n = sample.n
    one = np.ones(n)
    X1 = np.column_stack([one, sample.lns, sample.ln_ngd])
    X2 = np.column_stack([one, sample.lns])
    return lk.Design(sample.lny, X1, sample.z, X2, np.zeros((n, n)), ("const", "lns", "ln_ngd"), lk.GROWTH_X2)


def _run_one(args):
    m, sample, config = args
    return m, fit_model(m, sample, config)


def estimate_window(sample, config, models=tuple(MODELS), workers=1):
    """Fit the requested models on one window's sample."""
    jobs = [(m, sample, config) for m in models]
    if workers and workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as ex:
            done = dict(ex.map(_run_one, jobs))
    else:
        done = dict(_run_one(j) for j in jobs)
    return {
        "window": list(sample.window), "n": sample.n, "codes": list(sample.codes),
        "dropped": dict(sample.dropped), "models": {str(m): done[m] for m in models},
    }


# ---------------------------------------------------------------- rendering


def format_cell(cell, key, conventional=False):
    """Display string: number with stars, "-" for missing, "nc" for non-convergent."""
    if cell is None or cell["status"] == "missing":
        return "-"
    if cell["status"] != "ok":
        return "nc"
    if key == "morans_i" and cell.get("values"):
        return " / ".join(f"{v['value']:.3f}{inf.stars(v['p'], conventional)} ({v['label']})" for v in cell["values"])
    s = f"{cell['value']:.3f}{inf.stars(cell['p'], conventional)}"
    if key == "restriction" and cell.get("test"):
        s += f" ({cell['test']})"
    return s


def truth_cells(truth):
    """Table rows implied by the structural truth of a synthetic extract."""
    if not truth:
        return {}
    fm = es.forward_map(truth["alpha"], truth["phi"], truth["gamma"])
    return {"const": truth.get("beta0"), "lns": fm["beta1"], "ln_ngd": fm["beta2"], "W_lns": fm["theta1"],
            "W_ln_ngd": fm["theta2"], "W_lny": fm["rho"], "alpha": truth["alpha"], "phi": truth["phi"],
            "gamma": truth["gamma"], "social_return": truth["alpha"] + truth["phi"] / (1 - truth["gamma"])}


def render_text(result, provenance, conventional=False, truth=None, table_title=None):
    models = sorted(int(m) for m in result["models"])
    head = ["", *[f"({m})" for m in models]]
    sub = ["", *[model_header(m) for m in models]]
    rows = []
    tc = truth_cells(truth)
    if tc:
        head.append("truth")
        sub.append("DGP (Wd1)")
    for key, label in ROWS:
        r = [label] + [format_cell(result["models"][str(m)]["cells"].get(key), key, conventional) for m in models]
        if tc:
            r.append("-" if tc.get(key) is None else f"{tc[key]:.3f}")
        rows.append(r)
    widths = [max(len(x[i]) for x in [head, sub] + rows) for i in range(len(head))]

    def line(cells):
        return "  ".join(c.ljust(widths[0]) if i == 0 else c.rjust(widths[i]) for i, c in enumerate(cells)).rstrip()

    w0, w1 = result["window"]
    title = table_title or f"Growth regressions, {w0}-{w1} (n = {result['n']})"
    out = [title, "=" * len(title), line(head), line(sub), "-" * len(line(head))]
    out += [line(r) for r in rows]
    out.append("-" * len(line(head)))
    out.append(f"Significance ({'conventional' if conventional else 'as printed in the source table'}): "
               f"{inf.star_legend(conventional)}; '-' not applicable, 'nc' not converged")
    out.append(f"s* = {provenance.get('s_star')}; epsilon = {provenance.get('epsilon')}")
    diags = [d for m in models for d in result["models"][str(m)]["diagnostics"]]
    if result.get("dropped"):
        out.append(f"dropped countries: {len(result['dropped'])} ("
                   + ", ".join(f"{k}: {v}" for k, v in sorted(result["dropped"].items())) + ")")
    if diags:
        out.append("")
        out.append("Diagnostics")
        out += [f"  {d}" for d in diags]
    out.append("")
    out.append("Provenance")
    for k in sorted(provenance):
        out.append(f"  {k}: {provenance[k]}")
    return "\n".join(out) + "\n"


def render_wide_tsv(result, conventional=False, truth=None):
    models = sorted(int(m) for m in result["models"])
    tc = truth_cells(truth)
    lines = ["\t".join(["row", *[f"model_{m}" for m in models]] + (["truth"] if tc else []))]
    for key, label in ROWS:
        r = [label] + [format_cell(result["models"][str(m)]["cells"].get(key), key, conventional) for m in models]
        if tc:
            r.append("" if tc.get(key) is None else repr(float(tc[key])))
        lines.append("\t".join(r))
    return "\n".join(lines) + "\n"


def render_long_tsv(result, conventional=False):
    lines = ["\t".join(["window", "model", "row", "value", "p_value", "stars", "status", "note"])]
    w = f"{result['window'][0]}-{result['window'][1]}"
    for m in sorted(int(k) for k in result["models"]):
        cells = result["models"][str(m)]["cells"]
        for key in ROW_KEYS:
            c = cells.get(key) or _missing()
            entries = c.get("values") or [{"label": "", "value": c["value"], "p": c["p"]}]
            for e in entries:
                label = key if not e.get("label") else f"{key}[{e['label']}]"
                v = "" if e["value"] is None else repr(float(e["value"]))
                p = "" if e["p"] is None else repr(float(e["p"]))
                lines.append("\t".join([w, str(m), label, v, p, inf.stars(e["p"], conventional), c["status"],
                                        c.get("note", "").replace("\t", " ")]))
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------ published diff


def load_published():
    text = resources.files("spgrowth").joinpath("data/published_tables.json").read_text(encoding="utf-8")
    return json.loads(text)


def _number(s):
    try:
        return float(str(s).rstrip("*&"))
    except ValueError:
        return None


def diff_published(result):
    """Rows comparing our estimates with the published table for the same window, if any."""
    key = f"{result['window'][0]}-{result['window'][1]}"
    pub = load_published().get(key)
    if pub is None:
        return None
    lines = ["\t".join(["model", "row", "ours", "published", "difference"])]
    for m in sorted(int(k) for k in result["models"]):
        cells = result["models"][str(m)]["cells"]
        for row in ROW_KEYS:
            p = pub.get(row, {}).get(str(m))
            if p is None:
                continue
            c = cells.get(row) or _missing()
            ours = [v["value"] for v in c["values"]] if c.get("values") else [c["value"]]
            theirs = p if isinstance(p, list) else [p]
            for o, t in zip(ours, theirs):
                tv = _number(t)
                o_s = "" if o is None else f"{o:.6g}"
                d = "" if o is None or tv is None else f"{o - tv:.6g}"
                lines.append("\t".join([str(m), row, o_s, t, d]))
    return "\n".join(lines) + "\n"

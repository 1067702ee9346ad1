"""Command-line front end: ``spgrowth {weights,estimate,simulate,report}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 convergence
failure (the report is still written, with "nc" cells).
"""

import argparse
from dataclasses import asdict, dataclass, field
import hashlib
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import scipy
import yaml

from . import __version__
from . import panel as pn
from . import report as rp
from . import simulate as sm
from . import weights as wm
from .errors import (
    ConfigError,
    DegenerateGrowthError,
    InvalidInputError,
    ParseError,
    ReplicationFailureError,
    SchemaError,
    SpatialGrowthError,
)

log = logging.getLogger("spgrowth")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CONVERGENCE = 0, 2, 3, 4


@dataclass
class RunConfig:
    """Run settings read from a YAML file; command-line flags override them."""

    data: str = None
    columns: dict = field(default_factory=dict)
    centroids: str = None
    synthetic: dict = None
    windows: list = field(default_factory=lambda: [[1960, 2010]])
    g_plus_delta: float = 0.05
    saving: str = "mean"
    z_measure: str = "total"
    physical: list = field(default_factory=lambda: list(wm.PHYSICAL_KINDS))
    economic: list = field(default_factory=lambda: list(wm.ECONOMIC_KINDS))
    s_star: float = wm.DEFAULT_S_STAR
    epsilon: float = wm.DEFAULT_EPSILON
    models: list = field(default_factory=lambda: list(rp.MODELS))
    conventional_stars: bool = False
    multistart: bool = True
    seed: int = 0
    workers: int = 1
    out: str = "spgrowth_out"
    simulate: dict = field(default_factory=dict)
    base_dir: str = "."

    def validate(self):
        if self.data is None and self.synthetic is None:
            raise ConfigError("config needs either 'data' (a panel file) or 'synthetic' settings")
        if self.data is not None and not self.data_path().exists():
            raise ConfigError(f"data file not found: {self.data_path()}")
        if self.centroids is not None and not self._path(self.centroids).exists():
            raise ConfigError(f"centroid file not found: {self._path(self.centroids)}")
        for w in self.windows:
            if len(w) != 2 or not int(w[0]) < int(w[1]):
                raise ConfigError(f"bad window {w}; expected [start, end] with start < end")
        bad = [m for m in self.models if m not in rp.MODELS]
        if bad:
            raise ConfigError(f"unknown models {bad}; expected numbers 1-9")
        for k in self.physical:
            if k not in wm.PHYSICAL_KINDS:
                raise ConfigError(f"unknown physical kernel {k!r}")
        for k in self.economic:
            if k not in wm.ECONOMIC_KINDS:
                raise ConfigError(f"unknown economic kernel {k!r}")
        if not self.s_star > 0 or not self.epsilon > 0:
            raise ConfigError("s_star and epsilon must be positive")
        if self.saving not in ("mean", "terminal") or self.z_measure not in pn.Z_MEASURES:
            raise ConfigError("saving must be mean|terminal and z_measure one of " + ", ".join(pn.Z_MEASURES))
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        return self

    def _path(self, p):
        p = Path(p)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def data_path(self):
        return self._path(self.data)

    def canonical(self):
        d = asdict(self)
        d.pop("base_dir")
        d.pop("out")
        return d

    def digest(self):
        return hashlib.sha256(json.dumps(self.canonical(), sort_keys=True, default=str).encode()).hexdigest()[:16]


def load_config(path=None):
    if path is None:
        return RunConfig()
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = yaml.safe_load(p.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    if "window" in raw:
        raw["windows"] = [raw.pop("window")]
    known = set(RunConfig.__dataclass_fields__)
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    raw["base_dir"] = str(p.parent)
    try:
        return RunConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _parse_window(text):
    try:
        a, b = text.split(":")
        return [int(a), int(b)]
    except ValueError:
        raise ConfigError(f"--window expects start:end, got {text!r}") from None


def _apply_flags(cfg, args):
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "window", None):
        cfg.windows = [_parse_window(args.window)]
    if getattr(args, "models", None):
        try:
            cfg.models = [int(m) for m in args.models.split(",") if m.strip()]
        except ValueError:
            raise ConfigError(f"--models expects a comma list of 1-9, got {args.models!r}") from None
    if getattr(args, "out", None):
        cfg.out = args.out
    if getattr(args, "conventional_stars", False):
        cfg.conventional_stars = True
    return cfg


def provenance(cfg, extra=None):
    p = {
        "config_hash": cfg.digest(), "seed": int(cfg.seed), "spgrowth": __version__,
        "numpy": np.__version__, "scipy": scipy.__version__, "pandas": pd.__version__,
        "python": platform.python_version(), "s_star": cfg.s_star, "epsilon": cfg.epsilon,
        "g_plus_delta": cfg.g_plus_delta, "saving": cfg.saving, "z_measure": cfg.z_measure,
        "star_convention": "conventional" if cfg.conventional_stars else "literal",
        "data": cfg.data if cfg.data else f"synthetic {json.dumps(cfg.synthetic, sort_keys=True)}",
    }
    p.update(extra or {})
    return p


def _load_panel(cfg):
    """Panel from the configured file or synthetic generator; returns (panel, truth)."""
    centroids = pn.load_centroids(cfg._path(cfg.centroids)) if cfg.centroids else None
    if cfg.data is not None:
        return pn.load_panel(cfg.data_path(), schema=cfg.columns or None, centroids=centroids), None
    syn = dict(cfg.synthetic or {})
    syn.setdefault("seed", int(cfg.seed))
    try:
        df, truth = sm.synthetic_pwt_extract(**syn)
    except TypeError as exc:
        raise ConfigError(f"bad synthetic settings: {exc}") from None
    canon = df.rename(columns={"isocode": "country", "POP": "pop"})
    return pn.panel_from_frame(canon, centroids), truth


def _sample(cfg, panel, window):
    return pn.derive_growth_vars(panel, tuple(window), cfg.g_plus_delta, cfg.saving, cfg.z_measure)


# ------------------------------------------------------------------ commands


def cmd_weights(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    panel, _ = _load_panel(cfg)
    prov = provenance(cfg)
    prov["matrices"] = []
    for window in cfg.windows:
        s = _sample(cfg, panel, window)
        tag = f"{window[0]}-{window[1]}"
        (out / f"codes_{tag}.txt").write_text("\n".join(s.codes) + "\n")
        D = wm.distance_matrix(s.lat, s.lon)
        for phys in cfg.physical:
            for econ in cfg.economic:
                W = wm.build_weights(s.lat, s.lon, s.z, physical=phys, economic=econ, s_star=cfg.s_star,
                                     epsilon=cfg.epsilon, D=D)
                name = f"W_{tag}_{phys}_{econ}.tsv"
                (out / name).write_text(wm.to_dense_text(W))
                prov["matrices"].append({"file": name, "window": tag, "n": W.n, **W.kernel_tag})
    (out / "weights_provenance.json").write_text(json.dumps(prov, indent=1, sort_keys=True) + "\n")
    print(f"wrote {len(prov['matrices'])} matrices to {out}")
    return EXIT_OK


def _write_reports(out, result, prov, cfg, truth):
    w = f"{result['window'][0]}-{result['window'][1]}"
    title = f"Growth regressions, {w} (n = {result['n']})"
    conv = cfg.conventional_stars
    (out / f"table_{w}.txt").write_text(rp.render_text(result, prov, conv, truth, title))
    (out / f"table_{w}.tsv").write_text(rp.render_wide_tsv(result, conv, truth))
    (out / f"estimates_{w}.tsv").write_text(rp.render_long_tsv(result, conv))
    diff = rp.diff_published(result)
    if diff is not None:
        (out / f"diff_published_{w}.tsv").write_text(diff)


def cmd_estimate(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    panel, truth = _load_panel(cfg)
    prov = provenance(cfg)
    truth_window = list((cfg.synthetic or {}).get("years", (1960, 2010))) if truth else None
    results = {"provenance": prov, "truth": truth, "truth_window": truth_window, "windows": []}
    any_nc = False
    config = {"s_star": cfg.s_star, "epsilon": cfg.epsilon, "multistart": cfg.multistart}
    for window in cfg.windows:
        s = _sample(cfg, panel, window)
        res = rp.estimate_window(s, config, tuple(cfg.models), cfg.workers)
        results["windows"].append(res)
        wtruth = truth if truth and list(window) == truth_window else None
        _write_reports(out, res, prov, cfg, wtruth)
        print(rp.render_text(res, prov, cfg.conventional_stars, wtruth))
        any_nc |= any(c["status"] == "nc" for m in res["models"].values() for c in m["cells"].values())
    (out / "results.json").write_text(json.dumps(results, indent=1, sort_keys=True, default=_jsonable) + "\n")
    return EXIT_CONVERGENCE if any_nc else EXIT_OK


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x)}")


def cmd_report(cfg, results_path=None):
    out = Path(cfg.out)
    path = Path(results_path) if results_path else out / "results.json"
    if not path.exists():
        raise ConfigError(f"no results file at {path}; run 'estimate' first")
    results = json.loads(path.read_text())
    prov = dict(results["provenance"])
    prov["star_convention"] = "conventional" if cfg.conventional_stars else "literal"
    out.mkdir(parents=True, exist_ok=True)
    for res in results["windows"]:
        truth = results.get("truth") if res["window"] == results.get("truth_window") else None
        _write_reports(out, res, prov, cfg, truth)
        print(rp.render_text(res, prov, cfg.conventional_stars, truth))
    return EXIT_OK


def cmd_simulate(cfg, preset=None):
    sim = dict(cfg.simulate or {})
    name = preset or sim.pop("preset", "coverage")
    sim.pop("preset", None)
    targets = sim.pop("targets", None) or (["estimator"] if name == "coverage" else ["tests"])
    workers = int(sim.pop("workers", cfg.workers))
    sim["seed"] = int(cfg.seed)
    try:
        dgp = sm.preset(name, **sim)
    except TypeError as exc:
        raise ConfigError(f"bad simulate settings: {exc}") from None
    rep = sm.run_mc(dgp, targets, workers=workers)
    paths = rep.write(cfg.out, prefix=f"mc_{name}")
    print(rep.summary(), end="")
    print(f"runtime {rep.runtime:.1f} s; wrote {', '.join(p.name for p in paths)}")
    return EXIT_OK


# ---------------------------------------------------------------------- main


def build_parser():
    ap = argparse.ArgumentParser(prog="spgrowth", description="Spatial growth regressions with endogenous weights")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        p.add_argument("--window", help="sample window start:end, e.g. 1960:2010")
        p.add_argument("--models", help="comma list of model numbers 1-9")
        p.add_argument("--out", help="output directory")
        p.add_argument("--conventional-stars", action="store_true",
                       help="use ***/**/* for 1%%/5%%/10%% instead of the default */**/***")
        return p

    common(sub.add_parser("weights", help="build and write the composite weights matrices"))
    common(sub.add_parser("estimate", help="fit Models (1)-(9) and write the nine-column report tables"))
    s = common(sub.add_parser("simulate", help="run a Monte Carlo study"))
    s.add_argument("--preset", choices=sorted(sm.PRESETS), help="study preset (overrides the config's preset)")
    r = common(sub.add_parser("report", help="re-render reports from a results.json"))
    r.add_argument("--results", help="path to results.json (default: <out>/results.json)")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _apply_flags(load_config(args.config), args)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.preset)
        if args.command == "report":
            return cmd_report(cfg, args.results)
        cfg.validate()
        if args.command == "weights":
            return cmd_weights(cfg)
        return cmd_estimate(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemaError, ParseError, DegenerateGrowthError, InvalidInputError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ReplicationFailureError as exc:
        print(f"simulation aborted: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except SpatialGrowthError as exc:
        print(f"data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

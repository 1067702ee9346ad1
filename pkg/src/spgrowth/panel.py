"""Load a Penn-World-Table-style country panel and derive growth-regression variables."""

from dataclasses import dataclass, field
from importlib import resources
import csv
import io
import logging

import numpy as np
import pandas as pd

from .errors import DegenerateGrowthError, InvalidInputError, ParseError, SchemaError

log = logging.getLogger(__name__)

REQUIRED = ("country", "year", "rgdpch", "rgdpwok", "pop", "ki", "rgdptt")
NUMERIC = ("rgdpch", "rgdpwok", "pop", "ki", "rgdptt")
LEVELS = ("rgdpch", "rgdpwok", "pop", "rgdptt")

# PWT 7.1 names; matched case-insensitively
PWT71_COLUMNS = {
    "country": "isocode",
    "year": "year",
    "rgdpch": "rgdpch",
    "rgdpwok": "rgdpwok",
    "pop": "POP",
    "ki": "ki",
    "rgdptt": "rgdptt",
}

Z_MEASURES = ("total", "per_capita", "per_worker")


def load_centroids(path=None):
    """Country centroid table as ``{code: (lat, long)}``.

    The bundled table covers the 90-country non-oil roster; pass ``path`` to
    use an edited copy with the same ``code,name,lat,long`` header.
    """
    if path is None:
        text = resources.files("spgrowth").joinpath("data/centroids.csv").read_text(encoding="utf-8")
        df = pd.read_csv(io.StringIO(text))
    else:
        df = pd.read_csv(path)
    return {str(r.code): (float(r.lat), float(r.long)) for r in df.itertuples()}


def roster():
    return tuple(load_centroids())


@dataclass
class CountryPanel:
    """Long-format panel, one row per (country, year), canonical column names."""

    data: pd.DataFrame
    coordinates: dict = field(default_factory=dict)
    missing: dict = field(default_factory=dict)
    source: str = ""

    @property
    def countries(self):
        return tuple(self.data["country"].unique())

    def __len__(self):
        return len(self.data)


@dataclass
class GrowthSample:
    """Cross-section of regression variables for one window, sorted by country code."""

    codes: tuple
    lny: np.ndarray
    lns: np.ndarray
    ln_ngd: np.ndarray
    z: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    window: tuple
    g_plus_delta: float = 0.05
    n_growth: np.ndarray = None
    dropped: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("lny", "lns", "ln_ngd", "z", "lat", "lon"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if not self.window[0] < self.window[1]:
            raise InvalidInputError("window start must precede end")

    @property
    def n(self):
        return len(self.codes)

    def to_frame(self):
        return pd.DataFrame({
            "country": self.codes, "lny": self.lny, "lns": self.lns, "ln_ngd": self.ln_ngd,
            "z": self.z, "lat": self.lat, "long": self.lon,
        })

    def to_delimited(self, sep="\t"):
        return self.to_frame().to_csv(sep=sep, index=False, float_format="%.17g", lineterminator="\n")

    def subset(self, idx):
        idx = np.asarray(idx)
        return GrowthSample(
            tuple(np.asarray(self.codes)[idx]), self.lny[idx], self.lns[idx], self.ln_ngd[idx], self.z[idx],
            self.lat[idx], self.lon[idx], self.window, self.g_plus_delta,
            None if self.n_growth is None else self.n_growth[idx], dict(self.dropped), dict(self.provenance),
        )


def _sniff_sep(path):
    with open(path, newline="", encoding="utf-8") as fh:
        head = fh.readline()
    return "\t" if head.count("\t") > head.count(",") else ","


def load_panel(path, schema=None, sep=None, centroids=None):
    """Read a delimited country-year file.

    Parameters
    ----------
    path : path-like
        Comma- or tab-delimited text with a header row.
    schema : dict, optional
        Map from canonical names (``country, year, rgdpch, rgdpwok, pop, ki,
        rgdptt`` and optionally ``lat, long``) to file column names.
        Defaults to PWT 7.1 names.
    centroids : dict, optional
        ``{code: (lat, long)}`` used where the file has no coordinate columns.

    Raises
    ------
    SchemaError
        A mapped column is absent; the message names the canonical field.
    ParseError
        A non-empty, non-numeric cell; carries the 1-based data row and column.
    """
    mapping = dict(PWT71_COLUMNS)
    if schema:
        mapping.update(schema)
    sep = sep or _sniff_sep(path)
    raw = pd.read_csv(path, sep=sep, dtype=str, keep_default_na=False, quoting=csv.QUOTE_MINIMAL)
    lower = {c.lower(): c for c in raw.columns}

    def resolve(canon):
        col = mapping.get(canon, canon)
        if col in raw.columns:
            return col
        return lower.get(str(col).lower())

    out = {}
    for canon in REQUIRED:
        col = resolve(canon)
        if col is None:
            raise SchemaError(canon)
        out[canon] = raw[col]
    for canon in ("lat", "long"):
        col = resolve(canon)
        if col is not None:
            out[canon] = raw[col]

    frame = pd.DataFrame({"country": out["country"].str.strip()})
    for canon in ("year",) + NUMERIC + tuple(c for c in ("lat", "long") if c in out):
        col = out[canon].str.strip()
        vals = pd.to_numeric(col.replace({"": None, "NA": None, "na": None, "NaN": None, "nan": None, ".": None}),
                             errors="coerce")
        bad = vals.isna() & ~col.isin(["", "NA", "na", "NaN", "nan", "."])
        if bad.any():
            r = int(np.flatnonzero(bad.to_numpy())[0])
            raise ParseError(r + 1, resolve(canon), col.iloc[r])
        frame[canon] = vals
    if frame["year"].isna().any():
        r = int(np.flatnonzero(frame["year"].isna().to_numpy())[0])
        raise ParseError(r + 1, resolve("year"), out["year"].iloc[r])
    frame["year"] = frame["year"].astype(int)
    if frame.duplicated(["country", "year"]).any():
        dup = frame[frame.duplicated(["country", "year"])].iloc[0]
        raise InvalidInputError(f"duplicate observation for {dup.country} in {dup.year}")
    frame = frame.sort_values(["country", "year"], kind="mergesort").reset_index(drop=True)

    coords = {}
    if "lat" in frame and "long" in frame:
        for code, g in frame.groupby("country", sort=True):
            g = g.dropna(subset=["lat", "long"])
            if len(g):
                coords[code] = (float(g["lat"].iloc[0]), float(g["long"].iloc[0]))
        frame = frame.drop(columns=["lat", "long"])
    table = load_centroids() if centroids is None else centroids
    for code in frame["country"].unique():
        if code not in coords and code in table:
            coords[code] = table[code]

    missing = {}
    for row in frame.itertuples(index=False):
        gaps = [c for c in NUMERIC if pd.isna(getattr(row, c))]
        gaps += [c for c in LEVELS if not pd.isna(getattr(row, c)) and getattr(row, c) <= 0]
        if gaps:
            missing.setdefault(row.country, []).append((int(row.year), tuple(gaps)))
    return CountryPanel(frame, coords, missing, str(path))


def panel_from_frame(frame, coordinates=None):
    """Wrap an in-memory frame that already uses canonical column names."""
    frame = frame.sort_values(["country", "year"], kind="mergesort").reset_index(drop=True)
    coords = dict(coordinates or load_centroids())
    return CountryPanel(frame, {c: coords[c] for c in frame["country"].unique() if c in coords})


def workers(rgdpch, pop, rgdpwok):
    """Number of workers implied by GDP per capita, population and GDP per worker."""
    return np.asarray(rgdpch, dtype=float) * np.asarray(pop, dtype=float) / np.asarray(rgdpwok, dtype=float)


def derive_growth_vars(panel, window=(1960, 2010), g_plus_delta=0.05, saving="mean", z_measure="total",
                       countries=None):
    """Cross-section of growth-regression variables over ``window``.

    Countries lacking either endpoint, coordinates, or any required value
    inside the window are dropped; every drop is recorded with its reason in
    ``GrowthSample.dropped``.

    ``saving="mean"`` averages ki/100 over the window years; ``"terminal"``
    uses the end year only.  ``z_measure`` selects total real GDI
    (rgdptt x pop, default), GDI per capita, or GDI per worker.
    """
    start, end = int(window[0]), int(window[1])
    if not start < end:
        raise InvalidInputError("window start must precede end")
    if saving not in ("mean", "terminal"):
        raise InvalidInputError(f"unknown saving convention {saving!r}")
    if z_measure not in Z_MEASURES:
        raise InvalidInputError(f"unknown z measure {z_measure!r}")
    df = panel.data
    df = df[(df["year"] >= start) & (df["year"] <= end)]
    wanted = None if countries is None else set(countries)

    rows, dropped = [], {}
    for code, g in df.groupby("country", sort=True):
        if wanted is not None and code not in wanted:
            continue
        years = set(g["year"])
        if start not in years or end not in years:
            dropped[code] = f"window endpoint missing ({start} or {end})"
            continue
        if g[list(NUMERIC)].isna().any().any():
            bad = g[g[list(NUMERIC)].isna().any(axis=1)]
            dropped[code] = f"missing values in window (first in {int(bad['year'].iloc[0])})"
            continue
        if (g[list(LEVELS)] <= 0).any().any():
            dropped[code] = "non-positive level variable in window"
            continue
        if code not in panel.coordinates:
            dropped[code] = "no coordinates"
            continue
        first = g[g["year"] == start].iloc[0]
        last = g[g["year"] == end].iloc[0]
        w0 = workers(first.rgdpch, first["pop"], first.rgdpwok)
        w1 = workers(last.rgdpch, last["pop"], last.rgdpwok)
        ngrow = (np.log(w1) - np.log(w0)) / (end - start)
        total = ngrow + g_plus_delta
        if not total > 0:
            raise DegenerateGrowthError(code, total)
        s = (g["ki"].mean() if saving == "mean" else last.ki) / 100.0
        if not s > 0:
            dropped[code] = "non-positive saving rate"
            continue
        if z_measure == "total":
            z = last.rgdptt * last["pop"]
        elif z_measure == "per_capita":
            z = last.rgdptt
        else:
            z = last.rgdptt * last["pop"] / w1
        lat, lon = panel.coordinates[code]
        rows.append((code, np.log(last.rgdpwok), np.log(s), np.log(total), z, lat, lon, ngrow))
    if wanted is not None:
        for code in sorted(wanted - set(df["country"])):
            dropped[code] = "not in panel"
    for code, why in dropped.items():
        log.info("dropping %s: %s", code, why)
    if len(rows) < 3:
        raise InvalidInputError(f"only {len(rows)} usable countries in window {start}-{end}")
    cols = list(zip(*rows))
    return GrowthSample(
        codes=tuple(cols[0]), lny=cols[1], lns=cols[2], ln_ngd=cols[3], z=cols[4], lat=cols[5], lon=cols[6],
        window=(start, end), g_plus_delta=float(g_plus_delta), n_growth=np.array(cols[7]), dropped=dropped,
        provenance={"saving": saving, "z_measure": z_measure, "g_plus_delta": float(g_plus_delta),
                    "source": panel.source},
    )

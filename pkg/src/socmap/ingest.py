"""Tabular data model: horizon and site records, covariate schema, CSV I/O.

Units are fixed throughout the package: depths in cm, bulk density in
g/cm3, organic carbon in mass percent, rock fragments as a mass fraction,
stocks in kg/m2, site coordinates as planar projected km.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, CoverageError, DataError

__all__ = [
    "HorizonRecord",
    "SiteRecord",
    "Covariate",
    "CovariateSchema",
    "ModelSpec",
    "compute_stock",
    "load_horizon_csv",
    "load_site_csv",
    "write_site_csv",
    "write_stock_csv",
    "log_transform",
]

#: Column order required in site CSV files before covariate columns.
SITE_BASE_COLUMNS = ("site_id", "x_km", "y_km", "target")

HORIZON_COLUMNS = ("site_id", "top_cm", "bottom_cm", "bulk_density",
                   "soc_pct", "rock_frag")

#: Tolerance (cm) for deciding that consecutive horizons touch exactly.
_DEPTH_TOL = 1e-9


@dataclass(frozen=True)
class HorizonRecord:
    """One sampled soil horizon of one site.

    ``top_cm``/``bottom_cm`` bound the horizon, ``bulk_density`` is in
    g/cm3, ``soc_pct`` is the organic carbon concentration in mass percent
    and ``rock_frag`` the rock fragment mass fraction in [0, 1].
    """

    site_id: str
    top_cm: float
    bottom_cm: float
    bulk_density: float
    soc_pct: float
    rock_frag: float

    def __post_init__(self):
        if not (self.top_cm < self.bottom_cm):
            raise DataError(
                f"horizon of site {self.site_id!r}: top_cm ({self.top_cm}) "
                f"must be < bottom_cm ({self.bottom_cm})")
        if self.top_cm < 0:
            raise DataError(f"horizon of site {self.site_id!r}: negative top depth")
        if not (self.bulk_density > 0):
            raise DataError(
                f"horizon of site {self.site_id!r}: bulk_density must be > 0")
        if not (0.0 <= self.soc_pct <= 100.0):
            raise DataError(
                f"horizon of site {self.site_id!r}: soc_pct outside [0, 100]")
        if not (0.0 <= self.rock_frag <= 1.0):
            raise DataError(
                f"horizon of site {self.site_id!r}: rock_frag outside [0, 1]")


@dataclass(frozen=True)
class SiteRecord:
    """One geo-referenced observation.

    ``target`` is the SOC stock in kg/m2 (``None`` when the site is a pure
    prediction location).  ``covariates`` maps covariate names to float,
    category label, or ``None`` for missing.  Instances are treated as
    immutable values and are safe to share across workers.
    """

    site_id: str
    x_km: float
    y_km: float
    target: float | None
    covariates: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (math.isfinite(self.x_km) and math.isfinite(self.y_km)):
            raise DataError(f"site {self.site_id!r}: non-finite coordinates")
        if self.target is not None and not math.isfinite(self.target):
            raise DataError(f"site {self.site_id!r}: non-finite target")


@dataclass(frozen=True)
class Covariate:
    """Schema entry for one covariate column."""

    name: str
    kind: str  # "numeric" | "categorical"
    levels: tuple = ()
    missing_allowed: bool = True

    def __post_init__(self):
        if self.kind not in ("numeric", "categorical"):
            raise ConfigError(f"covariate {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "categorical" and not self.levels:
            raise ConfigError(f"covariate {self.name!r}: empty level set")
        if self.kind == "categorical" and len(set(self.levels)) != len(self.levels):
            raise ConfigError(f"covariate {self.name!r}: duplicate levels")
        object.__setattr__(self, "levels", tuple(self.levels))


@dataclass(frozen=True)
class CovariateSchema:
    """Ordered collection of covariates with unique names."""

    covariates: tuple

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        names = [c.name for c in self.covariates]
        if len(set(names)) != len(names):
            raise ConfigError("covariate names must be unique")

    @property
    def names(self):
        return tuple(c.name for c in self.covariates)

    def __getitem__(self, name):
        for c in self.covariates:
            if c.name == name:
                return c
        raise KeyError(name)

    def __contains__(self, name):
        return any(c.name == name for c in self.covariates)


@dataclass(frozen=True)
class ModelSpec:
    """One model configuration: predictors, BRT hyperparameters, spatial flag.

    Hyperparameter defaults follow the usual boosted-tree recommendations
    for this kind of data: tree_size 12, learning_rate 0.01, min_obs_leaf 3,
    bag_fraction 0.7.
    """

    name: str
    predictors: tuple
    tree_size: int = 12
    learning_rate: float = 0.01
    min_obs_leaf: int = 3
    bag_fraction: float = 0.7
    max_trees: int = 10_000
    internal_cv_folds: int = 5
    spatial: bool = False

    def __post_init__(self):
        object.__setattr__(self, "predictors", tuple(self.predictors))
        if not self.predictors:
            raise ConfigError(f"model {self.name!r}: empty predictor list")
        if not (0.0 < self.learning_rate <= 1.0):
            raise ConfigError(f"model {self.name!r}: learning_rate outside (0, 1]")
        if not (0.0 < self.bag_fraction <= 1.0):
            raise ConfigError(f"model {self.name!r}: bag_fraction outside (0, 1]")
        if self.tree_size < 1:
            raise ConfigError(f"model {self.name!r}: tree_size must be >= 1")
        if self.min_obs_leaf < 1:
            raise ConfigError(f"model {self.name!r}: min_obs_leaf must be >= 1")
        if self.max_trees < 1:
            raise ConfigError(f"model {self.name!r}: max_trees must be >= 1")
        if self.internal_cv_folds < 2:
            raise ConfigError(f"model {self.name!r}: internal_cv_folds must be >= 2")

    def validate_against(self, schema):
        unknown = [p for p in self.predictors if p not in schema]
        if unknown:
            raise ConfigError(
                f"model {self.name!r}: predictors not in schema: {unknown}")


def compute_stock(horizons, depth_cm):
    """Carbon stock (kg/m2) of the 0..depth_cm layer from horizon records.

    Each horizon contributes
    ``(p/100) * (BD*1000) * (SOC/100) * (1 - rf)`` where ``p`` is the
    thickness (cm) of the horizon part lying above ``depth_cm``.  The
    horizons must tile [0, depth_cm] with no gap or overlap.
    """
    if not (depth_cm > 0):
        raise DataError(f"depth_cm must be > 0, got {depth_cm}")
    relevant = sorted((h for h in horizons if h.top_cm < depth_cm - _DEPTH_TOL),
                      key=lambda h: (h.top_cm, h.bottom_cm))
    if not relevant:
        raise CoverageError(f"no horizons above {depth_cm} cm")
    if relevant[0].top_cm > _DEPTH_TOL:
        raise CoverageError(
            f"coverage starts at {relevant[0].top_cm} cm, not at the surface")
    reach = relevant[0].top_cm
    for h in relevant:
        if h.top_cm > reach + _DEPTH_TOL:
            raise CoverageError(
                f"gap between {reach} and {h.top_cm} cm in horizon coverage")
        if h.top_cm < reach - _DEPTH_TOL:
            raise CoverageError(
                f"overlap at {h.top_cm} cm in horizon coverage")
        reach = h.bottom_cm
    if reach < depth_cm - _DEPTH_TOL:
        raise CoverageError(
            f"horizons reach {reach} cm but {depth_cm} cm requested")

    stock = 0.0
    for h in relevant:
        p = min(h.bottom_cm, depth_cm) - h.top_cm
        stock += (p / 100.0) * (h.bulk_density * 1000.0) * (h.soc_pct / 100.0) \
            * (1.0 - h.rock_frag)
    return stock


def log_transform(records):
    """Natural log of the targets, as an array aligned with ``records``.

    Every target must be strictly positive; ``exp`` of the result recovers
    the original stocks.
    """
    z = np.empty(len(records))
    for i, rec in enumerate(records):
        if rec.target is None or not (rec.target > 0):
            raise DataError(
                f"site {rec.site_id!r}: target must be > 0 for log transform, "
                f"got {rec.target}")
        z[i] = math.log(rec.target)
    return z


def _parse_float(text, what, row_num):
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"row {row_num}: cannot parse {what} value {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"row {row_num}: non-finite {what} value {text!r}")
    return value


def load_horizon_csv(path):
    """Read a horizon CSV; returns records grouped by site_id (insertion order)."""
    groups: dict = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != HORIZON_COLUMNS:
            raise DataError(
                f"{path}: horizon CSV header must be {','.join(HORIZON_COLUMNS)}")
        for row_num, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(HORIZON_COLUMNS):
                raise DataError(f"row {row_num}: expected {len(HORIZON_COLUMNS)} "
                                f"fields, got {len(row)}")
            site_id = row[0].strip()
            rec = HorizonRecord(
                site_id=site_id,
                top_cm=_parse_float(row[1], "top_cm", row_num),
                bottom_cm=_parse_float(row[2], "bottom_cm", row_num),
                bulk_density=_parse_float(row[3], "bulk_density", row_num),
                soc_pct=_parse_float(row[4], "soc_pct", row_num),
                rock_frag=_parse_float(row[5], "rock_frag", row_num),
            )
            groups.setdefault(site_id, []).append(rec)
    return groups


def load_site_csv(path, schema, require_target=True):
    """Read a site CSV into SiteRecords validated against ``schema``.

    Empty covariate cells become missing values.  An empty target cell is a
    parse error when ``require_target`` (fit mode) and a prediction-only
    record otherwise.  Unknown columns and duplicated site ids are errors.
    """
    records = []
    seen_ids = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in header]
        for col in SITE_BASE_COLUMNS:
            if col not in header:
                raise DataError(f"{path}: missing required column {col!r}")
        cov_columns = [h for h in header if h not in SITE_BASE_COLUMNS]
        unknown = [c for c in cov_columns if c not in schema]
        if unknown:
            raise DataError(f"{path}: columns not in schema: {unknown}")
        idx = {name: header.index(name) for name in header}

        for row_num, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"row {row_num}: expected {len(header)} fields, "
                                f"got {len(row)}")
            site_id = row[idx["site_id"]].strip()
            if not site_id:
                raise DataError(f"row {row_num}: empty site_id")
            if site_id in seen_ids:
                raise DataError(f"row {row_num}: duplicated site_id {site_id!r}")
            seen_ids.add(site_id)

            target_text = row[idx["target"]].strip()
            if target_text == "":
                if require_target:
                    raise DataError(f"row {row_num}: missing target in fit mode")
                target = None
            else:
                target = _parse_float(target_text, "target", row_num)
                if target <= 0:
                    raise DataError(
                        f"row {row_num}: target must be > 0, got {target}")

            covs = {}
            for name in cov_columns:
                cell = row[idx[name]].strip()
                cov = schema[name]
                if cell == "":
                    if not cov.missing_allowed:
                        raise DataError(
                            f"row {row_num}: covariate {name!r} may not be missing")
                    covs[name] = None
                elif cov.kind == "numeric":
                    covs[name] = _parse_float(cell, name, row_num)
                else:
                    if cell not in cov.levels:
                        raise DataError(
                            f"row {row_num}: {cell!r} is not a level of {name!r}")
                    covs[name] = cell

            records.append(SiteRecord(
                site_id=site_id,
                x_km=_parse_float(row[idx["x_km"]], "x_km", row_num),
                y_km=_parse_float(row[idx["y_km"]], "y_km", row_num),
                target=target,
                covariates=covs,
            ))
    return records


def _format_value(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_site_csv(records, schema, path):
    """Write records to a site CSV; floats use shortest exact repr."""
    names = schema.names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(SITE_BASE_COLUMNS) + list(names))
        for rec in records:
            row = [rec.site_id, repr(float(rec.x_km)), repr(float(rec.y_km)),
                   _format_value(rec.target)]
            row.extend(_format_value(rec.covariates.get(name)) for name in names)
            writer.writerow(row)


def write_stock_csv(stocks, path):
    """Write (site_id, stock) pairs as a two-column CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["site_id", "target"])
        for site_id, stock in stocks:
            writer.writerow([site_id, repr(float(stock))])

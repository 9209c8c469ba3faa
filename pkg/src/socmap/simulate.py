"""Synthetic datasets with known structure, used as test oracles.

Draws site layouts, covariates, an additive trend, and a Gaussian random
field with exact Matern covariance (dense Cholesky), optionally
exponentiated to a lognormal target and contaminated with gross outliers.
Ground-truth components are returned alongside the site records so tests
can check estimators against what was actually simulated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import squareform, pdist

from .errors import ConfigError, NumericError
from .ingest import Covariate, CovariateSchema, SiteRecord
from .variogram import MaternModel, matern_correlation

__all__ = [
    "CovariateGen",
    "TrendTerm",
    "SimSpec",
    "GroundTruth",
    "simulate_field",
    "write_ground_truth_csv",
]

_MAX_SITES = 5000


@dataclass(frozen=True)
class CovariateGen:
    """Generator for one synthetic covariate.

    kinds: ``uniform`` (params low/high), ``normal`` (mean/sd),
    ``categorical`` (levels + probs).
    """

    name: str
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("uniform", "normal", "categorical"):
            raise ConfigError(f"covariate generator {self.name!r}: "
                              f"unknown kind {self.kind!r}")
        if self.kind == "categorical":
            levels = self.params.get("levels")
            if not levels:
                raise ConfigError(f"covariate generator {self.name!r}: no levels")

    def draw(self, rng, n):
        if self.kind == "uniform":
            return rng.uniform(self.params.get("low", 0.0),
                               self.params.get("high", 1.0), n)
        if self.kind == "normal":
            return rng.normal(self.params.get("mean", 0.0),
                              self.params.get("sd", 1.0), n)
        levels = list(self.params["levels"])
        probs = self.params.get("probs")
        idx = rng.choice(len(levels), size=n, p=probs)
        return np.array([levels[i] for i in idx], dtype=object)

    def schema_entry(self):
        if self.kind == "categorical":
            return Covariate(self.name, "categorical",
                             levels=tuple(self.params["levels"]))
        return Covariate(self.name, "numeric")


@dataclass(frozen=True)
class TrendTerm:
    """One additive trend component on the log scale.

    kinds: ``linear`` (coef), ``step`` (threshold, height),
    ``sine`` (amplitude, frequency), ``levels`` (effects: level -> offset).
    """

    covariate: str
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("linear", "step", "sine", "levels"):
            raise ConfigError(f"trend term on {self.covariate!r}: "
                              f"unknown kind {self.kind!r}")

    def evaluate(self, values):
        if self.kind == "levels":
            effects = self.params["effects"]
            return np.array([float(effects.get(v, 0.0)) for v in values])
        x = np.asarray(values, dtype=float)
        if self.kind == "linear":
            return self.params.get("coef", 1.0) * x
        if self.kind == "step":
            return np.where(x > self.params.get("threshold", 0.5),
                            self.params.get("height", 1.0), 0.0)
        return self.params.get("amplitude", 1.0) * np.sin(
            2.0 * math.pi * self.params.get("frequency", 1.0) * x)


@dataclass(frozen=True)
class SimSpec:
    """Full description of one synthetic dataset."""

    layout: dict             # {"kind": "grid", "spacing_km", "width_km", "height_km"}
                             # or {"kind": "random", "count", "width_km", "height_km"}
    residual: MaternModel
    covariates: tuple = ()
    trend: tuple = ()
    intercept: float = 0.0
    lognormal: bool = True
    contamination_fraction: float = 0.0
    contamination_magnitude: float = 10.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        object.__setattr__(self, "trend", tuple(self.trend))
        if not (0.0 <= self.contamination_fraction <= 0.2):
            raise ConfigError("contamination fraction outside [0, 0.2]")
        kind = self.layout.get("kind")
        if kind == "grid":
            if not self.layout.get("spacing_km", 0) > 0:
                raise ConfigError("grid layout needs positive spacing_km")
        elif kind == "random":
            if not self.layout.get("count", 0) > 0:
                raise ConfigError("random layout needs positive count")
        else:
            raise ConfigError(f"unknown layout kind {kind!r}")


@dataclass(frozen=True)
class GroundTruth:
    """Per-site simulated components on the log scale, plus outlier flags."""

    trend: np.ndarray
    grf: np.ndarray
    nugget: np.ndarray
    z: np.ndarray
    contaminated: np.ndarray


def _layout_coords(layout, rng):
    width = float(layout.get("width_km", 100.0))
    height = float(layout.get("height_km", width))
    if layout["kind"] == "grid":
        spacing = float(layout["spacing_km"])
        xs = np.arange(spacing / 2.0, width, spacing)
        ys = np.arange(spacing / 2.0, height, spacing)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])
    n = int(layout["count"])
    x = rng.uniform(0.0, width, n)
    y = rng.uniform(0.0, height, n)
    return np.column_stack([x, y])


def gaussian_random_field(coords, model, rng):
    """One GRF draw with covariance c1 * rho(h) via dense Cholesky.

    The nugget is NOT included here; it is independent site noise.  A
    1e-10 diagonal jitter is added once if the first factorization fails.
    """
    n = len(coords)
    if model.c1 <= 0:
        return np.zeros(n)
    dist = squareform(pdist(coords))
    cov = model.c1 * matern_correlation(dist, model.phi, model.kappa)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        try:
            chol = np.linalg.cholesky(cov + 1e-10 * np.eye(n))
        except np.linalg.LinAlgError:
            raise NumericError(
                "Matern covariance not positive definite after 1e-10 jitter")
    return chol @ rng.standard_normal(n)


def simulate_field(spec):
    """Simulate one dataset.

    Returns ``(records, truth, schema)``: SiteRecords with the simulated
    target and covariates, per-site GroundTruth components and the schema
    describing the synthetic covariates.

    Draw order is fixed (layout, covariates in declared order, field,
    nugget, contamination) so results are reproducible from the seed.
    """
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    coords = _layout_coords(spec.layout, rng)
    n = len(coords)
    if n > _MAX_SITES:
        raise ConfigError(f"{n} sites exceeds the dense-Cholesky limit {_MAX_SITES}")
    if n == 0:
        raise ConfigError("layout produced no sites")

    cov_values = {gen.name: gen.draw(rng, n) for gen in spec.covariates}

    trend = np.full(n, float(spec.intercept))
    for term in spec.trend:
        if term.covariate not in cov_values:
            raise ConfigError(f"trend references unknown covariate "
                              f"{term.covariate!r}")
        trend = trend + term.evaluate(cov_values[term.covariate])

    grf = gaussian_random_field(coords, spec.residual, rng)
    nugget = (math.sqrt(spec.residual.c0) * rng.standard_normal(n)
              if spec.residual.c0 > 0 else np.zeros(n))
    z = trend + grf + nugget

    target = np.exp(z) if spec.lognormal else z.copy()

    contaminated = np.zeros(n, dtype=bool)
    n_bad = round(spec.contamination_fraction * n)
    if n_bad:
        bad = rng.choice(n, size=n_bad, replace=False)
        contaminated[bad] = True
        target[bad] = target[bad] * spec.contamination_magnitude

    records = []
    width = max(5, len(str(n)))
    for i in range(n):
        covs = {}
        for gen in spec.covariates:
            v = cov_values[gen.name][i]
            covs[gen.name] = v if isinstance(v, str) else float(v)
        records.append(SiteRecord(
            site_id=f"sim{i:0{width}d}",
            x_km=float(coords[i, 0]), y_km=float(coords[i, 1]),
            target=float(target[i]), covariates=covs))

    truth = GroundTruth(trend=trend, grf=grf, nugget=nugget, z=z,
                        contaminated=contaminated)
    schema = CovariateSchema(tuple(gen.schema_entry() for gen in spec.covariates))
    return records, truth, schema


def write_ground_truth_csv(records, truth, path):
    """Per-site simulated components: site_id,trend,grf,nugget,contaminated."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["site_id", "trend", "grf", "nugget", "contaminated"])
        for rec, t, g, ng, bad in zip(records, truth.trend, truth.grf,
                                      truth.nugget, truth.contaminated):
            writer.writerow([rec.site_id, repr(float(t)), repr(float(g)),
                             repr(float(ng)), int(bad)])

"""Empirical variography and Matern model fitting for residual fields.

Provides the classical Matheron estimator and Dowd's robust median-based
estimator, the Matern semivariance model, and weighted-least-squares
fitting with Cressie weights over a deterministic multi-start grid.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.distance import pdist
from scipy.special import gamma as _gamma_fn

from .bessel import bessel_k
from .errors import DataError, FitError, NumericError

__all__ = [
    "VariogramBin",
    "EmpiricalVariogram",
    "MaternModel",
    "empirical_variogram",
    "matern_correlation",
    "matern_gamma",
    "fit_matern",
    "spatial_dependence",
    "effective_range",
    "write_variogram_csv",
]

#: Dowd scale constant: 2.198 = (1 / Phi^-1(0.75))^2 rescales the median
#: absolute pair difference to the variance of a Gaussian difference.
DOWD_CONSTANT = 2.198

KAPPA_MIN = 0.05
KAPPA_MAX = 10.0

#: Beyond this argument the Matern correlation underflows; treated as 0.
_RHO_CUTOFF = 600.0


@dataclass(frozen=True)
class VariogramBin:
    lower_km: float
    upper_km: float
    mean_distance_km: float
    pair_count: int
    gamma: float


@dataclass(frozen=True)
class EmpiricalVariogram:
    """Binned empirical semivariances with the estimator used."""

    bins: tuple
    estimator: str

    def __post_init__(self):
        object.__setattr__(self, "bins", tuple(self.bins))

    @property
    def distances(self):
        return np.array([b.mean_distance_km for b in self.bins])

    @property
    def gammas(self):
        return np.array([b.gamma for b in self.bins])

    @property
    def pair_counts(self):
        return np.array([b.pair_count for b in self.bins])


@dataclass(frozen=True)
class MaternModel:
    """Nugget + Matern structure: gamma(h) = c0 + c1 (1 - rho(h)).

    ``c0`` (nugget) and ``c1`` (partial sill) are in squared units of the
    variable, ``phi`` is the distance parameter in km and ``kappa`` the
    smoothness.
    """

    c0: float
    c1: float
    phi: float
    kappa: float

    def __post_init__(self):
        if self.c0 < 0 or self.c1 < 0:
            raise NumericError("variance parameters must be >= 0")
        if not (self.phi > 0):
            raise NumericError("phi must be > 0")
        if not (KAPPA_MIN <= self.kappa <= KAPPA_MAX):
            raise NumericError(
                f"kappa must lie in [{KAPPA_MIN}, {KAPPA_MAX}], got {self.kappa}")

    @property
    def sill(self):
        return self.c0 + self.c1


def empirical_variogram(coords, values, estimator="dowd", bin_edges=None,
                        n_bins=15, max_lag=None):
    """Binned empirical variogram of ``values`` observed at ``coords``.

    Parameters
    ----------
    coords : (n, 2) array
        Projected site coordinates in km.
    values : (n,) array
        Residuals (or any stationary variable) at the sites.
    estimator : {"dowd", "matheron"}
        ``matheron``: gamma = mean(diff^2) / 2 per bin.
        ``dowd``: gamma = 2.198 * median(|diff|)^2 / 2 per bin, robust to
        outlying differences.
    bin_edges : array, optional
        Explicit ascending lag-bin edges in km; bins are (lower, upper].
        Default: ``n_bins`` equal-width bins on (0, max_lag] with
        ``max_lag`` half the maximum inter-site distance.

    Bins with no pairs are dropped.  Zero-distance pairs never enter.
    """
    coords = np.asarray(coords, dtype=float)
    values = np.asarray(values, dtype=float)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise DataError("coords must be an (n, 2) array")
    if len(coords) != len(values):
        raise DataError("coords and values lengths differ")
    if len(coords) < 2:
        raise DataError("need at least 2 sites")
    if estimator not in ("dowd", "matheron"):
        raise DataError(f"unknown estimator {estimator!r}")

    dists = pdist(coords)
    if np.all(dists == 0.0):
        raise DataError("all sites are co-located: degenerate geometry")
    diffs = np.abs(pdist(values[:, None]))

    if bin_edges is None:
        if max_lag is None:
            max_lag = 0.5 * float(dists.max())
        bin_edges = np.linspace(0.0, max_lag, n_bins + 1)
    else:
        bin_edges = np.asarray(bin_edges, dtype=float)
        if bin_edges.ndim != 1 or len(bin_edges) < 2 or np.any(np.diff(bin_edges) <= 0):
            raise DataError("bin_edges must be ascending with >= 2 entries")

    keep = dists > 0.0
    dists = dists[keep]
    diffs = diffs[keep]

    bins = []
    for lo, hi in zip(bin_edges[:-1], bin_edges[1:]):
        sel = (dists > lo) & (dists <= hi)
        count = int(sel.sum())
        if count == 0:
            continue
        d_sel = diffs[sel]
        if estimator == "matheron":
            gamma = float(np.mean(d_sel ** 2) / 2.0)
        else:
            gamma = float(DOWD_CONSTANT * np.median(d_sel) ** 2 / 2.0)
        bins.append(VariogramBin(
            lower_km=float(lo), upper_km=float(hi),
            mean_distance_km=float(np.mean(dists[sel])),
            pair_count=count, gamma=gamma))
    return EmpiricalVariogram(bins=tuple(bins), estimator=estimator)


def matern_correlation(h, phi, kappa):
    """Matern correlation rho(h) = 2^(1-k)/Gamma(k) (h/phi)^k K_k(h/phi)."""
    h = np.asarray(h, dtype=float)
    x = h / phi
    rho = np.ones_like(x)
    pos = x > 0
    inside = pos & (x <= _RHO_CUTOFF)
    if inside.any():
        xv = x[inside]
        rho[inside] = (2.0 ** (1.0 - kappa) / _gamma_fn(kappa)) \
            * xv ** kappa * bessel_k(kappa, xv)
    rho[x > _RHO_CUTOFF] = 0.0
    # guard rounding just above 1 at tiny lags
    np.clip(rho, 0.0, 1.0, out=rho)
    return rho


def matern_gamma(model, h_km):
    """Semivariance gamma(h) of a nugget + Matern model.

    gamma(0) = 0 by convention; the nugget c0 is the limit from above.
    """
    h = np.asarray(h_km, dtype=float)
    if np.any(h < 0):
        raise DataError("negative lag distance")
    rho = matern_correlation(h, model.phi, model.kappa)
    gamma = model.c0 + model.c1 * (1.0 - rho)
    gamma = np.where(h == 0.0, 0.0, gamma)
    if gamma.ndim == 0:
        return float(gamma)
    return gamma


def spatial_dependence(model):
    """Share of spatially structured variance: c1 / (c0 + c1)."""
    total = model.c0 + model.c1
    if total <= 0:
        raise NumericError("spatial dependence undefined for c0 = c1 = 0")
    return model.c1 / total


def effective_range(model, level=0.95, h_max=None):
    """Distance at which gamma reaches ``level`` of its total sill.

    Bisection on the monotone semivariance; ``h_max`` defaults to 200 phi.
    """
    if model.c1 <= 0:
        return 0.0
    target = model.c0 + level * model.c1
    lo, hi = 0.0, h_max if h_max is not None else 200.0 * model.phi
    if matern_gamma(model, hi) < target:
        return math.inf
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if matern_gamma(model, mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _wls_objective(params, h, gamma_hat, counts):
    """Cressie-weighted squared misfit; params = (c0, c1, log phi, log kappa)."""
    c0, c1, log_phi, log_kappa = params
    phi = math.exp(log_phi)
    kappa = math.exp(log_kappa)
    rho = matern_correlation(h, phi, kappa)
    gamma_model = c0 + c1 * (1.0 - rho)
    gamma_safe = np.maximum(gamma_model, 1e-12)
    w = counts / gamma_safe ** 2
    return float(np.sum(w * (gamma_hat - gamma_model) ** 2))


def fit_matern(empirical, kappa=None, phi_bounds=None):
    """Fit a Matern model to an empirical variogram by weighted least squares.

    Minimizes sum_h N_h / gamma(h; theta)^2 * (gamma_hat(h) - gamma(h; theta))^2
    over (c0, c1, log phi, log kappa) with a deterministic 3x3x3x3 start
    grid and L-BFGS-B.  ``kappa`` may be fixed (recovery from a single
    realization identifies it poorly); bounds are kappa in [0.05, 10] and
    phi in [1 km, 2 * max lag] unless ``phi_bounds`` overrides.

    Raises FitError with best-so-far diagnostics if no start converges.
    """
    if len(empirical.bins) < 4:
        raise DataError("need at least 4 variogram bins to fit")
    h = empirical.distances
    gamma_hat = empirical.gammas
    counts = empirical.pair_counts.astype(float)

    scale = float(gamma_hat.max())
    if scale <= 0:
        # constant residuals: pure-zero variogram
        return _zero_model(h)
    max_lag = float(empirical.bins[-1].upper_km)
    if phi_bounds is None:
        phi_bounds = (min(1.0, 0.1 * max_lag), 2.0 * max_lag)
    log_phi_bounds = (math.log(phi_bounds[0]), math.log(phi_bounds[1]))

    if kappa is None:
        kappa_starts = np.geomspace(KAPPA_MIN * 2, KAPPA_MAX / 2, 3)
        log_kappa_bounds = (math.log(KAPPA_MIN), math.log(KAPPA_MAX))
    else:
        if not (KAPPA_MIN <= kappa <= KAPPA_MAX):
            raise DataError(f"fixed kappa outside [{KAPPA_MIN}, {KAPPA_MAX}]")
        kappa_starts = np.array([kappa])
        log_kappa_bounds = (math.log(kappa), math.log(kappa))

    c_starts = scale * np.array([0.05, 0.45, 0.95])
    phi_starts = np.geomspace(max(phi_bounds[0], 0.05 * max_lag),
                              min(phi_bounds[1], 1.5 * max_lag), 3)

    bounds = [(0.0, 10.0 * scale), (0.0, 10.0 * scale),
              log_phi_bounds, log_kappa_bounds]

    best = None
    failures = []
    for c0_0 in c_starts:
        for c1_0 in c_starts:
            for phi_0 in phi_starts:
                for kappa_0 in kappa_starts:
                    x0 = np.array([c0_0, c1_0, math.log(phi_0), math.log(kappa_0)])
                    res = minimize(
                        _wls_objective, x0, args=(h, gamma_hat, counts),
                        method="L-BFGS-B", bounds=bounds,
                        options={"maxiter": 500, "ftol": 1e-15, "gtol": 1e-12})
                    if not np.all(np.isfinite(res.x)) or not math.isfinite(res.fun):
                        failures.append(res.message)
                        continue
                    if best is None or res.fun < best.fun:
                        best = res
    if best is None:
        raise FitError("no Matern fit start converged", diagnostics=failures)

    c0, c1, log_phi, log_kappa = best.x
    return MaternModel(c0=float(max(c0, 0.0)), c1=float(max(c1, 0.0)),
                       phi=float(math.exp(log_phi)),
                       kappa=float(math.exp(log_kappa)))


def _zero_model(h):
    return MaternModel(c0=0.0, c1=0.0, phi=float(max(h.max(), 1.0)), kappa=0.5)


def write_variogram_csv(empirical, path, model=None):
    """One bin per row; appends the fitted model curve when given."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["lower_km", "upper_km", "mean_distance_km", "pair_count",
                  "gamma", "estimator"]
        if model is not None:
            header.append("gamma_fitted")
        writer.writerow(header)
        for b in empirical.bins:
            row = [repr(b.lower_km), repr(b.upper_km), repr(b.mean_distance_km),
                   b.pair_count, repr(b.gamma), empirical.estimator]
            if model is not None:
                row.append(repr(float(matern_gamma(model, b.mean_distance_km))))
            writer.writerow(row)

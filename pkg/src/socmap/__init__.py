"""Soil organic carbon stock prediction from covariates and coordinates.

Combines stochastic gradient boosted regression trees on log-transformed
stocks with robust geostatistics on the residuals (Dowd variography,
Matern models, Winsorizing, lognormal ordinary kriging), plus a Monte
Carlo cross-validation harness for comparing model configurations.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    CoverageError,
    DataError,
    FitError,
    NumericError,
    SocmapError,
    ValidityError,
)
from .ingest import (
    Covariate,
    CovariateSchema,
    HorizonRecord,
    ModelSpec,
    SiteRecord,
    compute_stock,
    load_horizon_csv,
    load_site_csv,
    log_transform,
    write_site_csv,
)

__all__ = [
    "__version__",
    "SocmapError", "ConfigError", "DataError", "CoverageError",
    "NumericError", "FitError", "ValidityError",
    "HorizonRecord", "SiteRecord", "Covariate", "CovariateSchema", "ModelSpec",
    "compute_stock", "load_horizon_csv", "load_site_csv", "log_transform",
    "write_site_csv",
]

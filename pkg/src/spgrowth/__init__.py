"""Spatial growth regressions with endogenous, economically weighted spatial weights.

Submodules
----------
weights      great-circle distances, physical/economic kernels, composite W
panel        country-panel ingestion and growth-variable derivation
likelihood   designs, spatial filter, exogenous and control-function likelihoods
estimators   OLS, exogenous-W ML, endogenous-W ML, constrained structural fits
inference    LM / robust RS endogeneity tests, restriction tests, Moran's I
simulate     synthetic data and the Monte Carlo harness
report, cli  Table-shaped reports and the ``spgrowth`` command
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403

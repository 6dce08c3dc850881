"""Integer-weight decision scorecards and offline policy evaluation.

Build sparse scoring rules by selecting features, fitting an L1-regularized
logistic model, and rescaling/rounding the coefficients to small integers;
evaluate candidate decision policies on observational data with
response-surface counterfactual estimates and a sensitivity analysis to an
unobserved binary covariate; relate rule simplicity to AUC analytically.
"""

__version__ = "0.1.0"

from . import data, glm, metrics, noise, policy, selection, srr, synth
from .errors import DataError, NumericError, ScorekitError

__all__ = [
    "data",
    "glm",
    "metrics",
    "noise",
    "policy",
    "selection",
    "srr",
    "synth",
    "DataError",
    "NumericError",
    "ScorekitError",
]

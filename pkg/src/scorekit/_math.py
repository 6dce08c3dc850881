"""Small numerical helpers used by several modules."""

from __future__ import annotations

import numpy as np

# Probabilities are clamped away from {0, 1} before any logit-scale solve;
# the mixture equations are undefined at the boundary.
PROB_CLIP = 1e-6


def expit(z):
    """Numerically stable logistic function, elementwise."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    if out.ndim == 0:
        return float(out)
    return out


def logit(p):
    p = np.asarray(p, dtype=float)
    out = np.log(p) - np.log1p(-p)
    if out.ndim == 0:
        return float(out)
    return out


def clip_prob(p, eps: float = PROB_CLIP):
    return np.clip(p, eps, 1.0 - eps)


def log_likelihood_bernoulli(eta, y) -> float:
    """Sum of Bernoulli log-likelihoods given linear predictors `eta`."""
    eta = np.asarray(eta, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def round_half_away_from_zero(x):
    """Round to nearest integer with exact .5 values rounded away from zero."""
    x = np.asarray(x, dtype=float)
    return np.copysign(np.floor(np.abs(x) + 0.5), x)

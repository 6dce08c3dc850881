"""Logistic regression solvers.

Two fitting routes: unregularized maximum likelihood via iteratively
reweighted least squares (:func:`fit_logistic`), and an L1-regularized
coordinate-descent path (:func:`fit_lasso_path`) with cross-validated
penalty selection (:func:`cv_select`).

The lasso standardizes features internally for penalization and reports
coefficients on the original scale; the intercept is never penalized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from ._math import expit, log_likelihood_bernoulli, logit
from .data import FoldAssignment
from .errors import DataError, NumericError

# |linear predictor| beyond this means fitted probabilities within ~3e-7 of
# 0/1; an unconverged fit drifting past it is treated as (quasi-)complete
# separation.  Convergence is checked first, so a genuinely converged steep
# fit is never flagged.
DIVERGENCE_BOUND = 15.0

_MIN_WEIGHT = 1e-6


@dataclass(frozen=True)
class GlmFit:
    """A fitted logistic model: intercept, slope coefficients, diagnostics."""

    intercept: float
    coefficients: np.ndarray
    converged: bool
    iterations: int
    log_likelihood: float

    def __post_init__(self):
        coefs = np.asarray(self.coefficients, dtype=float)
        coefs.flags.writeable = False
        object.__setattr__(self, "coefficients", coefs)
        if self.converged and not (
            np.isfinite(self.intercept)
            and np.all(np.isfinite(coefs))
            and np.isfinite(self.log_likelihood)
        ):
            raise NumericError("converged fit contains non-finite values")

    def to_json(self) -> str:
        return json.dumps(
            {
                "intercept": self.intercept,
                "coefficients": [float(c) for c in self.coefficients],
                "converged": self.converged,
                "iterations": self.iterations,
                "log_likelihood": self.log_likelihood,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "GlmFit":
        d = json.loads(text)
        return cls(
            intercept=d["intercept"],
            coefficients=np.asarray(d["coefficients"], dtype=float),
            converged=d["converged"],
            iterations=d["iterations"],
            log_likelihood=d["log_likelihood"],
        )


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise DataError("X must be a 2-d matrix")
    if y.shape != (X.shape[0],):
        raise DataError("y length does not match X")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise DataError("non-finite entries in X or y")
    return X, y


def fit_logistic(
    X,
    y,
    max_iter: int = 100,
    tol: float = 1e-7,
    on_divergence: str = "error",
) -> GlmFit:
    """Maximum-likelihood logistic fit via IRLS with step-halving.

    The log-likelihood is non-decreasing across iterations.  If the fitted
    log-odds drift past ``DIVERGENCE_BOUND`` the data are (quasi-)completely
    separated and the MLE does not exist; by default this raises,
    ``on_divergence="clamp"`` instead returns the (unconverged) fit at the
    point the bound was hit, which is what forward selection uses to rank a
    perfectly separating candidate.
    """
    if on_divergence not in ("error", "clamp"):
        raise ValueError("on_divergence must be 'error' or 'clamp'")
    X, y = _check_xy(X, y)
    n, p = X.shape
    # identically-zero columns carry no information; give them coefficient 0
    # rather than letting them make the normal equations singular
    live = np.any(X != 0.0, axis=0)
    if not live.all():
        reduced = fit_logistic(X[:, live], y, max_iter=max_iter, tol=tol, on_divergence=on_divergence)
        coefs = np.zeros(p)
        coefs[live] = reduced.coefficients
        return GlmFit(
            intercept=reduced.intercept,
            coefficients=coefs,
            converged=reduced.converged,
            iterations=reduced.iterations,
            log_likelihood=reduced.log_likelihood,
        )
    beta = np.zeros(p + 1)
    Xa = np.column_stack([np.ones(n), X])
    eta = Xa @ beta
    ll = log_likelihood_bernoulli(eta, y)

    for it in range(1, max_iter + 1):
        prob = expit(eta)
        w = np.maximum(prob * (1.0 - prob), _MIN_WEIGHT)
        z = eta + (y - prob) / w
        WX = Xa * w[:, None]
        try:
            new_beta = np.linalg.solve(Xa.T @ WX, WX.T @ z)
        except np.linalg.LinAlgError:
            raise NumericError(
                "singular weighted normal equations (exactly collinear columns?)"
            ) from None
        if not np.all(np.isfinite(new_beta)):
            raise NumericError("weighted least squares produced non-finite coefficients")

        # step-halving keeps the log-likelihood non-decreasing
        step = new_beta - beta
        factor = 1.0
        for _ in range(30):
            candidate = beta + factor * step
            cand_eta = Xa @ candidate
            cand_ll = log_likelihood_bernoulli(cand_eta, y)
            if cand_ll >= ll - 1e-12:
                break
            factor /= 2.0
        delta = float(np.max(np.abs(factor * step)))
        beta = candidate
        eta = cand_eta
        ll = cand_ll

        if delta < tol:
            return GlmFit(
                intercept=float(beta[0]),
                coefficients=beta[1:].copy(),
                converged=True,
                iterations=it,
                log_likelihood=ll,
            )
        if np.max(np.abs(eta)) > DIVERGENCE_BOUND:
            if on_divergence == "error":
                raise NumericError(
                    "quasi-complete separation detected: coefficients diverging, "
                    f"fitted log-odds exceeded +-{DIVERGENCE_BOUND:g}; "
                    "the MLE does not exist for these data"
                )
            return GlmFit(
                intercept=float(beta[0]),
                coefficients=beta[1:].copy(),
                converged=False,
                iterations=it,
                log_likelihood=ll,
            )

    return GlmFit(
        intercept=float(beta[0]),
        coefficients=beta[1:].copy(),
        converged=False,
        iterations=max_iter,
        log_likelihood=ll,
    )


def deviance(fit: GlmFit, X, y) -> float:
    """Residual deviance, -2 * log-likelihood, of a fit on (X, y)."""
    X, y = _check_xy(X, y)
    eta = fit.intercept + X @ fit.coefficients
    return -2.0 * log_likelihood_bernoulli(eta, y)


# ---------------------------------------------------------------------------
# L1-regularized path
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LassoPath:
    """Coefficients along a decreasing penalty grid, original scale.

    The first grid point is the smallest penalty that zeroes every slope,
    so ``coefficients[0]`` is exactly zero.  ``cv_mean`` / ``cv_se`` hold the
    per-penalty mean and standard error of validation deviance once
    :func:`cv_select` has run; ``selected_index`` points at the winner.
    """

    lambda_grid: np.ndarray
    intercepts: np.ndarray
    coefficients: np.ndarray
    cv_mean: np.ndarray | None = None
    cv_se: np.ndarray | None = None
    selected_index: int | None = None

    def __post_init__(self):
        grid = np.asarray(self.lambda_grid, dtype=float)
        if np.any(np.diff(grid) >= 0):
            raise NumericError("lambda grid must be strictly decreasing")
        for name in ("lambda_grid", "intercepts", "coefficients", "cv_mean", "cv_se"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=float)
                arr.flags.writeable = False
                object.__setattr__(self, name, arr)

    @property
    def n_lambda(self) -> int:
        return len(self.lambda_grid)

    @property
    def selected_lambda(self) -> float:
        return float(self.lambda_grid[self._need_selected()])

    def _need_selected(self) -> int:
        if self.selected_index is None:
            raise NumericError("no penalty selected; run cv_select first")
        return self.selected_index

    def coefficients_at(self, index: int | None = None) -> tuple[float, np.ndarray]:
        i = self._need_selected() if index is None else index
        return float(self.intercepts[i]), self.coefficients[i]

    def predict_prob(self, X, index: int | None = None) -> np.ndarray:
        b0, coefs = self.coefficients_at(index)
        X = np.asarray(X, dtype=float)
        return expit(b0 + X @ coefs)

    def linear_score(self, X, index: int | None = None) -> np.ndarray:
        b0, coefs = self.coefficients_at(index)
        X = np.asarray(X, dtype=float)
        return b0 + X @ coefs

    def to_json(self) -> str:
        d = {
            "lambda_grid": [float(v) for v in self.lambda_grid],
            "intercepts": [float(v) for v in self.intercepts],
            "coefficients": [[float(v) for v in row] for row in self.coefficients],
            "cv_mean": None if self.cv_mean is None else [float(v) for v in self.cv_mean],
            "cv_se": None if self.cv_se is None else [float(v) for v in self.cv_se],
            "selected_index": self.selected_index,
        }
        return json.dumps(d, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "LassoPath":
        d = json.loads(text)
        return cls(
            lambda_grid=np.asarray(d["lambda_grid"], dtype=float),
            intercepts=np.asarray(d["intercepts"], dtype=float),
            coefficients=np.asarray(d["coefficients"], dtype=float),
            cv_mean=None if d["cv_mean"] is None else np.asarray(d["cv_mean"], dtype=float),
            cv_se=None if d["cv_se"] is None else np.asarray(d["cv_se"], dtype=float),
            selected_index=d["selected_index"],
        )


def _standardize(X):
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    keep = sd > 0.0
    sd_safe = np.where(keep, sd, 1.0)
    return (X - mean) / sd_safe, mean, sd_safe, keep


def _soft(v: float, t: float) -> float:
    if v > t:
        return v - t
    if v < -t:
        return v + t
    return 0.0


def _cd_weighted_lasso(G, h, beta, b0, lam, keep, tol, max_sweeps):
    """Coordinate descent on the weighted quadratic surrogate, in Gram space.

    Minimizes  (1/2n) sum_i w_i (z_i - b0 - x_i beta)^2 + lam * ||beta||_1
    given the Gram pieces of the augmented design [1, Xs]:
    ``G = Xa' W Xa / n`` and ``h = Xa' W z / n``.  Each coordinate update is
    O(p), so sweeps cost O(p^2) regardless of the sample count; coordinate 0
    (the intercept) is unpenalized.  Uses an active-set strategy: full sweeps
    to discover the active set, then cheap sweeps over nonzeros until stable.
    Returns the updated intercept; `beta` is updated in place.
    """
    p = len(beta)
    aug = np.concatenate([[b0], beta])
    q = G @ aug

    def update(j: int, penalty: float) -> float:
        nonlocal q
        gjj = G[j, j]
        if gjj <= 0.0:
            return 0.0
        num = h[j] - q[j] + gjj * aug[j]
        new = _soft(num, penalty) / gjj
        d = new - aug[j]
        if d != 0.0:
            aug[j] = new
            q += G[:, j] * d
        return abs(d)

    def sweep(indices) -> float:
        max_delta = update(0, 0.0)
        for j in indices:
            if keep[j]:
                max_delta = max(max_delta, update(j + 1, lam))
        return max_delta

    all_idx = np.arange(p)
    for _ in range(max_sweeps):
        if sweep(all_idx) < tol:
            break
        active = np.flatnonzero(aug[1:])
        for _ in range(max_sweeps):
            if sweep(active) < tol:
                break
    beta[:] = aug[1:]
    return float(aug[0])


def fit_lasso_path(
    X,
    y,
    n_lambda: int = 100,
    lambda_min_ratio: float = 1e-4,
    tol: float = 1e-7,
    max_sweeps: int = 10000,
    max_outer: int = 50,
    lambda_grid=None,
) -> LassoPath:
    """L1-penalized logistic path by proximal Newton + coordinate descent.

    The grid is log-spaced from the smallest penalty with an all-zero
    solution (computed from the null-model gradient) down to
    ``lambda_min_ratio`` times that; solutions are warm-started along the
    path.  Passing ``lambda_grid`` overrides the grid (used by CV so every
    fold shares one grid).
    """
    X, y = _check_xy(X, y)
    n, p = X.shape
    if n < 2:
        raise DataError("need at least two rows")
    ybar = y.mean()
    if ybar <= 0.0 or ybar >= 1.0:
        raise DataError("y contains a single class; cannot fit a lasso path")

    Xs, mean, sd, keep = _standardize(X)
    if lambda_grid is None:
        lam_max = float(np.max(np.abs(Xs.T @ (y - ybar))) / n)
        if lam_max <= 0.0:
            lam_max = 1.0  # y independent of every column; any grid gives zeros
        grid = np.geomspace(lam_max, lam_max * lambda_min_ratio, n_lambda)
    else:
        grid = np.asarray(lambda_grid, dtype=float)

    L = len(grid)
    intercepts = np.empty(L)
    coefs_std = np.zeros((L, p))
    beta = np.zeros(p)
    b0 = float(logit(ybar))

    start = 0
    if lambda_grid is None:
        # at the computed lambda_max the all-zero slope vector is the exact
        # solution; assign it rather than letting float noise leak through CD
        intercepts[0] = b0
        start = 1

    Xa = np.column_stack([np.ones(n), Xs])
    for i, lam in enumerate(grid):
        if i < start:
            continue
        for _ in range(max_outer):
            eta = b0 + Xs @ beta
            prob = expit(eta)
            w = np.maximum(prob * (1.0 - prob), _MIN_WEIGHT)
            z = eta + (y - prob) / w
            WXa = Xa * w[:, None]
            G = (Xa.T @ WXa) / n
            h = (WXa.T @ z) / n
            before = beta.copy()
            b0_before = b0
            b0 = _cd_weighted_lasso(G, h, beta, b0, lam, keep, tol, max_sweeps)
            if max(np.max(np.abs(beta - before)), abs(b0 - b0_before)) < tol:
                break
        intercepts[i] = b0
        coefs_std[i] = beta

    coefs = coefs_std / sd
    out_intercepts = intercepts - coefs @ mean
    return LassoPath(
        lambda_grid=grid,
        intercepts=out_intercepts,
        coefficients=coefs,
    )


def kkt_violation(path: LassoPath, X, y, index: int) -> tuple[float, float]:
    """Max KKT residuals at one grid point: (inactive excess, active residual).

    For zero coefficients the penalized gradient must satisfy |g_j| <= lam;
    for nonzero coefficients g_j + lam * sign(beta_j) must vanish.  Gradients
    are evaluated on the internal standardized scale where the penalty
    applies.
    """
    X, y = _check_xy(X, y)
    n = X.shape[0]
    Xs, mean, sd, keep = _standardize(X)
    lam = float(path.lambda_grid[index])
    b0, coefs = path.coefficients_at(index)
    beta_std = coefs * sd
    eta = b0 + X @ coefs
    grad = Xs.T @ (expit(eta) - y) / n
    zero = (beta_std == 0.0) & keep
    active = (beta_std != 0.0) & keep
    inactive_excess = float(np.max(np.abs(grad[zero]) - lam)) if zero.any() else 0.0
    active_resid = (
        float(np.max(np.abs(grad[active] + lam * np.sign(beta_std[active]))))
        if active.any()
        else 0.0
    )
    return inactive_excess, active_resid


def validation_deviance(intercept: float, coefs, X, y) -> float:
    """Mean per-observation binomial deviance of a fitted model on (X, y)."""
    X, y = _check_xy(X, y)
    eta = intercept + X @ coefs
    return -2.0 * log_likelihood_bernoulli(eta, y) / len(y)


def cv_select(
    X,
    y,
    folds: FoldAssignment,
    n_lambda: int = 100,
    lambda_min_ratio: float = 1e-4,
    tol: float = 1e-7,
    rule: str = "min",
) -> LassoPath:
    """Cross-validate the penalty grid and select the deviance minimizer.

    The grid comes from a fit on the full data; each fold refits on its
    training portion over the same grid and scores mean validation deviance.
    Ties break toward the larger penalty.  ``rule="min"`` (the default)
    takes the argmin of mean validation deviance; ``rule="1se"`` backs off
    to the largest penalty within one standard error of that minimum, which
    is far more conservative on pure-noise data (the min rule lets small
    spurious coefficients through in a sizable minority of runs).
    """
    if rule not in ("min", "1se"):
        raise ValueError("rule must be 'min' or '1se'")
    X, y = _check_xy(X, y)
    if folds.n != X.shape[0]:
        raise DataError("fold assignment does not cover X's rows")
    full = fit_lasso_path(X, y, n_lambda=n_lambda, lambda_min_ratio=lambda_min_ratio, tol=tol)
    grid = full.lambda_grid
    per_fold = np.empty((folds.fold_count, len(grid)))
    for f in range(folds.fold_count):
        tr = folds.train_indices(f)
        va = folds.test_indices(f)
        for part, where in ((y[tr], "training"), (y[va], "validation")):
            if len(np.unique(part)) < 2:
                raise NumericError(
                    f"fold {f} has a single-class {where} split; "
                    "use stratified folds (kfold with labels)"
                )
        sub = fit_lasso_path(X[tr], y[tr], lambda_grid=grid, tol=tol)
        for i in range(len(grid)):
            per_fold[f, i] = validation_deviance(
                sub.intercepts[i], sub.coefficients[i], X[va], y[va]
            )
    cv_mean = per_fold.mean(axis=0)
    cv_se = per_fold.std(axis=0, ddof=1) / np.sqrt(folds.fold_count)
    best = int(np.argmin(cv_mean))  # first minimum = largest penalty on ties
    if rule == "1se":
        selected = int(np.argmax(cv_mean <= cv_mean[best] + cv_se[best]))
    else:
        selected = best
    return replace(full, cv_mean=cv_mean, cv_se=cv_se, selected_index=selected)


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------


def linear_score(fit: GlmFit, x) -> np.ndarray | float:
    """Linear predictor (logit scale) for one row or a matrix of rows."""
    x = np.asarray(x, dtype=float)
    p = len(fit.coefficients)
    if x.shape[-1] != p:
        raise DataError(f"feature vector has length {x.shape[-1]}, model expects {p}")
    out = fit.intercept + x @ fit.coefficients
    return float(out) if np.ndim(out) == 0 else out


def predict_prob(fit: GlmFit, x) -> np.ndarray | float:
    """Fitted probability logit^{-1}(intercept + coef . x)."""
    return expit(linear_score(fit, x))

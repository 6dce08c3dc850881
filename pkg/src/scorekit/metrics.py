"""Classification metrics and the cross-validated k x M evaluation sweep."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import Dataset, FoldAssignment, kfold
from .errors import DataError, NumericError
from .glm import cv_select, fit_logistic
from .selection import forward_stepwise
from .srr import rescale_round


def auc(scores, labels) -> float:
    """Probability a random positive outscores a random negative.

    Mann-Whitney statistic computed by rank-sum in O(n log n); tied pairs
    count one half.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise DataError("scores and labels must be 1-d and the same length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC needs both classes present")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    # average ranks within tie groups
    boundaries = np.flatnonzero(np.diff(sorted_scores) != 0) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [len(scores)]])
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = 0.5 * (s + e - 1) + 1.0
    rank_sum = ranks[pos].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def accuracy(predictions, labels) -> float:
    """Fraction of exact matches between two binary vectors."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise DataError("predictions and labels must have the same length")
    return float(np.mean(predictions == labels))


def best_threshold(scores, labels) -> float:
    """Score cutoff (predict 1 iff score >= cutoff) maximizing accuracy.

    Candidates are the distinct observed scores plus one above the max;
    ties break toward the smaller cutoff.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    candidates = np.concatenate([np.unique(scores), [np.max(scores) + 1.0]])
    best_t, best_acc = candidates[0], -1.0
    for t in candidates:
        acc = accuracy((scores >= t).astype(int), labels)
        if acc > best_acc + 1e-12:
            best_t, best_acc = t, acc
    return float(best_t)


# ---------------------------------------------------------------------------
# k x M sweep
# ---------------------------------------------------------------------------

SCORECARD = "scorecard"
LOGISTIC_FULL = "logistic_full"
LASSO_FULL = "lasso_full"
LASSO_SELECTED = "lasso_selected"


@dataclass(frozen=True)
class SweepCell:
    method: str
    k: int | None
    M: int | None
    fold: int
    auc: float
    accuracy: float
    error: str | None = None


@dataclass(frozen=True)
class SweepResult:
    """Per-fold AUC/accuracy for every (k, M) cell plus benchmark rows."""

    cells: tuple[SweepCell, ...]
    k_values: tuple[int, ...]
    M_values: tuple[int, ...]

    def __post_init__(self):
        for cell in self.cells:
            if cell.error is None and not 0.0 <= cell.auc <= 1.0:
                raise NumericError("AUC outside [0, 1]")
        requested = {(k, M) for k in self.k_values for M in self.M_values}
        seen = {(c.k, c.M) for c in self.cells if c.method == SCORECARD}
        if seen != requested:
            raise NumericError("sweep grid does not cover the requested (k, M) set exactly")
        object.__setattr__(self, "cells", tuple(self.cells))

    def mean_auc(self, method: str, k: int | None = None, M: int | None = None) -> float:
        vals = [
            c.auc
            for c in self.cells
            if c.method == method and c.error is None
            and (k is None or c.k == k) and (M is None or c.M == M)
        ]
        if not vals:
            raise NumericError(f"no successful cells for {method} (k={k}, M={M})")
        return float(np.mean(vals))

    def to_csv(self, path, config_comment: str | None = None) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            if config_comment:
                fh.write(f"# {config_comment}\n")
            writer = csv.writer(fh)
            writer.writerow(["method", "k", "M", "fold", "auc", "accuracy", "error"])
            for c in self.cells:
                writer.writerow(
                    [
                        c.method,
                        "" if c.k is None else c.k,
                        "" if c.M is None else c.M,
                        c.fold,
                        "" if c.error else repr(c.auc),
                        "" if c.error else repr(c.accuracy),
                        c.error or "",
                    ]
                )


def _prob_cells(method, fold, prob_test, y_test) -> SweepCell:
    return SweepCell(
        method=method,
        k=None,
        M=None,
        fold=fold,
        auc=auc(prob_test, y_test),
        accuracy=accuracy((np.asarray(prob_test) >= 0.5).astype(int), y_test),
    )


def cv_sweep(
    ds: Dataset,
    k_values,
    M_values,
    folds: FoldAssignment,
    grouped: bool = True,
    n_lambda: int = 30,
    lambda_min_ratio: float = 1e-3,
    inner_folds: int = 5,
    seed: int = 0,
) -> SweepResult:
    """Cross-validated accuracy of scorecards over a (k, M) grid.

    Per fold: select/regress on the training part, score the held-out part
    with the integer weights.  Benchmarks fitted on the same folds:
    full-feature logistic regression, full-feature lasso, and the unrounded
    selected-feature lasso that the scorecard rounds.  A failing cell records
    its error and the sweep continues.
    """
    k_values = tuple(sorted(set(int(k) for k in k_values)))
    M_values = tuple(sorted(set(int(M) for M in M_values)))
    if folds.n != ds.n:
        raise DataError("fold assignment does not cover the dataset")
    cells: list[SweepCell] = []
    k_max = max(k_values)

    for f in range(folds.fold_count):
        tr_idx, te_idx = folds.train_indices(f), folds.test_indices(f)
        train, test = ds.take(tr_idx), ds.take(te_idx)
        y_tr = train.labels.astype(float)
        y_te = test.labels

        # benchmarks on all features
        try:
            full_fit = fit_logistic(train.rows, y_tr, on_divergence="clamp")
            prob = 1.0 / (1.0 + np.exp(-(full_fit.intercept + test.rows @ full_fit.coefficients)))
            cells.append(_prob_cells(LOGISTIC_FULL, f, prob, y_te))
        except (DataError, NumericError) as exc:
            cells.append(SweepCell(LOGISTIC_FULL, None, None, f, np.nan, np.nan, str(exc)))
        inner = kfold(train.n, inner_folds, seed=seed * 100003 + f, labels=train.labels)
        try:
            full_path = cv_select(
                train.rows, y_tr, inner, n_lambda=n_lambda, lambda_min_ratio=lambda_min_ratio
            )
            cells.append(_prob_cells(LASSO_FULL, f, full_path.predict_prob(test.rows), y_te))
        except (DataError, NumericError) as exc:
            cells.append(SweepCell(LASSO_FULL, None, None, f, np.nan, np.nan, str(exc)))

        try:
            trace = forward_stepwise(train, min(k_max, _n_selectable(train, grouped)), grouped=grouped)
        except (DataError, NumericError) as exc:
            for k in k_values:
                cells.append(SweepCell(LASSO_SELECTED, k, None, f, np.nan, np.nan, str(exc)))
                for M in M_values:
                    cells.append(SweepCell(SCORECARD, k, M, f, np.nan, np.nan, str(exc)))
            continue

        for k in k_values:
            try:
                if k > len(trace.step_groups):
                    raise DataError(
                        f"k={k} exceeds the {len(trace.step_groups)} selectable features"
                    )
                cols = [j for g in trace.step_groups[:k] for j in g]
                path = cv_select(
                    train.rows[:, cols],
                    y_tr,
                    inner,
                    n_lambda=n_lambda,
                    lambda_min_ratio=lambda_min_ratio,
                )
                intercept, coefs = path.coefficients_at()
                score_te_raw = path.linear_score(test.rows[:, cols])
                cells.append(
                    SweepCell(
                        LASSO_SELECTED,
                        k,
                        None,
                        f,
                        auc(score_te_raw, y_te),
                        accuracy((path.predict_prob(test.rows[:, cols]) >= 0.5).astype(int), y_te),
                    )
                )
            except (DataError, NumericError) as exc:
                cells.append(SweepCell(LASSO_SELECTED, k, None, f, np.nan, np.nan, str(exc)))
                for M in M_values:
                    cells.append(SweepCell(SCORECARD, k, M, f, np.nan, np.nan, str(exc)))
                continue

            for M in M_values:
                try:
                    w = rescale_round(coefs, M)
                    s_tr = train.rows[:, cols] @ w
                    s_te = test.rows[:, cols] @ w
                    cell_auc = auc(s_te, y_te)
                    t = best_threshold(s_tr, train.labels)
                    cells.append(
                        SweepCell(
                            SCORECARD,
                            k,
                            M,
                            f,
                            cell_auc,
                            accuracy((s_te >= t).astype(int), y_te),
                        )
                    )
                except (DataError, NumericError) as exc:
                    cells.append(SweepCell(SCORECARD, k, M, f, np.nan, np.nan, str(exc)))

    return SweepResult(cells=tuple(cells), k_values=k_values, M_values=M_values)


def _n_selectable(ds: Dataset, grouped: bool) -> int:
    return len(set(ds.column_groups)) if grouped else ds.p

"""Map the whole complexity-performance tradeoff on one dataset.

For every feature budget k and weight bound M, build scorecards by
cross-validation and compare against three benchmarks trained on all
features: plain logistic regression, the cross-validated lasso, and the
unrounded selected-feature lasso the cards are rounded from.  The point of
the exercise: the curve flattens fast - a handful of features with weights
in [-3, 3] buys most of what the full model knows.
"""

import time

from scorekit import data, metrics
from scorekit.datasets import load_heart

print(__doc__)

ds = load_heart()
print(f"bundled heart-style table: {ds.n} rows, {ds.p} indicator columns "
      f"({len(set(ds.column_groups))} source features)\n")

t0 = time.time()
folds = data.kfold(ds.n, 10, seed=0, labels=ds.labels)
sweep = metrics.cv_sweep(
    ds, k_values=range(1, 9), M_values=(1, 2, 3), folds=folds,
    n_lambda=25, inner_folds=5, seed=0,
)

print("mean 10-fold CV AUC by feature budget k (rows) and weight bound M (columns):")
print("   k    M=1     M=2     M=3     unrounded")
for k in sweep.k_values:
    cells = "  ".join(f"{sweep.mean_auc(metrics.SCORECARD, k, M):.4f}" for M in sweep.M_values)
    unrounded = sweep.mean_auc(metrics.LASSO_SELECTED, k)
    print(f"   {k}  {cells}    {unrounded:.4f}")

print(f"\nfull-feature benchmarks: logistic {sweep.mean_auc(metrics.LOGISTIC_FULL):.4f}, "
      f"lasso {sweep.mean_auc(metrics.LASSO_FULL):.4f}")
print(f"(swept {len(sweep.cells)} cells in {time.time()-t0:.0f}s)")

gap = sweep.mean_auc(metrics.LASSO_FULL) - sweep.mean_auc(metrics.SCORECARD, 5, 3)
print(f"\nfive features with weights in [-3, 3] sit {100 * gap:.1f} AUC points "
      "behind the full-feature lasso.")

"""Why do crude integer rules score nearly as well as the full model?

Treat the full model's logit-scale scores as the "true" scores, with
class-conditional normal distributions of common variance.  Replacing them
with a simple rule acts like adding mean-zero noise, and the degraded
ranking quality has a closed form:

    auc_noisy = Phi( Phi^{-1}(auc_true) / sqrt(1 + gamma) ),

with gamma the noise-to-signal variance ratio.  The curve is remarkably
flat: noise as large as half the within-class variance costs only a few
AUC points.  This demo checks the formula by simulation and then measures
gamma for a real rounded rule on the bundled dataset.
"""

import numpy as np

from scorekit import data, glm, noise, srr
from scorekit.datasets import load_heart

print(__doc__)

print("analytic curve (rows: true AUC; columns: gamma):")
gammas = (0.0, 0.25, 0.5, 1.0, 2.0)
print("          " + "".join(f"g={g:<6}" for g in gammas))
for a in (0.95, 0.90, 0.85, 0.80, 0.70):
    row = "".join(f"{noise.auc_under_noise(a, g):<8.3f}" for g in gammas)
    print(f"  auc={a:.2f} {row}")

print("\nsimulation check at the canonical point (true AUC 0.90, gamma 0.5):")
emp, ana, diff = noise.verify_theorem_mc(0.90, 0.5, 200000, seed=1)
print(f"  analytic {ana:.4f}   simulated {emp:.4f}   |difference| {diff:.4f}")

print("\nmeasuring gamma for a (k=5, M=3) card on the bundled heart-style table:")
ds = load_heart()
folds = data.kfold(ds.n, 10, seed=0, labels=ds.labels)
card = srr.build_scorecard(ds, k=5, M=3, folds_for_lambda=folds)
print(card.render())

full_model = glm.cv_select(ds.rows, ds.labels.astype(float), folds)
true_scores = full_model.linear_score(ds.rows)
simple_scores = srr.score_rows(card, ds)
model = noise.estimate_gamma(true_scores, simple_scores, card.scaling, ds.labels)
print(f"\n  within-class sd of true scores: {model.sigma:.3f}")
print(f"  sd of the rounding noise:       {model.sigma_eps:.3f}")
print(f"  gamma = {model.gamma:.3f}")
print(f"  predicted AUC drop: {model.auc_true:.3f} -> {model.auc_noisy:.3f}")
print("\n(cross-dataset experience puts gamma around 0.2 for five-feature")
print(" rules with weights in [-3, 3]; anything under ~1 costs little.)")

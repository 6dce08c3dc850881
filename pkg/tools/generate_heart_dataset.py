"""Regenerate the bundled heart-disease-style dataset.

Offline environments cannot fetch the classic public heart tables, so the
package ships a synthetic stand-in with the familiar schema (age, sex, chest
pain type, resting blood pressure, cholesterol, max heart rate, ST
depression, vessel count, thalassemia, ...) and a disease label driven by a
plausible logistic model concentrated on a handful of features.  Fixed seed;
running this script rewrites src/scorekit/datasets/heart_synthetic.csv
byte-for-byte.
"""

import csv
import os

import numpy as np

N = 500
SEED = 20240817
OUT = os.path.join(
    os.path.dirname(__file__), "..", "src", "scorekit", "datasets", "heart_synthetic.csv"
)


def main() -> None:
    rng = np.random.default_rng(SEED)
    age = np.clip(rng.normal(54, 9, N).round(), 29, 77).astype(int)
    sex = (rng.random(N) < 0.68).astype(int)
    cp = rng.choice([1, 2, 3, 4], size=N, p=[0.08, 0.17, 0.28, 0.47])
    trestbps = np.clip(rng.normal(131, 17, N).round(), 94, 200).astype(int)
    chol = np.clip(rng.normal(246, 50, N).round(), 126, 420).astype(int)
    fbs = (rng.random(N) < 0.15).astype(int)
    restecg = rng.choice([0, 1, 2], size=N, p=[0.49, 0.03, 0.48])
    thalach = np.clip((202 - 1.0 * age + rng.normal(0, 18, N)).round(), 71, 202).astype(int)
    exang = (rng.random(N) < 1 / (1 + np.exp(-(-1.4 + 1.3 * (cp == 4))))).astype(int)
    oldpeak = np.clip(np.round(rng.gamma(1.1, 1.0, N) - 0.25, 1), 0.0, 6.2)
    slope_logit = -0.3 + 0.9 * (oldpeak > 1.0)
    slope = np.where(
        rng.random(N) < 1 / (1 + np.exp(-slope_logit)),
        rng.choice([2, 3], size=N, p=[0.82, 0.18]),
        1,
    )
    ca = rng.choice([0, 1, 2, 3], size=N, p=[0.59, 0.21, 0.12, 0.08])
    thal = rng.choice([3, 6, 7], size=N, p=[0.55, 0.12, 0.33])

    eta = (
        -4.6
        + 2.0 * (thal == 7)
        + 1.3 * (thal == 6)
        + 1.6 * (ca >= 1)
        + 0.9 * (ca >= 2)
        + 1.8 * (cp == 4)
        + 0.55 * (cp == 3)
        + 0.8 * exang
        + 0.75 * oldpeak
        - 0.035 * (thalach - 150)
        + 0.6 * sex
        + 0.03 * (age - 54)
        + 0.4 * (slope >= 2)
        + 0.007 * (trestbps - 131)
        + 0.003 * (chol - 246)
    )
    disease = (rng.random(N) < 1 / (1 + np.exp(-eta))).astype(int)

    header = [
        "age", "sex", "cp", "trestbps", "chol", "fbs", "restecg",
        "thalach", "exang", "oldpeak", "slope", "ca", "thal", "disease",
    ]
    with open(os.path.abspath(OUT), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(N):
            writer.writerow(
                [
                    age[i], sex[i], cp[i], trestbps[i], chol[i], fbs[i], restecg[i],
                    thalach[i], exang[i], repr(float(oldpeak[i])), slope[i], ca[i],
                    thal[i], disease[i],
                ]
            )
    print(f"wrote {os.path.abspath(OUT)} (disease rate {disease.mean():.3f})")


if __name__ == "__main__":
    main()

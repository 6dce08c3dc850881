"""Synthetic bail-domain cohorts with stored potential outcomes.

The generator draws covariates (binned age, prior-failure counts, noise
features), assigns each case to a judge, draws the release decision from a
logistic selection model on the observed covariates and the judge, and draws
both potential outcomes from logistic outcome models.  Because both
potential outcomes are recorded, the exact value of any policy can be
computed and used as ground truth for the estimators that only see observed
data.  Ignorability holds by construction unless a hidden covariate is
switched on.

Intercepts are calibrated by root-finding so the cohort hits target
marginals (release rate, adverse rate among released / withheld) in
expectation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ._math import expit
from .data import Bins, Dataset, EncodingSpec, encode
from .errors import DataError, NumericError
from .policy import (
    ORACLE,
    CaseRecord,
    CaseTable,
    Policy,
    PolicyEstimate,
    SensitivityParams,
    stack_cases,
)
from .srr import RELEASE, WITHHOLD

AGE_LABELS = ("18_20", "21_25", "26_30", "31_35", "36_40", "41_45", "46_50", "51_plus")
PRIOR_LABELS = ("0", "1", "2", "3", "4_plus")

# Adverse-outcome log-odds profiles: risk falls with age, rises with prior
# failures; the withheld profile is flatter (failing after posting bail is
# rarer and less covariate-driven).
_DEFAULT_OUTCOME_RELEASE = {
    "age_18_20": 1.8, "age_21_25": 1.4, "age_26_30": 1.0, "age_31_35": 0.7,
    "age_36_40": 0.55, "age_41_45": 0.4, "age_46_50": 0.25,
    "priors_1": 1.1, "priors_2": 1.5, "priors_3": 1.75, "priors_4_plus": 2.0,
}
_DEFAULT_OUTCOME_WITHHOLD = {name: 0.5 * v for name, v in _DEFAULT_OUTCOME_RELEASE.items()}

# Judges release clean-record defendants far more readily, but beyond that
# first drop the release rate correlates only weakly with risk; the large
# judge-to-judge intercept spread dominates.
_DEFAULT_SELECTION = {
    "age_18_20": -0.96, "age_21_25": -0.72, "age_26_30": -0.51, "age_31_35": -0.35,
    "age_36_40": -0.22, "age_41_45": -0.11,
    "priors_1": -1.76, "priors_2": -2.0, "priors_3": -2.16, "priors_4_plus": -2.32,
}
_DEFAULT_JUDGE_OFFSETS = (-1.2, -0.8, -0.4, -0.1, 0.1, 0.4, 0.9, 1.5)


@dataclass(frozen=True)
class GeneratorConfig:
    n: int
    seed: int
    age_cuts: tuple[float, ...] = (21, 26, 31, 36, 41, 46, 51)
    age_span: tuple[int, int] = (18, 69)
    prior_max: int = 6
    prior_decay: float = 0.5
    n_noise: int = 2
    release_rate: float = 0.69
    adverse_rate_released: float = 0.15
    adverse_rate_withheld: float = 0.09
    judge_offsets: tuple[float, ...] = _DEFAULT_JUDGE_OFFSETS
    selection_coefs: Mapping[str, float] = field(default_factory=lambda: dict(_DEFAULT_SELECTION))
    outcome_release_coefs: Mapping[str, float] = field(
        default_factory=lambda: dict(_DEFAULT_OUTCOME_RELEASE)
    )
    outcome_withhold_coefs: Mapping[str, float] = field(
        default_factory=lambda: dict(_DEFAULT_OUTCOME_WITHHOLD)
    )
    hidden_u: SensitivityParams | None = None
    p_u: float = 0.3  # u is always drawn and recorded; it has effects only when hidden_u is set

    def __post_init__(self):
        if self.n < 1:
            raise DataError("n must be at least 1")
        for name in ("release_rate", "adverse_rate_released", "adverse_rate_withheld", "p_u"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise DataError(f"{name} must lie strictly inside (0, 1)")
        if len(self.judge_offsets) < 1:
            raise DataError("need at least one judge")


@dataclass(frozen=True)
class SyntheticCohort:
    """Generated cases with potential outcomes, plus the generating config."""

    cases: tuple[CaseRecord, ...]
    feature_names: tuple[str, ...]
    column_groups: tuple[str, ...]
    config: GeneratorConfig | None
    u: np.ndarray
    calibrated_intercepts: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "cases", tuple(self.cases))
        u = np.asarray(self.u, dtype=np.int8)
        u.flags.writeable = False
        object.__setattr__(self, "u", u)

    @property
    def n(self) -> int:
        return len(self.cases)

    def potential_outcomes(self) -> tuple[np.ndarray, np.ndarray]:
        if any(c.outcome_if_released is None for c in self.cases):
            raise DataError("cohort is missing potential outcomes")
        po_r = np.array([c.outcome_if_released for c in self.cases], dtype=float)
        po_w = np.array([c.outcome_if_withheld for c in self.cases], dtype=float)
        return po_r, po_w

    def case_table(self) -> CaseTable:
        return CaseTable.from_cases(self.cases)

    def dataset(self) -> Dataset:
        X, actions, outcomes = stack_cases(self.cases)
        return Dataset(
            feature_names=self.feature_names,
            rows=X,
            labels=outcomes.astype(int),
            actions=actions,
            group_ids=np.array([c.group_id for c in self.cases]),
            column_groups=self.column_groups,
        )

    def released_dataset(self) -> Dataset:
        """The subset a rule-construction fit sees: released cases only."""
        ds = self.dataset()
        released = np.flatnonzero(ds.actions == RELEASE)
        if len(released) == 0:
            raise DataError("no released cases in cohort")
        return ds.take(released)


def _calibrate_intercept(eta: np.ndarray, target: float, weights: np.ndarray | None = None) -> float:
    """Scalar c with (weighted) mean of sigmoid(eta + c) equal to target."""

    def achieved(c: float) -> float:
        p = expit(eta + c)
        if weights is None:
            return float(p.mean())
        return float((weights * p).sum() / weights.sum())

    lo, hi = -30.0, 30.0
    for _ in range(60):  # 60 / 2^60 is far below the 1e-6 check
        mid = 0.5 * (lo + hi)
        if achieved(mid) < target:
            lo = mid
        else:
            hi = mid
    c = 0.5 * (lo + hi)
    if abs(achieved(c) - target) > 1e-6:
        raise NumericError(
            f"could not calibrate intercept to marginal {target}; achieved {achieved(c)}"
        )
    return c


def _linear_term(names: tuple[str, ...], X: np.ndarray, coefs: Mapping[str, float]) -> np.ndarray:
    eta = np.zeros(X.shape[0])
    for name, v in coefs.items():
        if name not in names:
            raise DataError(f"coefficient refers to unknown encoded feature {name!r}")
        eta += v * X[:, names.index(name)]
    return eta


def bail_encoding_spec(config: GeneratorConfig) -> EncodingSpec:
    return EncodingSpec(
        columns={
            "age": Bins(cuts=config.age_cuts, labels=AGE_LABELS, reference=AGE_LABELS[-1]),
            "priors": Bins(
                cuts=(1, 2, 3, 4), labels=PRIOR_LABELS, reference=PRIOR_LABELS[0]
            ),
        }
    )


def generate(config: GeneratorConfig) -> SyntheticCohort:
    """Draw a cohort; deterministic for a fixed config (seed included)."""
    rng = np.random.default_rng(config.seed)
    n = config.n

    lo, hi = config.age_span
    ages = rng.choice(np.arange(lo, hi + 1), size=n, p=_age_weights(lo, hi))
    prior_support = np.arange(config.prior_max + 1)
    prior_p = config.prior_decay ** prior_support
    priors = rng.choice(prior_support, size=n, p=prior_p / prior_p.sum())
    noise = rng.standard_normal((n, config.n_noise)) if config.n_noise else np.zeros((n, 0))

    raw = Dataset(
        feature_names=("age", "priors") + tuple(f"noise_{j}" for j in range(config.n_noise)),
        rows=np.column_stack([ages.astype(float), priors.astype(float), noise]),
        labels=np.zeros(n, dtype=np.int8),
    )
    enc = encode(raw, bail_encoding_spec(config))
    X = enc.rows
    names = enc.feature_names

    u = rng.binomial(1, config.hidden_u.p_u if config.hidden_u else config.p_u, size=n)
    judges = rng.integers(0, len(config.judge_offsets), size=n)
    offsets = np.asarray(config.judge_offsets, dtype=float)[judges]

    alpha = config.hidden_u.alpha if config.hidden_u else 0.0
    d_rel = config.hidden_u.delta_release if config.hidden_u else 0.0
    d_wh = config.hidden_u.delta_withhold if config.hidden_u else 0.0

    eta_sel = _linear_term(names, X, config.selection_coefs) + offsets + alpha * u
    c_sel = _calibrate_intercept(eta_sel, config.release_rate)
    p_release = expit(eta_sel + c_sel)
    released = rng.random(n) < p_release

    eta_rel = _linear_term(names, X, config.outcome_release_coefs) + d_rel * u
    c_rel = _calibrate_intercept(eta_rel, config.adverse_rate_released, weights=p_release)
    po_release = rng.random(n) < expit(eta_rel + c_rel)

    eta_wh = _linear_term(names, X, config.outcome_withhold_coefs) + d_wh * u
    c_wh = _calibrate_intercept(eta_wh, config.adverse_rate_withheld, weights=1.0 - p_release)
    po_withhold = rng.random(n) < expit(eta_wh + c_wh)

    cases = tuple(
        CaseRecord(
            covariates=X[i],
            action=RELEASE if released[i] else WITHHOLD,
            outcome=int(po_release[i] if released[i] else po_withhold[i]),
            group_id=f"judge_{judges[i]:02d}",
            outcome_if_released=int(po_release[i]),
            outcome_if_withheld=int(po_withhold[i]),
        )
        for i in range(n)
    )
    return SyntheticCohort(
        cases=cases,
        feature_names=names,
        column_groups=enc.column_groups,
        config=config,
        u=u,
        calibrated_intercepts=(c_sel, c_rel, c_wh),
    )


def _age_weights(lo: int, hi: int) -> np.ndarray:
    ages = np.arange(lo, hi + 1)
    w = (hi + 2.0) - ages  # younger defendants more common
    return w / w.sum()


def oracle_value(cohort: SyntheticCohort | CaseTable, policy: Policy) -> PolicyEstimate:
    """Exact policy value from the stored potential outcomes."""
    if isinstance(cohort, CaseTable):
        if cohort.po_release is None or cohort.po_withhold is None:
            raise DataError("cohort is missing potential outcomes")
        X, po_r, po_w = cohort.X, cohort.po_release, cohort.po_withhold
    else:
        X, _, _ = stack_cases(cohort.cases)
        po_r, po_w = cohort.potential_outcomes()
    prescribed = np.asarray(policy.actions(X))
    value = float(np.mean(np.where(prescribed == RELEASE, po_r, po_w)))
    return PolicyEstimate(
        action_rate=float(np.mean(prescribed == RELEASE)),
        value=value,
        method=ORACLE,
        n_cases=len(po_r),
    )


# ---------------------------------------------------------------------------
# Cohort CSV round trip
# ---------------------------------------------------------------------------

_PO_RELEASE = "__po_release"
_PO_WITHHOLD = "__po_withhold"
_U_COL = "__u"


def write_cohort_csv(cohort: SyntheticCohort, path) -> None:
    """Cohort to CSV; potential-outcome columns carry the reserved prefix.

    The reserved prefix makes load_csv refuse the file, so evaluation code
    cannot silently treat stored potential outcomes as features; use
    :func:`load_cohort_csv`.
    """
    header = (
        list(cohort.feature_names)
        + ["action", "outcome", "judge", _PO_RELEASE, _PO_WITHHOLD, _U_COL]
    )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, case in enumerate(cohort.cases):
            writer.writerow(
                [repr(float(v)) for v in case.covariates]
                + [
                    case.action,
                    case.outcome,
                    case.group_id,
                    case.outcome_if_released,
                    case.outcome_if_withheld,
                    int(cohort.u[i]),
                ]
            )


def load_cohort_csv(path, column_groups: tuple[str, ...] | None = None) -> SyntheticCohort:
    """Read a cohort CSV written by :func:`write_cohort_csv`."""
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        rows = list(reader)
    expected_tail = ["action", "outcome", "judge", _PO_RELEASE, _PO_WITHHOLD, _U_COL]
    if header[-6:] != expected_tail or not rows:
        raise DataError(f"{path}: not a cohort CSV (expected trailing columns {expected_tail})")
    names = tuple(header[:-6])
    cases = []
    u = []
    for row in rows:
        cov = np.asarray([float(v) for v in row[: len(names)]])
        action, outcome, judge, po_r, po_w, ui = row[len(names):]
        cases.append(
            CaseRecord(
                covariates=cov,
                action=action,
                outcome=int(outcome),
                group_id=judge,
                outcome_if_released=int(po_r),
                outcome_if_withheld=int(po_w),
            )
        )
        u.append(int(ui))
    if column_groups is None:
        column_groups = _infer_groups(names)
    return SyntheticCohort(
        cases=tuple(cases),
        feature_names=names,
        column_groups=column_groups,
        config=None,
        u=np.asarray(u),
    )


def _infer_groups(names: tuple[str, ...]) -> tuple[str, ...]:
    """Group age_*/priors_* indicator columns back under their source name."""
    groups = []
    for name in names:
        if name.startswith("age_"):
            groups.append("age")
        elif name.startswith("priors_"):
            groups.append("priors")
        else:
            groups.append(name)
    return tuple(groups)

"""Offline policy evaluation on observed decision data.

The value of a candidate policy (its adverse-outcome rate if followed for
every case) is estimated with a response surface: where the policy agrees
with the observed action, the observed outcome is used; elsewhere the
fitted counterfactual stands in.

The sensitivity analysis quantifies how much that estimate moves if an
unobserved binary covariate ``u`` shifted both the decision and the outcome.
Given the four assumed parameters (prevalence of u, its log-odds effect on
the decision, its log-odds effects on the outcome under each action), the
observed data pin down the remaining selection/outcome intercepts through
two-point logistic mixtures, and the counterfactual for the action not taken
follows from the posterior of ``u`` given the action that was.
"""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from ._math import clip_prob, expit, logit
from .data import Dataset, FoldAssignment, kfold
from .errors import DataError, NumericError
from .glm import LassoPath, cv_select
from .srr import RELEASE, WITHHOLD, Scorecard

RESPONSE_SURFACE = "response_surface"
ROSENBAUM_RUBIN = "rosenbaum_rubin"
ORACLE = "oracle"


@dataclass(frozen=True)
class CaseRecord:
    """One observed decision instance.

    Potential outcomes are carried only by synthetic cohorts; when present,
    the observed outcome must equal the potential outcome of the observed
    action.
    """

    covariates: np.ndarray
    action: str
    outcome: int
    group_id: str | None = None
    outcome_if_released: int | None = None
    outcome_if_withheld: int | None = None

    def __post_init__(self):
        cov = np.asarray(self.covariates, dtype=float)
        cov.flags.writeable = False
        object.__setattr__(self, "covariates", cov)
        if self.action not in (RELEASE, WITHHOLD):
            raise DataError(f"action must be {RELEASE!r} or {WITHHOLD!r}, got {self.action!r}")
        if self.outcome not in (0, 1):
            raise DataError("outcome must be 0 or 1")
        po = (self.outcome_if_released, self.outcome_if_withheld)
        if (po[0] is None) != (po[1] is None):
            raise DataError("either both potential outcomes are present or neither")
        if po[0] is not None:
            observed = po[0] if self.action == RELEASE else po[1]
            if observed != self.outcome:
                raise DataError("observed outcome must equal the potential outcome of the action taken")


@dataclass(frozen=True)
class CaseTable:
    """Column-oriented view of a case list, for repeated estimator calls.

    Estimators accept either a sequence of :class:`CaseRecord` or one of
    these; building the table once avoids re-stacking covariate rows on
    every call in threshold or regime sweeps.
    """

    X: np.ndarray
    actions: np.ndarray
    outcomes: np.ndarray
    group_ids: np.ndarray | None = None
    po_release: np.ndarray | None = None
    po_withhold: np.ndarray | None = None

    @classmethod
    def from_cases(cls, cases: Sequence["CaseRecord"]) -> "CaseTable":
        if not len(cases):
            raise DataError("no cases")
        has_po = cases[0].outcome_if_released is not None
        return cls(
            X=np.vstack([c.covariates for c in cases]),
            actions=np.array([c.action for c in cases]),
            outcomes=np.array([c.outcome for c in cases], dtype=float),
            group_ids=np.array([c.group_id for c in cases])
            if cases[0].group_id is not None
            else None,
            po_release=np.array([c.outcome_if_released for c in cases], dtype=float)
            if has_po
            else None,
            po_withhold=np.array([c.outcome_if_withheld for c in cases], dtype=float)
            if has_po
            else None,
        )

    def __len__(self) -> int:
        return len(self.outcomes)

    def take(self, indices) -> "CaseTable":
        indices = np.asarray(indices)
        return CaseTable(
            X=self.X[indices],
            actions=self.actions[indices],
            outcomes=self.outcomes[indices],
            group_ids=None if self.group_ids is None else self.group_ids[indices],
            po_release=None if self.po_release is None else self.po_release[indices],
            po_withhold=None if self.po_withhold is None else self.po_withhold[indices],
        )


def stack_cases(cases):
    """(X, actions, outcomes) arrays from a case list or CaseTable."""
    if isinstance(cases, CaseTable):
        return cases.X, cases.actions, cases.outcomes
    if not len(cases):
        raise DataError("no cases")
    X = np.vstack([c.covariates for c in cases])
    actions = np.array([c.action for c in cases])
    outcomes = np.array([c.outcome for c in cases], dtype=float)
    return X, actions, outcomes


def cases_from_dataset(ds: Dataset, release_value: str | None = None) -> list[CaseRecord]:
    """Interpret a Dataset's action column as release/withhold case records."""
    if ds.actions is None:
        raise DataError("dataset has no action column")
    values = sorted(set(ds.actions))
    if release_value is None:
        if set(values) <= {RELEASE, WITHHOLD}:
            release_value = RELEASE
        else:
            raise DataError(
                f"action values {values} are not {RELEASE!r}/{WITHHOLD!r}; pass release_value"
            )
    groups = ds.group_ids if ds.group_ids is not None else [None] * ds.n
    return [
        CaseRecord(
            covariates=ds.rows[i],
            action=RELEASE if ds.actions[i] == release_value else WITHHOLD,
            outcome=int(ds.labels[i]),
            group_id=None if groups[i] is None else str(groups[i]),
        )
        for i in range(ds.n)
    ]


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------


class Policy(Protocol):
    """A total, deterministic decision function over covariate rows."""

    def actions(self, X: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class ScorecardPolicy:
    """Release iff the integer score is strictly below the threshold."""

    card: Scorecard
    feature_names: tuple[str, ...]
    threshold: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        thr = self.card.threshold if self.threshold is None else self.threshold
        if thr is None:
            raise DataError("no threshold: set one on the card or the policy")
        object.__setattr__(self, "threshold", float(thr))
        missing = [n for n, _ in self.card.entries if n not in self.feature_names]
        if missing:
            raise DataError(f"covariate layout is missing scorecard features {missing}")

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        total = np.zeros(X.shape[0])
        for name, w in self.card.entries:
            total += w * X[:, self.feature_names.index(name)]
        return total

    def actions(self, X: np.ndarray) -> np.ndarray:
        return np.where(self.scores(X) < self.threshold, RELEASE, WITHHOLD)


@dataclass(frozen=True)
class RiskModelPolicy:
    """Release iff a fitted risk model predicts risk below a threshold."""

    intercept: float
    coefficients: np.ndarray
    threshold: float

    def risk(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return expit(self.intercept + X @ np.asarray(self.coefficients, dtype=float))

    def actions(self, X: np.ndarray) -> np.ndarray:
        return np.where(self.risk(X) < self.threshold, RELEASE, WITHHOLD)


@dataclass(frozen=True)
class ConstantPolicy:
    """Prescribe one action for every case (release-all / withhold-all)."""

    action: str

    def actions(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.full(X.shape[0], self.action)


@dataclass(frozen=True)
class FixedActionsPolicy:
    """Replay a precomputed action vector (audit tool, not a function of x)."""

    fixed: np.ndarray

    def actions(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[0] != len(self.fixed):
            raise DataError("fixed action vector does not match the case count")
        return np.asarray(self.fixed)


# ---------------------------------------------------------------------------
# Response surface
# ---------------------------------------------------------------------------


def surface_design(X: np.ndarray, released: np.ndarray) -> np.ndarray:
    """[x, action, action * x] design: covariates, the action indicator, and
    all action-covariate interactions."""
    a = released.astype(float)[:, None]
    return np.hstack([X, a, a * X])


@dataclass(frozen=True)
class ResponseSurface:
    """Fitted outcome model r^(t | x) for both actions, plus Pr(release | x).

    The outcome model is a lasso logistic regression on the covariates, the
    action indicator, and all action-covariate interactions; the release
    model is a lasso logistic regression of the action on the covariates
    (it supplies the release probability the sensitivity analysis needs).
    """

    outcome_path: LassoPath
    release_path: LassoPath
    n_features: int

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise DataError(
                f"covariate rows have {X.shape[1]} features, surface expects {self.n_features}"
            )
        return X

    def predict_both(self, X) -> tuple[np.ndarray, np.ndarray]:
        """(r^(release | x), r^(withhold | x)) for every row."""
        X = self._check(X)
        ones = np.ones(X.shape[0], dtype=bool)
        released = self.outcome_path.predict_prob(surface_design(X, ones))
        withheld = self.outcome_path.predict_prob(surface_design(X, ~ones))
        return released, withheld

    def predict(self, X, action: str) -> np.ndarray:
        released, withheld = self.predict_both(X)
        return released if action == RELEASE else withheld

    def release_prob(self, X) -> np.ndarray:
        return self.release_path.predict_prob(self._check(X))


def fit_response_surface(
    cases: Sequence[CaseRecord],
    folds: FoldAssignment,
    n_lambda: int = 100,
    lambda_min_ratio: float = 1e-4,
) -> ResponseSurface:
    """Fit the outcome and release models on a set of observed cases."""
    X, actions, outcomes = stack_cases(cases)
    released = actions == RELEASE
    if released.all() or (~released).all():
        raise DataError("cannot identify counterfactuals: only one action observed")
    if folds.n != len(cases):
        raise DataError("fold assignment does not cover the cases")
    outcome_path = cv_select(
        surface_design(X, released),
        outcomes,
        folds,
        n_lambda=n_lambda,
        lambda_min_ratio=lambda_min_ratio,
    )
    release_path = cv_select(
        X,
        released.astype(float),
        folds,
        n_lambda=n_lambda,
        lambda_min_ratio=lambda_min_ratio,
    )
    return ResponseSurface(
        outcome_path=outcome_path, release_path=release_path, n_features=X.shape[1]
    )


# ---------------------------------------------------------------------------
# Policy value estimators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolicyEstimate:
    """Estimated (release rate, adverse-outcome rate) for one policy."""

    action_rate: float
    value: float
    method: str
    n_cases: int

    def __post_init__(self):
        if not (0.0 <= self.action_rate <= 1.0 and 0.0 <= self.value <= 1.0):
            raise NumericError("policy estimate rates must lie in [0, 1]")


def estimate_policy(
    cases: Sequence[CaseRecord], policy: Policy, surface: ResponseSurface
) -> PolicyEstimate:
    """Response-surface estimate of a policy's adverse-outcome rate.

    Uses the observed outcome wherever the policy prescribes the observed
    action, and the fitted counterfactual estimate elsewhere.  The surface
    must have been fitted on cases disjoint from these (fold discipline is
    the caller's job).
    """
    X, actions, outcomes = stack_cases(cases)
    prescribed = np.asarray(policy.actions(X))
    r_rel, r_wh = surface.predict_both(X)
    modeled = np.where(prescribed == RELEASE, r_rel, r_wh)
    agree = prescribed == actions
    value = float(np.mean(np.where(agree, outcomes, modeled)))
    return PolicyEstimate(
        action_rate=float(np.mean(prescribed == RELEASE)),
        value=value,
        method=RESPONSE_SURFACE,
        n_cases=len(cases),
    )


# ---------------------------------------------------------------------------
# Sensitivity to an unobserved binary covariate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SensitivityParams:
    """Assumed influence of the unobserved covariate u.

    ``p_u``: Pr(u = 1); ``alpha``: log-odds shift of release when u = 1;
    ``delta_release`` / ``delta_withhold``: log-odds shifts of the adverse
    outcome under each action when u = 1.
    """

    p_u: float
    alpha: float
    delta_release: float
    delta_withhold: float

    def __post_init__(self):
        if not 0.0 < self.p_u < 1.0:
            raise DataError("p_u must lie strictly inside (0, 1)")
        for v in (self.alpha, self.delta_release, self.delta_withhold):
            if not np.isfinite(v):
                raise DataError("sensitivity shifts must be finite")

    def describe(self) -> str:
        return (
            f"p_u={self.p_u:g},alpha={self.alpha:g},"
            f"d_rel={self.delta_release:g},d_wh={self.delta_withhold:g}"
        )


def _solve_two_point_mixture(target, p1, shift):
    """The unique x with (1-p1)*sigmoid(x) + p1*sigmoid(x + shift) = target.

    Closed form: with A = e^shift and g = e^x the constraint is the
    quadratic  A(1-q) g^2 + ((1-p1) + p1 A - q(1+A)) g - q = 0, whose single
    positive root gives x.  Falls back to bisection if the root's residual
    exceeds 1e-10.  Vectorized over `target` (and broadcastable p1/shift).
    """
    q = np.asarray(target, dtype=float)
    p1 = np.broadcast_to(np.asarray(p1, dtype=float), q.shape).copy()
    shift = np.broadcast_to(np.asarray(shift, dtype=float), q.shape)
    if np.any((q <= 0.0) | (q >= 1.0)):
        raise NumericError("mixture target must lie strictly inside (0, 1)")
    p1 = np.clip(p1, 0.0, 1.0)

    A = np.exp(shift)
    a = A * (1.0 - q)
    b = (1.0 - p1) + p1 * A - q * (1.0 + A)
    c = -q
    disc = b * b - 4.0 * a * c
    g = (-b + np.sqrt(np.maximum(disc, 0.0))) / (2.0 * a)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(g > 0.0, np.log(np.where(g > 0.0, g, 1.0)), np.nan)

    resid = np.abs((1.0 - p1) * expit(x) + p1 * expit(x + shift) - q)
    bad = ~np.isfinite(x) | (resid > 1e-10)
    if np.any(bad):
        x = np.where(bad, _bisect_two_point(q, p1, shift), x)
    return x if x.ndim else float(x)


def _bisect_two_point(q, p1, shift, lo=-60.0, hi=60.0, iters=200):
    lo = np.full_like(q, lo)
    hi = np.full_like(q, hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        val = (1.0 - p1) * expit(mid) + p1 * expit(mid + shift)
        high = val > q
        hi = np.where(high, mid, hi)
        lo = np.where(high, lo, mid)
    return 0.5 * (lo + hi)


def solve_gamma(p_u: float, alpha: float, q):
    """Baseline release log-odds gamma implied by an observed release rate.

    Solves (1-p_u) sigmoid(gamma) + p_u sigmoid(gamma + alpha) = q; the
    mixture is increasing in gamma so the solution is unique.
    """
    return _solve_two_point_mixture(q, p_u, alpha)


def posterior_u(gamma, alpha, p_u, action: str):
    """Pr(u = 1 | action, x) by Bayes' rule under the logistic selection model."""
    gamma = np.asarray(gamma, dtype=float)
    rel_u1 = expit(gamma + alpha)
    rel_u0 = expit(gamma)
    if action == RELEASE:
        num = rel_u1 * p_u
        den = num + rel_u0 * (1.0 - p_u)
    elif action == WITHHOLD:
        num = (1.0 - rel_u1) * p_u
        den = num + (1.0 - rel_u0) * (1.0 - p_u)
    else:
        raise DataError(f"unknown action {action!r}")
    out = num / den
    return out if np.ndim(out) else float(out)


def solve_beta(rhat, posterior_u1, delta):
    """Baseline outcome log-odds beta implied by a surface estimate.

    Solves (1-pu) sigmoid(beta) + pu sigmoid(beta + delta) = rhat where pu
    is the posterior Pr(u=1 | action, x).  Boundary posteriors (0 or 1)
    reduce to a plain logit.
    """
    return _solve_two_point_mixture(rhat, posterior_u1, delta)


def rr_counterfactual(
    rhat_release,
    rhat_withhold,
    params: SensitivityParams,
    observed_action,
    release_prob,
):
    """Adjusted counterfactual Pr(r(other action) = 1 | observed action, x).

    Chains the three solves: gamma from the release probability, the
    posterior of u under each action, beta for each action from the surface
    estimates, then mixes the not-taken action's outcome model over the
    posterior of u given the action actually taken.  Vectorized; `observed_action`
    may be a single action name or an array of them.
    """
    q = clip_prob(np.asarray(release_prob, dtype=float))
    r_rel = clip_prob(np.asarray(rhat_release, dtype=float))
    r_wh = clip_prob(np.asarray(rhat_withhold, dtype=float))

    gamma = solve_gamma(params.p_u, params.alpha, q)
    post_rel = posterior_u(gamma, params.alpha, params.p_u, RELEASE)
    post_wh = posterior_u(gamma, params.alpha, params.p_u, WITHHOLD)
    beta_rel = solve_beta(r_rel, post_rel, params.delta_release)
    beta_wh = solve_beta(r_wh, post_wh, params.delta_withhold)

    # counterfactual for the action NOT taken, mixed over u | observed action
    cf_if_released = (1.0 - np.asarray(post_rel)) * expit(beta_wh) + np.asarray(
        post_rel
    ) * expit(beta_wh + params.delta_withhold)
    cf_if_withheld = (1.0 - np.asarray(post_wh)) * expit(beta_rel) + np.asarray(
        post_wh
    ) * expit(beta_rel + params.delta_release)

    observed_action = np.asarray(observed_action)
    if observed_action.ndim == 0:
        out = cf_if_released if observed_action == RELEASE else cf_if_withheld
        return float(out) if np.ndim(out) == 0 else out
    return np.where(observed_action == RELEASE, cf_if_released, cf_if_withheld)


def rr_estimate(
    cases: Sequence[CaseRecord],
    policy: Policy,
    surface: ResponseSurface,
    params: SensitivityParams,
) -> PolicyEstimate:
    """Policy value with sensitivity-adjusted counterfactuals.

    Identical to :func:`estimate_policy` except that, where the policy
    disagrees with the observed action, the counterfactual comes from the
    unobserved-covariate adjustment instead of the raw surface estimate.
    """
    X, actions, outcomes = stack_cases(cases)
    prescribed = np.asarray(policy.actions(X))
    agree = prescribed == actions
    value_terms = outcomes.copy()
    if np.any(~agree):
        Xd = X[~agree]
        r_rel, r_wh = surface.predict_both(Xd)
        q = surface.release_prob(Xd)
        value_terms[~agree] = rr_counterfactual(r_rel, r_wh, params, actions[~agree], q)
    return PolicyEstimate(
        action_rate=float(np.mean(prescribed == RELEASE)),
        value=float(np.mean(value_terms)),
        method=ROSENBAUM_RUBIN,
        n_cases=len(cases),
    )


@dataclass(frozen=True)
class SensitivityBand:
    """Min/max policy-value estimates over a set of sensitivity regimes.

    The unadjusted response-surface estimate (the delta = 0 collapse) is
    always included as `baseline` and participates in the band.
    """

    low: float
    high: float
    baseline: float
    action_rate: float
    values: tuple[float, ...]

    @property
    def width(self) -> float:
        return self.high - self.low


def sensitivity_sweep(
    cases: Sequence[CaseRecord],
    policy: Policy,
    surface: ResponseSurface,
    regimes: Sequence[SensitivityParams],
) -> SensitivityBand:
    if not regimes:
        raise DataError("need at least one sensitivity regime")
    base = estimate_policy(cases, policy, surface)
    values = [rr_estimate(cases, policy, surface, params).value for params in regimes]
    everything = values + [base.value]
    return SensitivityBand(
        low=float(min(everything)),
        high=float(max(everything)),
        baseline=base.value,
        action_rate=base.action_rate,
        values=tuple(values),
    )


def regime_grid(alpha: float, p_values, delta_values) -> list[SensitivityParams]:
    """All combinations of prevalence and outcome shifts at one alpha."""
    return [
        SensitivityParams(p_u=p, alpha=alpha, delta_release=dr, delta_withhold=dw)
        for p in p_values
        for dr in delta_values
        for dw in delta_values
    ]


# ---------------------------------------------------------------------------
# Per-group (per-judge) estimates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroupEstimate:
    group_id: str
    n_cases: int
    agreement_rate: float
    raw_release_rate: float
    raw_adverse_rate: float
    estimate: PolicyEstimate


@dataclass(frozen=True)
class GroupReport:
    estimates: tuple[GroupEstimate, ...]
    skipped: tuple[tuple[str, str], ...]

    def to_csv(self, path, config_comment: str | None = None) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            if config_comment:
                fh.write(f"# {config_comment}\n")
            writer = csv.writer(fh)
            writer.writerow(
                [
                    "group", "n_cases", "agreement_rate", "raw_release_rate",
                    "raw_adverse_rate", "action_rate", "value", "method",
                ]
            )
            for g in self.estimates:
                writer.writerow(
                    [
                        g.group_id, g.n_cases, repr(g.agreement_rate),
                        repr(g.raw_release_rate), repr(g.raw_adverse_rate),
                        repr(g.estimate.action_rate), repr(g.estimate.value),
                        g.estimate.method,
                    ]
                )
            for gid, reason in self.skipped:
                writer.writerow([gid, "", "", "", "", "", "", f"skipped: {reason}"])


def per_group_estimates(
    cases: Sequence[CaseRecord],
    policy: Policy,
    folds: FoldAssignment,
    min_group_size: int = 50,
    n_lambda: int = 30,
) -> GroupReport:
    """Refit the response surface within each group and re-estimate.

    Groups too small to fit (below ``min_group_size``, single-action,
    single-outcome, or where the penalty cross-validation fails) are skipped
    with a reason.  Within each group the penalty is re-cross-validated on a
    deterministic per-group refold (restricting a global balanced fold
    assignment to a subgroup rarely leaves balanced folds), using the passed
    assignment's fold count as the target.
    """
    if folds.n != len(cases):
        raise DataError("fold assignment does not cover the cases")
    table = cases if isinstance(cases, CaseTable) else CaseTable.from_cases(cases)
    if table.group_ids is None:
        raise DataError("per-group estimation needs group ids on every case")
    by_group: dict[str, list[int]] = {}
    for i, gid in enumerate(table.group_ids):
        by_group.setdefault(str(gid), []).append(i)

    estimates: list[GroupEstimate] = []
    skipped: list[tuple[str, str]] = []
    for gid in sorted(by_group):
        idx = np.asarray(by_group[gid])
        sub = table.take(idx)
        if len(sub) < min_group_size:
            skipped.append((gid, f"only {len(sub)} cases (minimum {min_group_size})"))
            continue
        X, actions, outcomes = stack_cases(sub)
        released = actions == RELEASE
        if released.all() or (~released).all():
            skipped.append((gid, "single observed action"))
            continue
        if len(np.unique(outcomes)) < 2:
            skipped.append((gid, "single observed outcome"))
            continue
        sub_folds = _group_folds(folds.fold_count, gid, outcomes)
        try:
            surface = fit_response_surface(sub, sub_folds, n_lambda=n_lambda)
            est = estimate_policy(sub, policy, surface)
        except (DataError, NumericError) as exc:
            skipped.append((gid, str(exc)))
            continue
        prescribed = np.asarray(policy.actions(X))
        estimates.append(
            GroupEstimate(
                group_id=gid,
                n_cases=len(sub),
                agreement_rate=float(np.mean(prescribed == actions)),
                raw_release_rate=float(np.mean(released)),
                raw_adverse_rate=float(np.mean(outcomes)),
                estimate=est,
            )
        )
    return GroupReport(estimates=tuple(estimates), skipped=tuple(skipped))


def _group_folds(fold_count: int, group_id: str, labels: np.ndarray) -> FoldAssignment:
    n = len(labels)
    k = max(2, min(fold_count, n // 20))
    seed = zlib.crc32(group_id.encode("utf-8"))
    return kfold(n, k, seed=seed, labels=labels)

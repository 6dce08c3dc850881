import numpy as np
import pytest

from oracles import bisect_mixture, rr_chain_oracle, sigmoid
from scorekit import data, policy, synth
from scorekit.errors import DataError, NumericError
from scorekit.policy import RELEASE, WITHHOLD


class StubSurface:
    """Fixed per-case predictions keyed by the first covariate entry."""

    def __init__(self, table, release_probs=None):
        self.table = dict(table)
        self.release_probs = None if release_probs is None else dict(release_probs)

    def predict_both(self, X):
        X = np.atleast_2d(X)
        rel = np.array([self.table[x[0]][0] for x in X])
        wh = np.array([self.table[x[0]][1] for x in X])
        return rel, wh

    def release_prob(self, X):
        X = np.atleast_2d(X)
        return np.array([self.release_probs[x[0]] for x in X])


def case(key, action, outcome, group=None):
    return policy.CaseRecord(
        covariates=np.array([float(key)]), action=action, outcome=outcome, group_id=group
    )


# ---------------------------------------------------------------------------
# Response-surface estimator
# ---------------------------------------------------------------------------


class TestEstimatePolicy:
    def test_five_case_worked_example(self):
        # proposed/observed/outcome plus model estimates (r_release, r_withhold);
        # observed outcomes are used on agreement, model estimates elsewhere:
        # (0 + 1 + 0.7 + 0.3 + 0) / 5 = 0.40
        cases = [
            case(1, RELEASE, 0),
            case(2, WITHHOLD, 1),
            case(3, RELEASE, 1),
            case(4, WITHHOLD, 0),
            case(5, RELEASE, 0),
        ]
        proposed = np.array([RELEASE, WITHHOLD, WITHHOLD, RELEASE, RELEASE])
        surface = StubSurface(
            {
                1.0: (0.20, 0.10),
                2.0: (0.80, 0.30),
                3.0: (0.90, 0.70),
                4.0: (0.30, 0.25),
                5.0: (0.20, 0.15),
            }
        )
        est = policy.estimate_policy(cases, policy.FixedActionsPolicy(fixed=proposed), surface)
        assert est.value == pytest.approx(0.40, abs=1e-12)
        assert est.action_rate == pytest.approx(3 / 5)
        assert est.method == policy.RESPONSE_SURFACE

    def test_policy_equal_to_observed_collapses_to_empirical_mean(self):
        rng = np.random.default_rng(0)
        cases = [
            case(i, RELEASE if rng.random() < 0.6 else WITHHOLD, int(rng.random() < 0.3))
            for i in range(200)
        ]
        surface = StubSurface({float(i): (rng.random(), rng.random()) for i in range(200)})
        observed = np.array([c.action for c in cases])
        est = policy.estimate_policy(cases, policy.FixedActionsPolicy(fixed=observed), surface)
        assert est.value == pytest.approx(np.mean([c.outcome for c in cases]), abs=1e-15)

    def test_case_table_equivalent_to_record_list(self):
        rng = np.random.default_rng(1)
        cases = [
            case(i, RELEASE if rng.random() < 0.5 else WITHHOLD, int(rng.random() < 0.4))
            for i in range(50)
        ]
        surface = StubSurface({float(i): (0.3, 0.6) for i in range(50)})
        pol = policy.ConstantPolicy(action=RELEASE)
        a = policy.estimate_policy(cases, pol, surface)
        b = policy.estimate_policy(policy.CaseTable.from_cases(cases), pol, surface)
        assert a == b


class TestFitResponseSurface:
    def test_randomized_action_and_outcome_recovers_base_rate(self):
        rng = np.random.default_rng(2)
        n, q = 20000, 0.37
        X = rng.normal(size=(n, 3))
        actions = np.where(rng.random(n) < 0.5, RELEASE, WITHHOLD)
        outcomes = (rng.random(n) < q).astype(int)
        cases = policy.CaseTable(X=X, actions=actions, outcomes=outcomes.astype(float))
        folds = data.kfold(n, 3, seed=0, labels=outcomes)
        surface = policy.fit_response_surface(cases, folds, n_lambda=20)
        r_rel, r_wh = surface.predict_both(X[:500])
        assert np.max(np.abs(r_rel - q)) <= 0.02
        assert np.max(np.abs(r_wh - q)) <= 0.02

    def test_recovers_action_main_effect(self):
        rng = np.random.default_rng(3)
        n, tau = 50000, 0.7
        X = rng.normal(size=(n, 3))
        released = rng.random(n) < sigmoid(0.4 * X[:, 0])
        actions = np.where(released, RELEASE, WITHHOLD)
        eta = -1.0 + X @ np.array([0.5, -0.3, 0.0]) + tau * released
        outcomes = (rng.random(n) < sigmoid(eta)).astype(float)
        cases = policy.CaseTable(X=X, actions=actions, outcomes=outcomes)
        folds = data.kfold(n, 3, seed=1, labels=outcomes.astype(int))
        surface = policy.fit_response_surface(cases, folds, n_lambda=30)
        _, coefs = surface.outcome_path.coefficients_at()
        assert coefs[3] == pytest.approx(tau, abs=0.05)  # action indicator column

    def test_single_action_data_rejected(self):
        rng = np.random.default_rng(4)
        cases = policy.CaseTable(
            X=rng.normal(size=(40, 2)),
            actions=np.array([RELEASE] * 40),
            outcomes=rng.integers(0, 2, 40).astype(float),
        )
        folds = data.kfold(40, 4, seed=0)
        with pytest.raises(DataError, match="one action"):
            policy.fit_response_surface(cases, folds)

    def test_degenerate_all_zero_outcomes_rejected(self):
        rng = np.random.default_rng(5)
        cases = policy.CaseTable(
            X=rng.normal(size=(40, 2)),
            actions=np.where(rng.random(40) < 0.5, RELEASE, WITHHOLD),
            outcomes=np.zeros(40),
        )
        folds = data.kfold(40, 4, seed=0)
        with pytest.raises(DataError, match="single class"):
            policy.fit_response_surface(cases, folds)


# ---------------------------------------------------------------------------
# Mixture solves
# ---------------------------------------------------------------------------


class TestSolveGamma:
    def test_symmetric_example(self):
        # s(g) + s(g + log 2) = 1 forces g = -log(2)/2
        g = policy.solve_gamma(0.5, np.log(2.0), 0.5)
        assert g == pytest.approx(-np.log(2.0) / 2.0, abs=1e-10)

    def test_zero_alpha_collapses_to_logit(self):
        for q in (0.1, 0.5, 0.9):
            for p_u in (0.2, 0.7):
                assert policy.solve_gamma(p_u, 0.0, q) == pytest.approx(
                    np.log(q / (1 - q)), abs=1e-9
                )

    def test_vanishing_p_u_limit(self):
        g = policy.solve_gamma(1e-9, 2.0, 0.3)
        assert g == pytest.approx(np.log(0.3 / 0.7), abs=1e-6)

    def test_residuals_below_1e10_randomized(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            p_u = float(rng.uniform(0.01, 0.99))
            alpha = float(rng.uniform(-4, 4))
            q = float(rng.uniform(0.01, 0.99))
            g = policy.solve_gamma(p_u, alpha, q)
            resid = (1 - p_u) * sigmoid(g) + p_u * sigmoid(g + alpha) - q
            assert abs(resid) < 1e-10

    def test_agrees_with_bisection_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            p_u = float(rng.uniform(0.05, 0.95))
            alpha = float(rng.uniform(-3, 3))
            q = float(rng.uniform(0.05, 0.95))
            assert policy.solve_gamma(p_u, alpha, q) == pytest.approx(
                bisect_mixture(q, p_u, alpha), abs=1e-8
            )

    def test_monotone_in_q(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            p_u = float(rng.uniform(0.05, 0.95))
            alpha = float(rng.uniform(-3, 3))
            qs = np.sort(rng.uniform(0.02, 0.98, size=5))
            gs = policy.solve_gamma(p_u, alpha, qs)
            assert np.all(np.diff(gs) > 0)

    def test_q_out_of_range(self):
        with pytest.raises(NumericError):
            policy.solve_gamma(0.5, 1.0, 1.0)


class TestPosteriorU:
    def test_uninformative_when_alpha_zero(self):
        g = policy.solve_gamma(0.3, 0.0, 0.6)
        for action in (RELEASE, WITHHOLD):
            assert policy.posterior_u(g, 0.0, 0.3, action) == pytest.approx(0.3)

    def test_update_direction(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            p_u = float(rng.uniform(0.05, 0.95))
            alpha = float(rng.uniform(0.1, 3.0))
            q = float(rng.uniform(0.05, 0.95))
            g = policy.solve_gamma(p_u, alpha, q)
            assert policy.posterior_u(g, alpha, p_u, RELEASE) > p_u
            assert policy.posterior_u(g, alpha, p_u, WITHHOLD) < p_u

    def test_worked_value(self):
        g = policy.solve_gamma(0.5, np.log(2.0), 0.5)
        post = policy.posterior_u(g, np.log(2.0), 0.5, RELEASE)
        assert post == pytest.approx(sigmoid(g + np.log(2.0)), abs=1e-12)
        assert post == pytest.approx(0.5858, abs=2e-4)

    def test_bayes_formula_direct(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            p_u = float(rng.uniform(0.05, 0.95))
            alpha = float(rng.uniform(-3, 3))
            gamma = float(rng.uniform(-3, 3))
            p1, p0 = sigmoid(gamma + alpha), sigmoid(gamma)
            expected_rel = p1 * p_u / (p1 * p_u + p0 * (1 - p_u))
            expected_wh = (1 - p1) * p_u / ((1 - p1) * p_u + (1 - p0) * (1 - p_u))
            assert policy.posterior_u(gamma, alpha, p_u, RELEASE) == pytest.approx(expected_rel)
            assert policy.posterior_u(gamma, alpha, p_u, WITHHOLD) == pytest.approx(expected_wh)


class TestSolveBeta:
    def test_zero_delta_collapses_to_logit(self):
        assert policy.solve_beta(0.3, 0.4, 0.0) == pytest.approx(np.log(0.3 / 0.7), abs=1e-9)

    def test_zero_posterior_collapses_to_logit(self):
        assert policy.solve_beta(0.3, 0.0, np.log(3.0)) == pytest.approx(
            np.log(0.3 / 0.7), abs=1e-9
        )

    def test_bisection_cross_check(self):
        b = policy.solve_beta(0.3, 0.4, np.log(3.0))
        assert b == pytest.approx(bisect_mixture(0.3, 0.4, np.log(3.0)), abs=1e-8)
        resid = 0.6 * sigmoid(b) + 0.4 * sigmoid(b + np.log(3.0)) - 0.3
        assert abs(resid) < 1e-10

    def test_residuals_randomized(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            rhat = float(rng.uniform(0.01, 0.99))
            post = float(rng.uniform(0.0, 1.0))
            delta = float(rng.uniform(-4, 4))
            b = policy.solve_beta(rhat, post, delta)
            resid = (1 - post) * sigmoid(b) + post * sigmoid(b + delta) - rhat
            assert abs(resid) < 1e-10

    def test_boundary_rhat_rejected(self):
        with pytest.raises(NumericError):
            policy.solve_beta(0.0, 0.5, 1.0)


# ---------------------------------------------------------------------------
# Counterfactual chain
# ---------------------------------------------------------------------------


class TestRrCounterfactual:
    def test_zero_deltas_return_surface_estimate(self):
        params = policy.SensitivityParams(
            p_u=0.3, alpha=np.log(2.0), delta_release=0.0, delta_withhold=0.0
        )
        for observed, expected in ((RELEASE, 0.22), (WITHHOLD, 0.45)):
            cf = policy.rr_counterfactual(0.45, 0.22, params, observed, 0.6)
            assert cf == pytest.approx(expected, abs=1e-11)

    def test_alpha_zero_counterfactual_independent_of_action(self):
        params = policy.SensitivityParams(
            p_u=0.4, alpha=0.0, delta_release=np.log(2.0), delta_withhold=-np.log(2.0)
        )
        a = policy.rr_counterfactual(0.3, 0.12, params, RELEASE, 0.7)
        b = policy.rr_counterfactual(0.3, 0.12, params, WITHHOLD, 0.7)
        # posterior equals prior under alpha=0, so both mixtures reproduce
        # the surface estimate of the other action
        assert a == pytest.approx(0.12, abs=1e-10)
        assert b == pytest.approx(0.3, abs=1e-10)

    def test_fixed_scenario_matches_independent_chain(self):
        params = policy.SensitivityParams(
            p_u=0.3, alpha=np.log(2.0), delta_release=np.log(2.0), delta_withhold=np.log(2.0)
        )
        for observed in (RELEASE, WITHHOLD):
            mine = policy.rr_counterfactual(0.15, 0.15, params, observed, 0.69)
            oracle = rr_chain_oracle(
                0.15, 0.15, 0.3, np.log(2.0), np.log(2.0), np.log(2.0),
                observed == RELEASE, 0.69,
            )
            assert mine == pytest.approx(oracle, abs=1e-8)

    def test_randomized_scenarios_match_independent_chain(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            r_rel = float(rng.uniform(0.02, 0.98))
            r_wh = float(rng.uniform(0.02, 0.98))
            p_u = float(rng.uniform(0.05, 0.95))
            alpha = float(rng.uniform(-2.5, 2.5))
            d_rel = float(rng.uniform(-2.5, 2.5))
            d_wh = float(rng.uniform(-2.5, 2.5))
            q = float(rng.uniform(0.05, 0.95))
            observed = RELEASE if rng.random() < 0.5 else WITHHOLD
            params = policy.SensitivityParams(
                p_u=p_u, alpha=alpha, delta_release=d_rel, delta_withhold=d_wh
            )
            mine = policy.rr_counterfactual(r_rel, r_wh, params, observed, q)
            oracle = rr_chain_oracle(
                r_rel, r_wh, p_u, alpha, d_rel, d_wh, observed == RELEASE, q
            )
            assert mine == pytest.approx(oracle, abs=1e-8)

    def test_vectorized_matches_scalar(self):
        params = policy.SensitivityParams(
            p_u=0.25, alpha=1.1, delta_release=0.6, delta_withhold=-0.4
        )
        r_rel = np.array([0.1, 0.4, 0.7])
        r_wh = np.array([0.2, 0.3, 0.5])
        q = np.array([0.3, 0.6, 0.8])
        actions = np.array([RELEASE, WITHHOLD, RELEASE])
        vec = policy.rr_counterfactual(r_rel, r_wh, params, actions, q)
        for i in range(3):
            s = policy.rr_counterfactual(
                r_rel[i], r_wh[i], params, str(actions[i]), q[i]
            )
            assert vec[i] == pytest.approx(s, abs=1e-12)


def synthetic_cases_and_surface(seed=13, n=400):
    rng = np.random.default_rng(seed)
    keys = np.arange(n, dtype=float)
    actions = np.where(rng.random(n) < 0.65, RELEASE, WITHHOLD)
    outcomes = (rng.random(n) < 0.25).astype(int)
    cases = [case(k, a, o) for k, a, o in zip(keys, actions, outcomes)]
    table = {k: (rng.uniform(0.05, 0.5), rng.uniform(0.05, 0.5)) for k in keys}
    qs = {k: rng.uniform(0.3, 0.9) for k in keys}
    return cases, StubSurface(table, release_probs=qs)


class TestRrEstimate:
    def test_zero_delta_equals_response_surface_estimate(self):
        cases, surface = synthetic_cases_and_surface()
        pol = policy.ConstantPolicy(action=RELEASE)
        base = policy.estimate_policy(cases, pol, surface)
        for alpha in (np.log(2.0), np.log(3.0), -1.0):
            for p_u in (0.1, 0.5, 0.9):
                params = policy.SensitivityParams(
                    p_u=p_u, alpha=alpha, delta_release=0.0, delta_withhold=0.0
                )
                rr = policy.rr_estimate(cases, pol, surface, params)
                assert abs(rr.value - base.value) < 1e-9
        assert rr.method == policy.ROSENBAUM_RUBIN

    def test_full_agreement_ignores_params(self):
        cases, surface = synthetic_cases_and_surface(seed=14)
        observed = np.array([c.action for c in cases])
        pol = policy.FixedActionsPolicy(fixed=observed)
        vals = set()
        for alpha in (0.5, 2.0):
            params = policy.SensitivityParams(
                p_u=0.3, alpha=alpha, delta_release=1.0, delta_withhold=-1.0
            )
            vals.add(policy.rr_estimate(cases, pol, surface, params).value)
        assert len(vals) == 1


class TestSensitivitySweep:
    def test_single_regime_zero_width_at_zero_delta(self):
        cases, surface = synthetic_cases_and_surface(seed=15)
        pol = policy.ConstantPolicy(action=WITHHOLD)
        params = policy.SensitivityParams(
            p_u=0.5, alpha=1.0, delta_release=0.0, delta_withhold=0.0
        )
        band = policy.sensitivity_sweep(cases, pol, surface, [params])
        assert band.width == pytest.approx(0.0, abs=1e-9)

    def test_baseline_always_inside_band(self):
        cases, surface = synthetic_cases_and_surface(seed=16)
        pol = policy.ConstantPolicy(action=RELEASE)
        regimes = policy.regime_grid(np.log(2.0), [0.2, 0.8], [-np.log(2.0), 0.0, np.log(2.0)])
        band = policy.sensitivity_sweep(cases, pol, surface, regimes)
        assert band.low <= band.baseline <= band.high

    def test_empty_regimes_rejected(self):
        cases, surface = synthetic_cases_and_surface(seed=17)
        with pytest.raises(DataError):
            policy.sensitivity_sweep(cases, policy.ConstantPolicy(action=RELEASE), surface, [])

    def test_regime_grid_size(self):
        regimes = policy.regime_grid(np.log(2.0), [0.1, 0.5, 0.9], [-0.7, 0.0, 0.7])
        assert len(regimes) == 3 * 3 * 3


# ---------------------------------------------------------------------------
# Per-group estimates
# ---------------------------------------------------------------------------


class TestPerGroup:
    def test_two_judges_with_different_release_rates_agree_with_pooled(self):
        cfg = synth.GeneratorConfig(
            n=16000, seed=18, judge_offsets=(-1.0, 1.8), release_rate=0.7
        )
        cohort = synth.generate(cfg)
        table = cohort.case_table()
        rel_by_judge = {
            g: np.mean(table.actions[table.group_ids == g] == RELEASE)
            for g in np.unique(table.group_ids)
        }
        rates = sorted(rel_by_judge.values())
        assert rates[0] < 0.6 and rates[1] > 0.8  # genuinely different judges

        card_pol = policy.ConstantPolicy(action=RELEASE)
        folds = data.kfold(len(table), 4, seed=0, labels=table.outcomes.astype(int))
        report = policy.per_group_estimates(table, card_pol, folds, min_group_size=100)
        assert not report.skipped
        assert len(report.estimates) == 2
        pooled_folds = data.kfold(len(table), 4, seed=1, labels=table.outcomes.astype(int))
        pooled_surface = policy.fit_response_surface(table, pooled_folds, n_lambda=30)
        pooled = policy.estimate_policy(table, card_pol, pooled_surface)
        for g in report.estimates:
            assert abs(g.estimate.value - pooled.value) <= 0.02
            assert 0.0 <= g.agreement_rate <= 1.0

    def test_undersized_group_skipped_with_reason(self):
        rng = np.random.default_rng(19)
        n = 300
        groups = np.array(["big"] * (n - 10) + ["tiny"] * 10)
        cases = [
            case(i, RELEASE if rng.random() < 0.6 else WITHHOLD, int(rng.random() < 0.3), g)
            for i, g in enumerate(groups)
        ]
        folds = data.kfold(n, 3, seed=0)
        report = policy.per_group_estimates(
            cases, policy.ConstantPolicy(action=RELEASE), folds, min_group_size=50, n_lambda=10
        )
        skipped = dict(report.skipped)
        assert "tiny" in skipped and "minimum" in skipped["tiny"]
        assert all(g.group_id != "tiny" for g in report.estimates)

    def test_single_group_reproduces_estimate_policy(self):
        rng = np.random.default_rng(20)
        n = 600
        X = rng.normal(size=(n, 2))
        actions = np.where(rng.random(n) < 0.6, RELEASE, WITHHOLD)
        outcomes = (rng.random(n) < sigmoid(-1.0 + X[:, 0])).astype(float)
        table = policy.CaseTable(
            X=X, actions=actions, outcomes=outcomes, group_ids=np.array(["only"] * n)
        )
        pol = policy.ConstantPolicy(action=RELEASE)
        folds = data.kfold(n, 4, seed=0, labels=outcomes.astype(int))
        report = policy.per_group_estimates(table, pol, folds, min_group_size=10, n_lambda=20)
        assert len(report.estimates) == 1
        inner_folds = policy._group_folds(4, "only", outcomes)
        surface = policy.fit_response_surface(table, inner_folds, n_lambda=20)
        expected = policy.estimate_policy(table, pol, surface)
        assert report.estimates[0].estimate == expected

    def test_missing_group_ids_rejected(self):
        cases = [case(0, RELEASE, 0), case(1, WITHHOLD, 1)]
        folds = data.kfold(2, 2, seed=0)
        with pytest.raises(DataError, match="group ids"):
            policy.per_group_estimates(cases, policy.ConstantPolicy(action=RELEASE), folds)


class TestPolicies:
    def test_scorecard_policy_uses_strict_threshold(self):
        from scorekit import srr

        card = srr.Scorecard(
            entries=(("a", 2), ("b", 3)), weight_bound=3, feature_budget=2, threshold=5.0
        )
        pol = policy.ScorecardPolicy(card=card, feature_names=("a", "b"))
        X = np.array([[1.0, 1.0], [1.0, 0.0]])
        assert list(pol.actions(X)) == [WITHHOLD, RELEASE]  # 5 is not < 5

    def test_risk_model_policy(self):
        pol = policy.RiskModelPolicy(
            intercept=0.0, coefficients=np.array([1.0]), threshold=0.5
        )
        X = np.array([[-1.0], [1.0]])
        assert list(pol.actions(X)) == [RELEASE, WITHHOLD]

    def test_cases_from_dataset_maps_actions(self):
        ds = data.Dataset(
            feature_names=("x",),
            rows=np.array([[1.0], [2.0]]),
            labels=np.array([0, 1]),
            actions=np.array(["ROR", "BAIL"]),
            group_ids=np.array(["j1", "j2"]),
        )
        cases = policy.cases_from_dataset(ds, release_value="ROR")
        assert cases[0].action == RELEASE and cases[1].action == WITHHOLD
        assert cases[1].group_id == "j2"
        with pytest.raises(DataError, match="release_value"):
            policy.cases_from_dataset(ds)

    def test_case_record_consistency_checks(self):
        with pytest.raises(DataError, match="action"):
            policy.CaseRecord(covariates=np.array([1.0]), action="hold", outcome=0)
        with pytest.raises(DataError, match="potential outcome"):
            policy.CaseRecord(
                covariates=np.array([1.0]),
                action=RELEASE,
                outcome=0,
                outcome_if_released=1,
                outcome_if_withheld=0,
            )

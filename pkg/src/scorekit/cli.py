"""Command-line driver.

Subcommands wire the library into end-to-end workflows and emit plot-ready
CSV.  Policy evaluation follows a three-fold discipline: one fold constructs
the rules, one fits the response surface, and one is scored, so no policy is
ever evaluated on data its scorecard or surface saw.  All commands are
deterministic given --seed.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import data, glm, metrics, noise, policy, srr, synth
from .errors import DataError, NumericError

_REGIMES = {
    "log2": dict(alpha=float(np.log(2.0)), deltas=(-float(np.log(2.0)), 0.0, float(np.log(2.0)))),
    "log3": dict(alpha=float(np.log(3.0)), deltas=(-float(np.log(3.0)), 0.0, float(np.log(3.0)))),
}
_P_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))


def _parse_int_list(text: str) -> tuple[int, ...]:
    values: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part and not part.startswith("-"):
            a, b = part.split("-", 1)
            values.extend(range(int(a), int(b) + 1))
        else:
            values.append(int(part))
    if not values:
        raise ValueError(f"empty integer list: {text!r}")
    return tuple(values)


def _parse_float_grid(text: str) -> tuple[float, ...]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = (float(v) for v in parts)
        if step <= 0:
            raise ValueError("range step must be positive")
        return tuple(np.arange(start, stop + 0.5 * step, step).round(12))
    return tuple(float(v) for v in text.split(","))


def _out_path(args, name: str) -> str:
    os.makedirs(args.output_dir, exist_ok=True)
    return os.path.join(args.output_dir, name)


def _config_comment(args) -> str:
    skip = {"func"}
    fields = ", ".join(
        f"{k}={v!r}" for k, v in sorted(vars(args).items()) if k not in skip
    )
    return f"scorekit {args.subcommand}: {fields}"


def _load_encoded(args) -> data.Dataset:
    ds = data.load_csv(
        args.input,
        label_column=args.label,
        action_column=getattr(args, "action", None),
        group_column=getattr(args, "group", None),
        positive_label=getattr(args, "positive_label", None),
    )
    if args.encoding:
        with open(args.encoding, "r", encoding="utf-8") as fh:
            spec = data.EncodingSpec.from_json(fh.read())
        ds = data.encode(ds, spec)
    elif ds.categorical_levels:
        raise DataError(
            f"columns {sorted(ds.categorical_levels)} are categorical; "
            "provide --encoding with one-hot directives for them"
        )
    return ds


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_train(args) -> int:
    ds = _load_encoded(args)
    folds = data.kfold(ds.n, args.folds, seed=args.seed, labels=ds.labels)
    card = srr.build_scorecard(
        ds,
        k=args.k,
        M=args.M,
        folds_for_lambda=folds,
        threshold=args.threshold,
        grouped=not args.per_indicator,
        n_lambda=args.n_lambda,
    )
    table_path = _out_path(args, "scorecard.txt")
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write(card.render() + "\n")
    json_path = _out_path(args, "scorecard.json")
    with open(json_path, "w", encoding="utf-8") as fh:
        fh.write(card.to_json() + "\n")
    print(f"wrote {table_path}")
    print(f"wrote {json_path}")
    print(card.render())
    return 0


def _cmd_evaluate(args) -> int:
    ds = _load_encoded(args)
    folds = data.kfold(ds.n, args.folds, seed=args.seed, labels=ds.labels)
    sweep = metrics.cv_sweep(
        ds,
        k_values=_parse_int_list(args.k_values),
        M_values=_parse_int_list(args.M_values),
        folds=folds,
        grouped=not args.per_indicator,
        n_lambda=args.n_lambda,
        inner_folds=args.inner_folds,
        seed=args.seed,
    )
    out = _out_path(args, "sweep.csv")
    sweep.to_csv(out, config_comment=_config_comment(args))
    print(f"wrote {out}")
    for k in sweep.k_values:
        for M in sweep.M_values:
            print(f"k={k} M={M} mean AUC {sweep.mean_auc(metrics.SCORECARD, k, M):.4f}")
    print(f"benchmark lasso_full mean AUC {sweep.mean_auc(metrics.LASSO_FULL):.4f}")
    print(f"benchmark logistic_full mean AUC {sweep.mean_auc(metrics.LOGISTIC_FULL):.4f}")
    return 0


def _cmd_synth_gen(args) -> int:
    hidden = None
    if args.hidden_u:
        p, a, dr, dw = (float(v) for v in args.hidden_u.split(","))
        hidden = policy.SensitivityParams(p_u=p, alpha=a, delta_release=dr, delta_withhold=dw)
    cohort = synth.generate(synth.GeneratorConfig(n=args.n, seed=args.seed, hidden_u=hidden))
    out = _out_path(args, "cohort.csv")
    synth.write_cohort_csv(cohort, out)
    ds = cohort.dataset()
    released = ds.actions == srr.RELEASE
    print(f"wrote {out}")
    print(
        f"n={cohort.n} release_rate={released.mean():.3f} "
        f"adverse|released={ds.labels[np.flatnonzero(released)].mean():.3f}"
    )
    return 0


def _three_fold(args, n: int, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray, str]:
    folds = data.kfold(n, 3, seed=args.seed, labels=labels)
    roles = [(r + args.rotate) % 3 for r in range(3)]
    construct, surface, evaluate = (folds.test_indices(r) for r in roles)
    provenance = (
        f"fold_roles: construct=fold{roles[0]} surface=fold{roles[1]} "
        f"evaluate=fold{roles[2]} (disjoint)"
    )
    return construct, surface, evaluate, provenance


def _load_cohort_or_cases(args):
    """Returns (table, feature_names, column_groups) for policy commands."""
    with open(args.input, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    if header[-3:] == ["__po_release", "__po_withhold", "__u"]:
        cohort = synth.load_cohort_csv(args.input)
        return cohort.case_table(), cohort.feature_names, cohort.column_groups
    if not args.label or not args.action:
        raise DataError("non-cohort input needs --label and --action columns")
    ds = data.load_csv(
        args.input,
        label_column=args.label,
        action_column=args.action,
        group_column=args.group,
        positive_label=args.positive_label,
    )
    cases = policy.cases_from_dataset(ds, release_value=args.release_value)
    return policy.CaseTable.from_cases(cases), ds.feature_names, ds.column_groups


def _construct_policies(args, table, names, groups, construct_idx):
    """Scorecard + full-feature risk model, both fitted on the construct fold."""
    sub = table.take(construct_idx)
    released = np.flatnonzero(sub.actions == srr.RELEASE)
    if len(released) < 20:
        raise DataError("too few released cases in the construction fold")
    rule_ds = data.Dataset(
        feature_names=names,
        rows=sub.X[released],
        labels=sub.outcomes[released].astype(int),
        column_groups=groups,
    )
    lam_folds = data.kfold(rule_ds.n, args.inner_folds, seed=args.seed + 1, labels=rule_ds.labels)
    card = srr.build_scorecard(
        rule_ds, k=args.k, M=args.M, folds_for_lambda=lam_folds, n_lambda=args.n_lambda
    )
    risk_path = glm.cv_select(rule_ds.rows, rule_ds.labels.astype(float), lam_folds, n_lambda=args.n_lambda)
    b0, coefs = risk_path.coefficients_at()
    return card, (b0, coefs)


def _cmd_policy_eval(args) -> int:
    table, names, groups = _load_cohort_or_cases(args)
    construct_idx, surface_idx, eval_idx, provenance = _three_fold(
        args, len(table), table.outcomes.astype(int)
    )
    card, (risk_b0, risk_coefs) = _construct_policies(args, table, names, groups, construct_idx)
    surf_sub = table.take(surface_idx)
    surf_folds = data.kfold(
        len(surf_sub), args.inner_folds, seed=args.seed + 2, labels=surf_sub.outcomes.astype(int)
    )
    surface = policy.fit_response_surface(surf_sub, surf_folds, n_lambda=args.n_lambda)
    eval_sub = table.take(eval_idx)

    if args.thresholds:
        thresholds = _parse_float_grid(args.thresholds)
    else:
        scores = policy.ScorecardPolicy(
            card=card, feature_names=names, threshold=0.0
        ).scores(eval_sub.X)
        thresholds = tuple(np.arange(np.min(scores), np.max(scores) + 1.0) + 0.5)
    risk_thresholds = _parse_float_grid(args.risk_thresholds)

    out = _out_path(args, "policy_eval.csv")
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {_config_comment(args)}\n")
        fh.write(f"# {provenance}\n")
        writer = csv.writer(fh)
        writer.writerow(["policy", "threshold", "action_rate", "value", "method", "regime"])

        observed = policy.FixedActionsPolicy(fixed=eval_sub.actions)
        est = policy.estimate_policy(eval_sub, observed, surface)
        writer.writerow(["observed", "", repr(est.action_rate), repr(est.value), est.method, ""])

        for thr in thresholds:
            pol = policy.ScorecardPolicy(card=card, feature_names=names, threshold=float(thr))
            est = policy.estimate_policy(eval_sub, pol, surface)
            writer.writerow(
                ["scorecard", thr, repr(est.action_rate), repr(est.value), est.method, ""]
            )
        for thr in risk_thresholds:
            pol = policy.RiskModelPolicy(
                intercept=risk_b0, coefficients=risk_coefs, threshold=float(thr)
            )
            est = policy.estimate_policy(eval_sub, pol, surface)
            writer.writerow(
                ["risk_model", thr, repr(est.action_rate), repr(est.value), est.method, ""]
            )
    print(f"wrote {out}")
    print(provenance)
    return 0


def _cmd_sensitivity_sweep(args) -> int:
    table, names, groups = _load_cohort_or_cases(args)
    construct_idx, surface_idx, eval_idx, provenance = _three_fold(
        args, len(table), table.outcomes.astype(int)
    )
    card, (risk_b0, risk_coefs) = _construct_policies(args, table, names, groups, construct_idx)
    surf_sub = table.take(surface_idx)
    surf_folds = data.kfold(
        len(surf_sub), args.inner_folds, seed=args.seed + 2, labels=surf_sub.outcomes.astype(int)
    )
    surface = policy.fit_response_surface(surf_sub, surf_folds, n_lambda=args.n_lambda)
    eval_sub = table.take(eval_idx)

    spec = _REGIMES[args.regime]
    regimes = policy.regime_grid(spec["alpha"], _P_GRID, spec["deltas"])

    if args.thresholds:
        thresholds = _parse_float_grid(args.thresholds)
    else:
        scores = policy.ScorecardPolicy(
            card=card, feature_names=names, threshold=0.0
        ).scores(eval_sub.X)
        thresholds = tuple(np.arange(np.min(scores), np.max(scores) + 1.0) + 0.5)

    out = _out_path(args, "sensitivity.csv")
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {_config_comment(args)}\n")
        fh.write(f"# {provenance}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["policy", "threshold", "action_rate", "baseline", "min", "max", "n_regimes", "regime"]
        )
        for thr in thresholds:
            pol = policy.ScorecardPolicy(card=card, feature_names=names, threshold=float(thr))
            band = policy.sensitivity_sweep(eval_sub, pol, surface, regimes)
            writer.writerow(
                [
                    "scorecard", thr, repr(band.action_rate), repr(band.baseline),
                    repr(band.low), repr(band.high), len(regimes), args.regime,
                ]
            )
    print(f"wrote {out}")
    print(provenance)
    return 0


def _cmd_theory_curve(args) -> int:
    rows = noise.theory_curve(
        _parse_float_grid(args.auc_values), _parse_float_grid(args.gamma_values)
    )
    out = _out_path(args, "theory_curve.csv")
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {_config_comment(args)}\n")
        writer = csv.writer(fh)
        writer.writerow(["auc_y", "gamma", "auc_hat"])
        for a, g, v in rows:
            writer.writerow([a, g, repr(v)])
    print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scorekit",
        description="Integer-weight scorecards and offline policy evaluation.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=0, help="seed for all randomized steps")
        p.add_argument("--output-dir", default=".", help="directory for output files")

    def add_tabular(p):
        p.add_argument("--input", required=True, help="input CSV path")
        p.add_argument("--label", required=True, help="binary label column")
        p.add_argument("--encoding", help="encoding spec JSON path")
        p.add_argument("--positive-label", help="raw label value mapped to 1")
        p.add_argument("--per-indicator", action="store_true",
                       help="select indicator columns individually, not as source-column groups")

    p = sub.add_parser("train", help="build a scorecard from labeled data")
    add_tabular(p)
    p.add_argument("--k", type=int, required=True, help="feature budget")
    p.add_argument("--M", type=int, required=True, help="integer weight bound")
    p.add_argument("--threshold", type=float, help="decision threshold stored on the card")
    p.add_argument("--folds", type=int, default=10, help="folds for penalty selection")
    p.add_argument("--n-lambda", type=int, default=100, help="penalty grid size (up to 1000)")
    add_common(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="cross-validated k x M sweep with benchmarks")
    add_tabular(p)
    p.add_argument("--k-values", default="1-10", help="e.g. 1-10 or 1,2,5")
    p.add_argument("--M-values", default="1,2,3")
    p.add_argument("--folds", type=int, default=10, help="outer CV folds")
    p.add_argument("--inner-folds", type=int, default=5, help="folds for penalty selection")
    p.add_argument("--n-lambda", type=int, default=30)
    add_common(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("synth-gen", help="generate a synthetic decision cohort")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--hidden-u", help="enable a hidden covariate: p,alpha,delta_rel,delta_wh")
    add_common(p)
    p.set_defaults(func=_cmd_synth_gen)

    def add_policy_io(p):
        p.add_argument("--input", required=True, help="cohort CSV or observed-decision CSV")
        p.add_argument("--label", help="outcome column (non-cohort input)")
        p.add_argument("--action", help="action column (non-cohort input)")
        p.add_argument("--group", help="group/judge column (non-cohort input)")
        p.add_argument("--release-value", help="action value meaning release")
        p.add_argument("--positive-label", help="raw label value mapped to 1")
        p.add_argument("--k", type=int, default=2)
        p.add_argument("--M", type=int, default=10)
        p.add_argument("--thresholds", help="scorecard thresholds, start:stop:step or list")
        p.add_argument("--inner-folds", type=int, default=5)
        p.add_argument("--n-lambda", type=int, default=50)
        p.add_argument("--rotate", type=int, default=0, help="rotate the three fold roles")

    p = sub.add_parser("policy-eval", help="estimate policies over a threshold sweep")
    add_policy_io(p)
    p.add_argument("--risk-thresholds", default="0.05:0.95:0.05",
                   help="risk-model release thresholds")
    add_common(p)
    p.set_defaults(func=_cmd_policy_eval)

    p = sub.add_parser("sensitivity-sweep", help="hidden-covariate sensitivity bands")
    add_policy_io(p)
    p.add_argument("--regime", choices=sorted(_REGIMES), default="log2",
                   help="log2: odds shifts of 2; log3: odds shifts of 3")
    add_common(p)
    p.set_defaults(func=_cmd_sensitivity_sweep)

    p = sub.add_parser("theory-curve", help="analytic AUC-under-noise grid")
    p.add_argument("--auc-values", default="0.55:0.95:0.05")
    p.add_argument("--gamma-values", default="0:2:0.1")
    add_common(p)
    p.set_defaults(func=_cmd_theory_curve)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())

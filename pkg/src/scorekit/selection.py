"""Forward stepwise feature selection.

At each step the candidate whose inclusion most reduces training deviance is
added; for a fixed number of added features this ordering is what any
constant-penalty criterion (AIC, BIC, ...) would produce.  Indicator columns
that came from one source column are treated as a single feature by default,
so a binned age column enters or stays out as a block.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .data import Dataset
from .errors import DataError, NumericError
from .glm import fit_logistic

_TIE_EPS = 1e-10


@dataclass(frozen=True)
class SelectionTrace:
    """Greedy selection order with the training deviance after each step."""

    ordered_features: tuple[int, ...]
    step_groups: tuple[tuple[int, ...], ...]
    step_names: tuple[str, ...]
    step_deviance: tuple[float, ...]

    def __post_init__(self):
        flat = tuple(self.ordered_features)
        if len(set(flat)) != len(flat):
            raise DataError("selected column indices must be unique")
        object.__setattr__(self, "ordered_features", flat)
        object.__setattr__(self, "step_groups", tuple(tuple(g) for g in self.step_groups))
        object.__setattr__(self, "step_names", tuple(self.step_names))
        object.__setattr__(self, "step_deviance", tuple(float(d) for d in self.step_deviance))

    def to_json(self) -> str:
        return json.dumps(
            {
                "ordered_features": list(self.ordered_features),
                "step_groups": [list(g) for g in self.step_groups],
                "step_names": list(self.step_names),
                "step_deviance": list(self.step_deviance),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "SelectionTrace":
        d = json.loads(text)
        return cls(
            ordered_features=tuple(d["ordered_features"]),
            step_groups=tuple(tuple(g) for g in d["step_groups"]),
            step_names=tuple(d["step_names"]),
            step_deviance=tuple(d["step_deviance"]),
        )


def _feature_groups(ds: Dataset, grouped: bool) -> list[tuple[str, tuple[int, ...]]]:
    if not grouped:
        return [(name, (j,)) for j, name in enumerate(ds.feature_names)]
    seen: dict[str, list[int]] = {}
    order: list[str] = []
    for j, g in enumerate(ds.column_groups):
        if g not in seen:
            seen[g] = []
            order.append(g)
        seen[g].append(j)
    return [(g, tuple(seen[g])) for g in order]


def forward_stepwise(
    ds: Dataset,
    k: int,
    grouped: bool = True,
    max_iter: int = 60,
    tol: float = 1e-8,
) -> SelectionTrace:
    """Greedily select ``k`` features (column groups) by training deviance.

    Ties break toward the lower column index.  A perfectly separating
    candidate is ranked by the deviance reached when the solver hits its
    divergence bound, which is effectively zero, so it still wins the step.
    Genuine solver failures are re-raised with the step and candidate named.
    """
    groups = _feature_groups(ds, grouped)
    if not 1 <= k <= len(groups):
        raise DataError(
            f"k must be between 1 and the number of selectable features ({len(groups)}); got {k}"
        )

    y = ds.labels.astype(float)
    selected_cols: list[int] = []
    step_groups: list[tuple[int, ...]] = []
    step_names: list[str] = []
    step_dev: list[float] = []
    remaining = list(groups)

    for step in range(k):
        best = None  # (deviance, position, name, cols)
        for pos, (name, cols) in enumerate(remaining):
            trial = selected_cols + list(cols)
            try:
                fit = fit_logistic(
                    ds.rows[:, trial], y, max_iter=max_iter, tol=tol, on_divergence="clamp"
                )
            except NumericError as exc:
                raise NumericError(
                    f"step {step + 1}: solver failed for candidate {name!r}: {exc}"
                ) from exc
            dev = -2.0 * fit.log_likelihood
            if best is None or dev < best[0] - _TIE_EPS:
                best = (dev, pos, name, cols)
        dev, pos, name, cols = best
        del remaining[pos]
        selected_cols.extend(cols)
        step_groups.append(cols)
        step_names.append(name)
        step_dev.append(dev)

    return SelectionTrace(
        ordered_features=tuple(selected_cols),
        step_groups=tuple(step_groups),
        step_names=tuple(step_names),
        step_deviance=tuple(step_dev),
    )

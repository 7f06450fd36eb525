"""Team size versus productivity: per-window metrics, correlations and regressions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from ..stats import ModelFit, RankDeficientError, UndefinedStatistic, ols, pearson

TARGETS = ("commits", "delta_functions", "halstead_effort")
FORMS = ("linear", "quadratic")
CONTROLS = ("mean_in_degree", "mean_fmodr", "n_nodes")

BROOKS_METRICS_HEADER = ("project", "window", "commits", "delta_functions", "halstead_effort",
                         "team_size", "mean_in_degree", "mean_fmodr", "n_nodes")
BROOKS_MODELS_HEADER = ("target", "form", "term", "coef", "se", "r2", "adj_r2", "n")

LOG1P = "log1p"
SQRT = "sqrt"
IDENTITY = "none"

DEFAULT_TRANSFORMS = {
    "commits": LOG1P,
    "delta_functions": LOG1P,
    "halstead_effort": LOG1P,
    "team_size": LOG1P,
    "mean_in_degree": LOG1P,
    "n_nodes": LOG1P,
    "mean_fmodr": SQRT,
}


@dataclass(frozen=True)
class WindowProductivity:
    project: str
    window: int
    commits: int
    delta_functions: int
    halstead_effort: float
    team_size: int
    mean_in_degree: float
    mean_fmodr: Optional[float]
    n_nodes: int

    def row(self) -> tuple:
        return (self.project, self.window, self.commits, self.delta_functions,
                _fmt(self.halstead_effort), self.team_size, _fmt(self.mean_in_degree),
                "" if self.mean_fmodr is None else _fmt(self.mean_fmodr), self.n_nodes)

    def per_member(self) -> dict[str, float]:
        """Productivity divided by team size; network metrics untouched."""
        ts = self.team_size
        return {"commits": self.commits / ts, "delta_functions": self.delta_functions / ts,
                "halstead_effort": self.halstead_effort / ts, "team_size": float(ts),
                "mean_in_degree": self.mean_in_degree,
                "mean_fmodr": math.nan if self.mean_fmodr is None else self.mean_fmodr,
                "n_nodes": float(self.n_nodes)}


def _fmt(x: float):
    return round(float(x), 9)


def productivity_metrics(project: str, window: int, commits: int, authors: Iterable[str],
                         functions_at_start: int, functions_at_end: int,
                         effort_per_commit: Iterable[float], mean_in_degree: float,
                         mean_fmodr: Optional[float], n_nodes: int) -> WindowProductivity:
    team = set(authors)
    if commits < 1:
        raise ValueError("productivity needs at least one commit in the window")
    return WindowProductivity(project, window, commits, functions_at_end - functions_at_start,
                              float(sum(effort_per_commit)), len(team), float(mean_in_degree),
                              mean_fmodr, int(n_nodes))


def _transform(kind: str, x: float) -> float:
    if kind == LOG1P:
        # signed so that negative deltas stay defined
        return math.copysign(math.log1p(abs(x)), x)
    if kind == SQRT:
        return math.copysign(math.sqrt(abs(x)), x)
    if kind == IDENTITY:
        return x
    raise ValueError(f"unknown transform {kind!r}")


def transform_table(rows: Sequence[Mapping[str, float]],
                    policy: Optional[Mapping[str, str]] = None) -> dict[str, list[float]]:
    """Column-wise transforms; columns not named in the policy pass through."""
    policy = {**DEFAULT_TRANSFORMS, **(policy or {})}
    cols: dict[str, list[float]] = {}
    for r in rows:
        for k, v in r.items():
            cols.setdefault(k, []).append(_transform(policy.get(k, IDENTITY), v)
                                          if not math.isnan(v) else math.nan)
    return cols


def correlation_matrix(table: Mapping[str, Sequence[float]],
                       columns: Optional[Sequence[str]] = None) -> tuple[list[str], np.ndarray]:
    """Pearson matrix over already transformed columns (rows with NaN dropped pairwise)."""
    columns = list(columns or table)
    n_rows = {len(table[c]) for c in columns}
    if len(n_rows) != 1 or n_rows.pop() < 3:
        raise ValueError("correlation matrix needs at least three rows of equal length")
    k = len(columns)
    m = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            pairs = [(a, b) for a, b in zip(table[columns[i]], table[columns[j]])
                     if not (math.isnan(a) or math.isnan(b))]
            if len(pairs) < 2:
                raise UndefinedStatistic(f"too few complete rows for {columns[i]}/{columns[j]}")
            r = pearson([p[0] for p in pairs], [p[1] for p in pairs])
            m[i, j] = m[j, i] = r
    return columns, m


@dataclass(frozen=True)
class FittedModel:
    target: str
    form: str
    controls: tuple[str, ...]
    fit: Optional[ModelFit]
    reason: str = ""

    @property
    def ts_coefficient(self) -> Optional[float]:
        return None if self.fit is None else self.fit.coef("TS")

    @property
    def vertex(self) -> Optional[float]:
        """Team size (transformed scale) maximising a concave quadratic fit."""
        if self.fit is None or self.form != "quadratic":
            return None
        b1, b2 = self.fit.coef("TS"), self.fit.coef("TS^2")
        return -b1 / (2.0 * b2) if b2 < 0 else None

    @property
    def label(self) -> str:
        rhs = "TS" if self.form == "linear" else "TS+TS^2"
        if self.controls:
            rhs += "+" + "+".join(self.controls)
        return f"{self.target}~{rhs}"

    def rows(self) -> list[tuple]:
        form = self.form + ("+" + "+".join(self.controls) if self.controls else "")
        if self.fit is None:
            return [(self.target, form, "", "", "", "", "", 0)]
        f = self.fit
        out = [(self.target, form, t.name, _fmt(t.coefficient), _fmt(t.standard_error),
                _fmt(f.r2), _fmt(f.adj_r2), f.n) for t in f.terms]
        if self.vertex is not None:
            out.append((self.target, form, "TS_vertex", _fmt(self.vertex), "", _fmt(f.r2),
                        _fmt(f.adj_r2), f.n))
        return out


def fit_models(table: Mapping[str, Sequence[float]], targets: Sequence[str] = TARGETS,
               forms: Sequence[str] = FORMS,
               control_sets: Sequence[Sequence[str]] = ((),), strict: bool = False
               ) -> list[FittedModel]:
    """One OLS fit per (target, form, control set) on a transformed table.

    Team size enters as ``TS`` (and ``TS^2`` in the quadratic form); rows
    with a missing value in any used column are dropped.
    """
    out = []
    for target, form, controls in product(targets, forms, control_sets):
        controls = tuple(controls)
        for c in controls:
            if c not in CONTROLS:
                raise ValueError(f"unknown control {c!r}")
        if form not in FORMS:
            raise ValueError(f"unknown model form {form!r}")
        used = [target, "team_size", *controls]
        design, y = [], []
        for i in range(len(table[target])):
            vals = [table[c][i] for c in used]
            if any(math.isnan(v) for v in vals):
                continue
            ts = vals[1]
            row = [1.0, ts] + ([ts * ts] if form == "quadratic" else []) + vals[2:]
            design.append(row)
            y.append(vals[0])
        names = ["(IC)", "TS"] + (["TS^2"] if form == "quadratic" else []) + list(controls)
        try:
            fit = ols(design, y, names) if design else None
            reason = "" if fit else "no complete rows"
        except (RankDeficientError, ValueError) as exc:
            if strict:
                raise
            fit, reason = None, str(exc)
        out.append(FittedModel(target, form, controls, fit, reason))
    return out

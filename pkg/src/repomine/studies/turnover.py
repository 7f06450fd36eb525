"""Developer turnover, module group activity, bug density and their correlation."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from ..stats import (ConfidenceInterval, UndefinedStatistic, bootstrap_ci, significance,
                     spearman)

NEWCOMER = "newcomer"
LEAVER = "leaver"
STAYER = "stayer"
ABSENT = "absent"

PROJECT = "project"

GROUPS = ("ENA", "ELA", "INA", "ILA", "StA")

TURNOVER_ACTIVITY_HEADER = ("project", "period", "module", "ENA", "ELA", "INA", "ILA", "StA",
                            "bugfixes", "loc", "density")
TURNOVER_CI_HEADER = ("project", "metric", "lo", "hi", "significance", "B", "seed")

MIN_OBSERVATIONS = 3


@dataclass(frozen=True)
class ModuleMap:
    """Ordered (pattern, module) rules; the first matching pattern wins."""

    rules: tuple[tuple[str, str], ...]
    unassigned_bucket: str = "unassigned"
    _compiled: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        try:
            compiled = tuple((re.compile(p), m) for p, m in self.rules)
        except re.error as exc:
            raise ValueError(f"invalid module pattern: {exc}") from exc
        object.__setattr__(self, "_compiled", compiled)

    @classmethod
    def from_csv(cls, path, unassigned_bucket: str = "unassigned") -> "ModuleMap":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        if rows and [c.strip() for c in rows[0]] == ["pattern", "module"]:
            rows = rows[1:]
        return cls(tuple((r[0], r[1].strip()) for r in rows), unassigned_bucket)

    @property
    def modules(self) -> list[str]:
        seen = []
        for _, m in self.rules:
            if m not in seen:
                seen.append(m)
        return seen

    def __call__(self, path: str) -> str:
        return map_file_to_module(path, self)


def map_file_to_module(path: str, module_map: ModuleMap) -> str:
    for pattern, module in module_map._compiled:
        if pattern.match(path):
            return module
    return module_map.unassigned_bucket


@dataclass(frozen=True)
class TurnoverRecord:
    period_pair: tuple[int, int]
    dev: str
    scope: str
    role: str


def role_of(prev: bool, cur: bool) -> str:
    if cur and not prev:
        return NEWCOMER
    if prev and not cur:
        return LEAVER
    if prev and cur:
        return STAYER
    return ABSENT


def classify_turnover(activity: Mapping[str, Sequence[bool]], scope: str = PROJECT
                      ) -> list[TurnoverRecord]:
    """Roles for every developer at every consecutive period pair.

    ``scope`` is ``"project"`` for external turnover or ``"module:<name>"``
    for internal turnover within one module.
    """
    out = []
    for dev in sorted(activity):
        bits = activity[dev]
        for t in range(1, len(bits)):
            out.append(TurnoverRecord((t - 1, t), dev, scope, role_of(bool(bits[t - 1]), bool(bits[t]))))
    return out


def turnover_share(records: Iterable[TurnoverRecord]) -> Optional[float]:
    """(newcomers + leavers) / non-absent records."""
    present = [r for r in records if r.role != ABSENT]
    if not present:
        return None
    return sum(1 for r in present if r.role in (NEWCOMER, LEAVER)) / len(present)


@dataclass
class ActivityFacts:
    """Interval-indexed activity: churn per (dev, module, interval) and project presence."""

    n_intervals: int
    churn: dict = field(default_factory=dict)  # (dev, module, interval) -> churn
    touched: set = field(default_factory=set)  # (dev, module, interval)
    present: set = field(default_factory=set)  # (dev, interval)

    def add(self, dev: str, module: Optional[str], interval: int, churn: int = 0) -> None:
        self.present.add((dev, interval))
        if module is not None:
            self.touched.add((dev, module, interval))
            key = (dev, module, interval)
            self.churn[key] = self.churn.get(key, 0) + churn


def group_of(facts: ActivityFacts, dev: str, module: str, j: int) -> str:
    """Group of a developer's activity in ``module`` during interval ``j``.

    Arrival is judged on the pair (j-1, j) and departure on (j, j+1); an
    arrival role takes precedence. Intervals past the end of the history are
    unknown and never make anyone a leaver.
    """
    ext_new = j == 0 or (dev, j - 1) not in facts.present
    int_new = j == 0 or (dev, module, j - 1) not in facts.touched
    known_next = j + 1 < facts.n_intervals
    ext_leave = known_next and (dev, j + 1) not in facts.present
    int_leave = known_next and (dev, module, j + 1) not in facts.touched
    if ext_new:
        return "ENA"
    if int_new:
        return "INA"
    if ext_leave:
        return "ELA"
    if int_leave:
        return "ILA"
    return "StA"


def group_activity(facts: ActivityFacts, intervals: Iterable[int], modules: Iterable[str]
                   ) -> dict[str, dict[str, int]]:
    """Churn per group and module within the given intervals (e.g. one six-month period)."""
    intervals = set(intervals)
    out = {m: {g: 0 for g in GROUPS} for m in modules}
    for (dev, module, j) in sorted(facts.touched):
        if j not in intervals:
            continue
        groups = out.setdefault(module, {g: 0 for g in GROUPS})
        groups[group_of(facts, dev, module, j)] += facts.churn.get((dev, module, j), 0)
    return out


class ZeroLocError(ValueError):
    pass


def bug_density(bugfix_commits: Iterable[str], touched_modules: Mapping[str, Iterable[str]],
                loc_per_module: Mapping[str, int]) -> tuple[dict[str, int], dict[str, Optional[float]]]:
    """Bug-fix counts and density per module.

    ``touched_modules`` maps commit hashes to the modules their files fall
    in; a commit touching several modules counts once in each.
    """
    counts = {m: 0 for m in loc_per_module}
    for h in set(bugfix_commits):
        for m in set(touched_modules.get(h, ())):
            counts[m] = counts.get(m, 0) + 1
    density: dict[str, Optional[float]] = {}
    for m, n in counts.items():
        loc = loc_per_module.get(m, 0)
        if loc <= 0:
            if n:
                raise ZeroLocError(f"module {m} has bug fixes but no lines of code")
            density[m] = None
        else:
            density[m] = n / loc
    return counts, density


def read_bugfix_list(path) -> list[str]:
    hashes = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if not re.fullmatch(r"[0-9a-f]{40}", line):
                raise ValueError(f"not a 40-hex commit hash: {line!r}")
            hashes.append(line)
    return hashes


def read_loc_table(path) -> dict[str, int]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if rows and [c.strip() for c in rows[0]] == ["module", "loc"]:
        rows = rows[1:]
    return {r[0].strip(): int(r[1]) for r in rows}


def count_nonblank(text: str) -> int:
    return sum(1 for ln in text.split("\n") if ln.strip())


@dataclass(frozen=True)
class CorrelationResult:
    metric: str
    ci: Optional[ConfidenceInterval]
    significance: Optional[str]
    n: int
    reason: str = ""

    def row(self, project: str, B: int, seed: int) -> tuple:
        if self.ci is None:
            return (project, self.metric, "", "", "absent:" + self.reason, B, seed)
        return (project, self.metric, round(self.ci.lo, 12), round(self.ci.hi, 12),
                self.significance, B, seed)


def turnover_quality_correlation(observations: Sequence[tuple[Mapping[str, float], float]],
                                 B: int = 2000, seed: int = 0, metrics: Sequence[str] = GROUPS,
                                 jobs: int = 1) -> list[CorrelationResult]:
    """Bootstrap Spearman interval between each group activity and bug density.

    ``observations`` holds one (activity-by-group, density) pair per module
    (or module-period); fewer than three yields an absent result.
    """
    out = []
    for metric in metrics:
        pairs = [(float(act[metric]), float(dens)) for act, dens in observations
                 if dens is not None]
        if len(pairs) < MIN_OBSERVATIONS:
            out.append(CorrelationResult(metric, None, None, len(pairs), "insufficient modules"))
            continue
        try:
            ci = bootstrap_ci(pairs, spearman, B=B, seed=seed, jobs=jobs)
        except UndefinedStatistic:
            out.append(CorrelationResult(metric, None, None, len(pairs), "undefined statistic"))
            continue
        out.append(CorrelationResult(metric, ci, significance(ci), len(pairs)))
    return out

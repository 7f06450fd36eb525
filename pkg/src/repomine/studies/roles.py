"""Core/peripheral classification agreement and hierarchical embedding."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping, Optional, Sequence

from ..gitio import FileChange
from ..network import DevNetwork, node_metrics
from ..stats import RankDeficientError, UndefinedStatistic, cohen_kappa, ols

METRICS = ("loc", "commits", "degree", "evcent", "hierarchy")
CORE = "core"
PERIPHERAL = "peripheral"

ROLES_AGREEMENT_HEADER = ("metric_a", "metric_b", "mean_kappa", "windows_used", "windows_skipped")
HIERARCHY_HEADER = ("window", "dev", "degree", "clustering", "role")


@dataclass(frozen=True)
class RoleClassification:
    window: int
    metric: str
    core_set: frozenset
    universe: frozenset

    def __post_init__(self):
        if not self.core_set <= self.universe:
            raise ValueError("core set must be a subset of the universe")

    @property
    def peripheral(self) -> frozenset:
        return self.universe - self.core_set

    def label(self, dev: str) -> str:
        return CORE if dev in self.core_set else PERIPHERAL


def count_metrics(commit_devs: Iterable[tuple[str, str]],
                  changes_by_commit: Mapping[str, Sequence[FileChange]]) -> dict[str, tuple[int, int]]:
    """Per developer (commit_count, loc_churn) over a window's commits."""
    out: dict[str, list[int]] = {}
    for commit, dev in commit_devs:
        acc = out.setdefault(dev, [0, 0])
        acc[0] += 1
        acc[1] += sum(c.churn for c in changes_by_commit.get(commit, ()))
    return {d: (v[0], v[1]) for d, v in sorted(out.items())}


def classify_core(values: Mapping[str, float], threshold_fraction: float = 0.8,
                  window: int = 0, metric: str = "") -> RoleClassification:
    """Smallest top-ranked prefix holding ``threshold_fraction`` of the total."""
    if any(v < 0 for v in values.values()):
        raise ValueError("metric values must be non-negative")
    total = float(sum(values.values()))
    if total <= 0:
        raise ValueError("cannot classify when every metric value is zero")
    ranked = sorted(values.items(), key=lambda kv: (-kv[1], kv[0]))
    target = threshold_fraction * total * (1.0 - 1e-12)
    core = []
    acc = 0.0
    for dev, v in ranked:
        if acc >= target or (v == 0 and core):
            break
        core.append(dev)
        acc += v
    return RoleClassification(window, metric, frozenset(core), frozenset(values))


def network_values(net: DevNetwork, universe: Iterable[str], **kwargs) -> dict[str, dict[str, float]]:
    """degree / evcent / hierarchy per developer; devs outside the network get 0."""
    universe = sorted(set(universe))
    out = {m: {d: 0.0 for d in universe} for m in ("degree", "evcent", "hierarchy")}
    if not net.nodes:
        return out
    for nm in node_metrics(net, **kwargs):
        if nm.dev in out["degree"]:
            out["degree"][nm.dev] = float(nm.degree)
            out["evcent"][nm.dev] = abs(nm.evcent)
            out["hierarchy"][nm.dev] = nm.hierarchy
    return out


def classify_window(window: int, counts: Mapping[str, tuple[int, int]], net: DevNetwork,
                    threshold_fraction: float = 0.8, **metric_kwargs) -> dict[str, RoleClassification]:
    """Classifications for every metric over the window's active developers."""
    universe = set(counts)
    values = {"loc": {d: float(c[1]) for d, c in counts.items()},
              "commits": {d: float(c[0]) for d, c in counts.items()}}
    values.update(network_values(net, universe, **metric_kwargs))
    out = {}
    for metric in METRICS:
        vals = values[metric]
        if sum(vals.values()) > 0:
            out[metric] = classify_core(vals, threshold_fraction, window, metric)
    return out


def window_kappa(a: RoleClassification, b: RoleClassification) -> Optional[float]:
    universe = sorted(a.universe | b.universe)
    try:
        return cohen_kappa([a.label(d) == CORE for d in universe],
                           [b.label(d) == CORE for d in universe])
    except UndefinedStatistic:
        return None


@dataclass(frozen=True)
class PairAgreement:
    metric_a: str
    metric_b: str
    mean_kappa: Optional[float]
    windows_used: int
    windows_skipped: int

    def row(self) -> tuple:
        return (self.metric_a, self.metric_b,
                "" if self.mean_kappa is None else round(self.mean_kappa, 12),
                self.windows_used, self.windows_skipped)


class NoDefinedWindow(ValueError):
    pass


def agreement_matrix(classifications: Mapping[int, Mapping[str, RoleClassification]],
                     windows: Optional[Iterable[int]] = None, metrics: Sequence[str] = METRICS,
                     strict: bool = False) -> dict[tuple[str, str], PairAgreement]:
    """Mean per-window Cohen's kappa for every metric pair (both orders, unit diagonal)."""
    span = sorted(classifications if windows is None else windows)
    out: dict[tuple[str, str], PairAgreement] = {}
    for ma, mb in combinations(metrics, 2):
        kappas, skipped = [], 0
        for w in span:
            cls = classifications.get(w, {})
            if ma not in cls or mb not in cls:
                skipped += 1
                continue
            k = window_kappa(cls[ma], cls[mb])
            if k is None:
                skipped += 1
            else:
                kappas.append(k)
        if not kappas and strict:
            raise NoDefinedWindow(f"no window with defined kappa for {ma}/{mb}")
        mean = sum(kappas) / len(kappas) if kappas else None
        out[(ma, mb)] = PairAgreement(ma, mb, mean, len(kappas), skipped)
        out[(mb, ma)] = PairAgreement(mb, ma, mean, len(kappas), skipped)
    for m in metrics:
        used = sum(1 for w in span if m in classifications.get(w, {}))
        out[(m, m)] = PairAgreement(m, m, 1.0, used, len(span) - used)
    return out


@dataclass(frozen=True)
class HierarchyRow:
    window: int
    dev: str
    degree: int
    clustering: float
    role: str

    def row(self) -> tuple:
        return (self.window, self.dev, self.degree, round(self.clustering, 12), self.role)


@dataclass(frozen=True)
class Embedding:
    rows: tuple[HierarchyRow, ...]
    slope: Optional[float]


def hierarchy_embedding(net: DevNetwork, classification: Optional[RoleClassification] = None,
                        **metric_kwargs) -> Embedding:
    """Degree/clustering per developer and the log-log slope of clustering on degree."""
    if not net.nodes:
        raise ValueError("hierarchy embedding needs a non-empty network")
    rows = []
    for nm in node_metrics(net, **metric_kwargs):
        if nm.degree < 2 or nm.clustering is None:
            continue
        role = classification.label(nm.dev) if classification is not None else ""
        rows.append(HierarchyRow(net.window, nm.dev, nm.degree, nm.clustering, role))
    pts = [(math.log(r.degree), math.log(r.clustering)) for r in rows if r.clustering > 0]
    slope = None
    if len(pts) >= 3:
        ys = [p[1] for p in pts]
        if max(ys) - min(ys) > 0:
            try:
                fit = ols([[1.0, x] for x, _ in pts], ys)
                slope = fit.terms[1].coefficient
            except (RankDeficientError, ValueError):
                slope = None
    return Embedding(tuple(rows), slope)


def cross_variant_agreement(classifications: Mapping[str, RoleClassification],
                            display_names: Mapping[str, Mapping[str, str]]
                            ) -> dict[tuple[str, str], Optional[float]]:
    """Kappa between variant pairs on developers found by every variant (by display name)."""
    if len(classifications) < 2:
        raise ValueError("need at least two variants")
    named: dict[str, dict[str, bool]] = {}
    for variant, cls in classifications.items():
        names = display_names[variant]
        labels: dict[str, bool] = {}
        for dev in cls.universe:
            nm = names.get(dev, dev)
            labels[nm] = labels.get(nm, False) or dev in cls.core_set
        named[variant] = labels
    common = set.intersection(*(set(v) for v in named.values()))
    if not common:
        raise ValueError("no developer is shared by all variants")
    common = sorted(common)
    out = {}
    for va, vb in combinations(sorted(named), 2):
        try:
            out[(va, vb)] = cohen_kappa([named[va][n] for n in common], [named[vb][n] for n in common])
        except UndefinedStatistic:
            out[(va, vb)] = None
    return out

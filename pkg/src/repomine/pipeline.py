"""Extraction and analysis of one repository under one or more variants.

:class:`ExtractionCache` holds everything that depends only on the git
history (logs per traversal mode, diffs, blobs, blame), so variants that
differ only downstream reuse it. :func:`analyze_variant` turns the cached
history into variant-specific facts, and the ``run_*`` functions compute
the studies on those facts.
"""

from __future__ import annotations

import bisect
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, replace
from typing import Any, Optional

from . import halstead, identity
from .config import RunConfig, VariantConfig
from .entities import (EntityChange, count_declared, decode_lossy,
                       detect_entities_declared, entity_changes_for_diff, language_of)
from .gitio import (ALL_BRANCHES, FILTER_BEFORE_STORE, CommitRecord, FileChange, FileDiff,
                    PathNotFoundError, Repository, apply_file_filters)
from .network import (LINE_OWNERSHIP, TEMPORAL_ENTITY, DevNetwork,
                      GraphMetrics, LineModification, build_bipartite_projection,
                      build_line_ownership_network, build_temporal_entity_network,
                      foreign_modification_ratio, graph_metrics)
from .stats import UndefinedStatistic
from .studies import brooks, roles, turnover
from .windows import (TimeWindow, WindowIndex, parse_span, split_windows, subtract_span,
                      to_epoch)

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, stage: str, variant: str, cause: BaseException):
        super().__init__(f"stage {stage} failed for variant {variant}: {cause}")
        self.stage = stage
        self.variant = variant
        self.cause = cause


@contextmanager
def stage(name: str, variant: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, variant, exc) from exc


def _map(fn, items, jobs: int):
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


class ExtractionCache:
    """Variant-independent history facts for one repository."""

    def __init__(self, repo: Repository, jobs: int = 1):
        self.repo = repo
        self.jobs = jobs
        self._logs: dict[tuple, tuple[list[CommitRecord], dict[str, list[FileChange]]]] = {}
        self._diffs: dict[str, list[FileDiff]] = {}
        self._texts: dict[tuple[str, str], Optional[str]] = {}
        self._spans: dict[tuple[str, str], list] = {}
        self._functions: dict[tuple[str, str], int] = {}
        self._trees: dict[str, list[str]] = {}
        self.hits = 0
        self.misses = 0

    def log(self, branch_mode: str, branch: str = ""):
        key = (branch_mode, branch if branch_mode != ALL_BRANCHES else "")
        if key in self._logs:
            self.hits += 1
            log.info("extraction cache hit for %s", key)
            return self._logs[key]
        self.misses += 1
        log.info("extracting history for %s", key)
        result = self.repo.log(branch_mode, branch or None)
        self._logs[key] = result
        return result

    def diff(self, commit: CommitRecord) -> list[FileDiff]:
        cached = self._diffs.get(commit.hash)
        if cached is None:
            parent = commit.parents[0] if commit.parents else None
            cached = self.repo.diff(commit.hash, parent)
            self._diffs[commit.hash] = cached
        return cached

    def text(self, rev: str, path: str) -> Optional[str]:
        key = (rev, path)
        if key not in self._texts:
            data = self.repo.read_file(rev, path)
            self._texts[key] = None if data is None else decode_lossy(data)[0]
        return self._texts[key]

    def spans(self, rev: str, path: str) -> list:
        key = (rev, path)
        if key not in self._spans:
            text = self.text(rev, path)
            self._spans[key] = [] if text is None else detect_entities_declared(
                text, language_of(path), path)
        return self._spans[key]

    def tree(self, rev: str) -> list[str]:
        if rev not in self._trees:
            self._trees[rev] = self.repo.list_files(rev)
        return self._trees[rev]

    def functions_in(self, rev: str, path: str) -> int:
        key = (rev, path)
        if key not in self._functions:
            text = self.text(rev, path)
            self._functions[key] = 0 if text is None else count_declared(text, language_of(path))
        return self._functions[key]

    def blame_owners(self, rev: str, path: str) -> dict[int, tuple[str, str]]:
        try:
            return {a.line_no: a.owner_dev for a in self.repo.blame_at(rev, path)}
        except PathNotFoundError:
            return {}


@dataclass
class CommitFacts:
    diffs: list[FileDiff]
    entity_changes: list[EntityChange]
    modifications: list[tuple[int, int, tuple[str, str]]]  # (file index, line, raw owner)
    effort: float


@dataclass
class VariantFacts:
    config: VariantConfig
    commits: list[CommitRecord]
    stored_changes: dict[str, list[FileChange]]
    changes: dict[str, list[FileChange]]
    partition: identity.Partition
    dev_of: dict[str, str]
    time_of: dict[str, int]
    diffs: dict[str, list[FileDiff]]
    entity_changes: list[EntityChange]
    modifications: list[LineModification]
    effort: dict[str, float]
    windows: list[TimeWindow]
    origin: int
    until: int

    def commits_in(self, start: int, end: int) -> list[CommitRecord]:
        return [c for c in self.commits if start <= self.time_of[c.hash] < end]


def _time(c: CommitRecord, field_name: str) -> int:
    return c.author_time if field_name == "author" else c.commit_time


def history_bounds(cache: ExtractionCache, time_field: str = "author") -> tuple[int, int]:
    """Earliest and one-past-latest fact time over all branches."""
    commits, _ = cache.log(ALL_BRANCHES)
    if not commits:
        return 0, 1
    times = [_time(c, time_field) for c in commits]
    return min(times), max(times) + 1


def _keep_diff(d: FileDiff, filters) -> bool:
    if filters.is_empty:
        return True
    return filters.allows(d.path) and not filters.denies(d.path, d.is_binary)


def analyze_variant(cache: ExtractionCache, cfg: VariantConfig, bounds: tuple[int, int],
                    need_blame: bool = True, jobs: int = 1) -> VariantFacts:
    """Variant-specific facts: stored tables, identities, entity changes, line ownership."""
    ex = cfg["extract"]
    filters = cfg.filters
    with stage("extract", cfg.name):
        all_commits, all_changes = cache.log(ex["branch_mode"], ex["branch"])
        if filters.order == FILTER_BEFORE_STORE and not filters.is_empty:
            stored_changes = {h: apply_file_filters(v, filters) for h, v in all_changes.items()}
            commits = [c for c in all_commits if not all_changes[c.hash] or stored_changes[c.hash]]
        else:
            stored_changes = dict(all_changes)
            commits = list(all_commits)
        changes = {c.hash: apply_file_filters(stored_changes[c.hash], filters) for c in commits}

    ent = cfg["entities"]
    mode, gap, fallback = ent["mode"], int(ent["gap"]), bool(ent["fallback"])

    def process(c: CommitRecord) -> CommitFacts:
        diffs = [d for d in cache.diff(c) if _keep_diff(d, filters)]
        parent = c.parents[0] if c.parents else None
        echanges: list[EntityChange] = []
        mods: list[tuple[int, int, tuple[str, str]]] = []
        effort = 0.0
        for i, d in enumerate(diffs):
            if d.is_binary or not d.hunks:
                continue
            lang = language_of(d.path)
            if lang is not None or fallback:
                post = cache.spans(c.hash, d.path) if not d.is_deleted else []
                pre = cache.spans(parent, d.pre_path) if parent and not d.is_new else []
                if lang is None:
                    post = post or detect_entities_declared("", None, d.path)
                    pre = pre or detect_entities_declared("", None, d.path)
                echanges += entity_changes_for_diff(d, post, pre, mode, gap, fallback, c.hash, "")
            lines = [t for h in d.hunks for t in h.added_text + h.deleted_text]
            effort += halstead.effort_of_lines(lines, lang)
            if need_blame and parent and not d.is_new:
                old_lines = [ln for h in d.hunks for ln in h.old_lines]
                if old_lines:
                    owners = cache.blame_owners(parent, d.pre_path)
                    mods += [(i, ln, owners[ln]) for ln in old_lines if ln in owners]
        return CommitFacts(diffs, echanges, mods, effort)

    with stage("entities", cfg.name):
        per_commit = _map(process, commits, jobs)

    with stage("identity", cfg.name):
        idc = cfg["identity"]
        owners = {m[2] for cf in per_commit for m in cf.modifications}
        partition = identity.resolve(commits, idc["mode"], int(idc["threshold"]), idc["scope"],
                                     extra=sorted(owners))
        dev_of = {c.hash: partition.id_of((c.author_name.strip(), c.author_email.strip()))
                  for c in commits}

    tf = cfg["windows"]["time_field"]
    time_of = {c.hash: _time(c, tf) for c in commits}
    entity_changes: list[EntityChange] = []
    modifications: list[LineModification] = []
    diffs: dict[str, list[FileDiff]] = {}
    effort: dict[str, float] = {}
    for c, cf in zip(commits, per_commit):
        dev = dev_of[c.hash]
        diffs[c.hash] = cf.diffs
        effort[c.hash] = cf.effort
        entity_changes += [replace(e, dev=dev) for e in cf.entity_changes]
        for i, ln, owner in cf.modifications:
            owner_id = partition.get_id((owner[0].strip(), owner[1].strip()))
            modifications.append(LineModification(c.hash, cf.diffs[i].pre_path, ln, dev, owner_id))

    with stage("windows", cfg.name):
        win = cfg["windows"]
        origin = to_epoch(win["origin"]) if win["origin"] else bounds[0]
        until = max(bounds[1], origin + 1)
        windows = split_windows(origin, until, win["length"], win["overlap_step"] or None)

    return VariantFacts(cfg, commits, stored_changes, changes, partition, dev_of, time_of,
                        diffs, entity_changes, modifications, effort, windows, origin, until)


# -- per-window building blocks -----------------------------------------------

def window_network(facts: VariantFacts, start: int, end: int, index: int) -> DevNetwork:
    net_cfg = facts.config["network"]
    in_window = {c.hash for c in facts.commits_in(start, end)}
    active = {facts.dev_of[h] for h in in_window}
    variant = net_cfg["variant"]
    if variant == TEMPORAL_ENTITY:
        ech = [e for e in facts.entity_changes if e.commit in in_window]
        return build_temporal_entity_network(ech, net_cfg["weight_scheme"], index, active)
    if variant == LINE_OWNERSHIP:
        mods = [m for m in facts.modifications if m.commit in in_window]
        return build_line_ownership_network(mods, index, active)
    events = [(facts.dev_of[c.hash], ch.path) for c in facts.commits if c.hash in in_window
              for ch in facts.changes[c.hash]]
    return build_bipartite_projection(events, index, active)


def _metric_kwargs(facts: VariantFacts) -> dict:
    n = facts.config["network"]
    return {"hierarchy": n["hierarchy"], "weighted_evcent": bool(n["weighted_evcent"])}


def baseline_counts(facts: VariantFacts) -> dict[int, dict[str, int]]:
    out = {}
    for w in facts.windows:
        commits = facts.commits_in(w.start, w.end)
        hashes = {c.hash for c in commits}
        out[w.index] = {
            "commits": len(commits),
            "files": len({ch.path for c in commits for ch in facts.changes[c.hash]}),
            "developers": len({facts.dev_of[c.hash] for c in commits}),
            "entity_blocks": sum(1 for e in facts.entity_changes if e.commit in hashes),
        }
    return out


# -- studies --------------------------------------------------------------------

@dataclass
class RolesResult:
    classifications: dict[int, dict[str, roles.RoleClassification]]
    networks: dict[int, DevNetwork]
    graph: dict[int, Optional[GraphMetrics]]
    recent: dict
    overall: dict
    recent_windows: list[int]
    embeddings: dict[int, roles.Embedding]


def run_roles(facts: VariantFacts) -> RolesResult:
    cfg = facts.config
    kwargs = _metric_kwargs(facts)
    threshold = float(cfg["roles"]["core_threshold"])
    classifications, networks, graph, embeddings = {}, {}, {}, {}
    for w in facts.windows:
        commits = facts.commits_in(w.start, w.end)
        net = window_network(facts, w.start, w.end, w.index)
        networks[w.index] = net
        graph[w.index] = graph_metrics(net) if net.nodes else None
        if not commits:
            continue
        counts = roles.count_metrics([(c.hash, facts.dev_of[c.hash]) for c in commits], facts.changes)
        cls = roles.classify_window(w.index, counts, net, threshold, **kwargs)
        classifications[w.index] = cls
        if net.nodes:
            embeddings[w.index] = roles.hierarchy_embedding(net, cls.get("hierarchy"), **kwargs)
    span = parse_span(cfg["roles"]["averaging_span"])
    last_end = facts.windows[-1].end if facts.windows else facts.until
    recent_start = subtract_span(last_end, span)
    recent_windows = [w.index for w in facts.windows if w.start >= recent_start]
    recent = roles.agreement_matrix(classifications, [w for w in recent_windows if w in classifications])
    overall = roles.agreement_matrix(classifications)
    return RolesResult(classifications, networks, graph, recent, overall, recent_windows, embeddings)


@dataclass
class BrooksResult:
    rows: list[brooks.WindowProductivity]
    table: dict[str, list[float]]
    correlation: Optional[tuple[list[str], Any]]
    correlation_error: str
    models: list[brooks.FittedModel]


def _snapshot_rev(facts: VariantFacts, boundary: int, order: list[tuple[int, str]]) -> Optional[str]:
    k = bisect.bisect_left(order, (boundary, ""))
    return order[k - 1][1] if k else None


def _function_total(cache: ExtractionCache, rev: Optional[str], filters) -> int:
    if rev is None:
        return 0
    total = 0
    for path in cache.tree(rev):
        if language_of(path) is None:
            continue
        if not filters.is_empty and (not filters.allows(path) or filters.denies(path)):
            continue
        total += cache.functions_in(rev, path)
    return total


def run_brooks(facts: VariantFacts, cache: ExtractionCache, project: str) -> BrooksResult:
    cfg = facts.config
    bw = split_windows(facts.origin, facts.until, cfg["brooks"]["window_length"])
    order = sorted((facts.time_of[c.hash], c.hash) for c in facts.commits)
    filters = cfg.filters
    rows = []
    for w in bw:
        commits = facts.commits_in(w.start, w.end)
        if not commits:
            continue
        net = window_network(facts, w.start, w.end, w.index)
        gm = graph_metrics(net)
        hashes = {c.hash for c in commits}
        fm = foreign_modification_ratio(m for m in facts.modifications if m.commit in hashes)
        start_rev = _snapshot_rev(facts, w.start, order)
        end_rev = _snapshot_rev(facts, w.end, order)
        rows.append(brooks.productivity_metrics(
            project, w.index, len(commits), [facts.dev_of[h] for h in hashes],
            _function_total(cache, start_rev, filters), _function_total(cache, end_rev, filters),
            [facts.effort[h] for h in sorted(hashes)], gm.mean_in_degree, fm.mean, gm.n_nodes))
    table = brooks.transform_table([r.per_member() for r in rows], cfg["brooks"]["transforms"])
    corr, corr_err = None, ""
    cols = ["commits", "delta_functions", "halstead_effort", "team_size", "mean_in_degree",
            "mean_fmodr", "n_nodes"]
    try:
        corr = brooks.correlation_matrix(table, cols) if rows else None
        if corr is None:
            corr_err = "no windows"
    except (ValueError, UndefinedStatistic) as exc:
        corr_err = str(exc)
    models = brooks.fit_models(table, control_sets=cfg["brooks"]["control_sets"]) if rows else []
    return BrooksResult(rows, table, corr, corr_err, models)


@dataclass
class TurnoverResult:
    rows: list[tuple]
    correlations: list[turnover.CorrelationResult]
    share: Optional[float]
    loc_source: str
    n_intervals: int


def default_module_map(paths: list[str]) -> turnover.ModuleMap:
    tops = sorted({p.split("/", 1)[0] for p in paths if "/" in p})
    return turnover.ModuleMap(tuple((f"^{re.escape(t)}/", t) for t in tops))


def run_turnover(facts: VariantFacts, cache: ExtractionCache, run: RunConfig,
                 jobs: int = 1) -> TurnoverResult:
    cfg = facts.config
    tcfg = cfg["turnover"]
    last = max(facts.commits, key=lambda c: (facts.time_of[c.hash], c.hash)) if facts.commits else None
    tree = [p for p in cache.tree(last.hash) if cfg.filters.is_empty
            or (cfg.filters.allows(p) and not cfg.filters.denies(p))] if last else []
    mmap = (turnover.ModuleMap.from_csv(run.inputs["module_map"]) if run.inputs.get("module_map")
            else default_module_map(tree))
    intervals = split_windows(facts.origin, facts.until, tcfg["interval"])
    periods = split_windows(facts.origin, facts.until, tcfg["period"])
    idx = WindowIndex(intervals)
    act = turnover.ActivityFacts(len(intervals))
    touched: dict[str, set] = {}
    for c in facts.commits:
        j = idx(facts.time_of[c.hash])
        if not j:
            continue
        dev = facts.dev_of[c.hash]
        act.add(dev, None, j[0])
        mods = touched.setdefault(c.hash, set())
        for ch in facts.changes[c.hash]:
            m = mmap(ch.path)
            act.add(dev, m, j[0], ch.churn)
            mods.add(m)

    loc_source = tcfg["loc_source"]
    if loc_source == "auto":
        loc_source = "table" if run.inputs.get("loc_table") else "builtin"
    if loc_source == "table":
        if not run.inputs.get("loc_table"):
            raise ValueError("loc_source=table needs inputs.loc_table")
        loc = turnover.read_loc_table(run.inputs["loc_table"])
    else:
        loc = {}
        for p in tree:
            text = cache.text(last.hash, p)
            if text is not None:
                m = mmap(p)
                loc[m] = loc.get(m, 0) + turnover.count_nonblank(text)
    modules = sorted(set(mmap.modules) | set(loc) | {m for (_, m, _) in act.touched})
    bugfixes = set(turnover.read_bugfix_list(run.inputs["bugfixes"])) if run.inputs.get("bugfixes") else set()

    rows, observations = [], []
    for p in periods:
        js = [i.index for i in intervals if p.start <= i.start < p.end]
        groups = turnover.group_activity(act, js, modules)
        in_period = {c.hash for c in facts.commits_in(p.start, p.end)}
        counts, density = turnover.bug_density(bugfixes & in_period, touched,
                                               {m: loc.get(m, 0) for m in modules})
        for m in modules:
            g = groups.get(m, {k: 0 for k in turnover.GROUPS})
            rows.append((run.project, p.index, m, *(g[k] for k in turnover.GROUPS),
                         counts.get(m, 0), loc.get(m, 0), density.get(m)))
            if density.get(m) is not None:
                observations.append((g, density[m]))
    corrs = turnover.turnover_quality_correlation(observations, B=run.bootstrap_resamples,
                                                  seed=run.seed, jobs=jobs)
    bits = {}
    for (dev, j) in act.present:
        bits.setdefault(dev, [False] * len(intervals))[j] = True
    share = turnover.turnover_share(turnover.classify_turnover(bits))
    return TurnoverResult(rows, corrs, share, loc_source, len(intervals))

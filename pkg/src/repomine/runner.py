"""Run configured variants end to end and write the artifact tree.

Layout under the output directory::

    facts/<variant>/      commits, file_changes, identities, entity_changes, windows
    networks/<variant>/   edges_w<k>, adjacency_w<k>, graph_metrics
    studies/<variant>/    roles_*, hierarchy, brooks_*, turnover_* tables and SVG charts
    compare/              baseline, verdicts, roles_cross_variant tables and charts
    report.md
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Optional

from . import __version__, agreement, plots
from .config import RunConfig, VariantConfig
from .entities import ENTITY_CHANGES_HEADER
from .gitio import COMMITS_HEADER, FILE_CHANGES_HEADER, Repository
from .identity import IDENTITIES_HEADER
from .network import ADJACENCY_HEADER, EDGES_HEADER
from .output import write_csv, write_text
from .pipeline import (BrooksResult, ExtractionCache, RolesResult, StageError, TurnoverResult,
                       VariantFacts, analyze_variant, baseline_counts, history_bounds, run_brooks,
                       run_roles, run_turnover, stage)
from .stats import kappa_band
from .studies import brooks, roles, turnover
from .windows import WINDOWS_HEADER, iso

log = logging.getLogger(__name__)

SUBCOMMAND_STAGES = {
    "extract": {"extract"},
    "networks": {"extract", "networks"},
    "roles": {"extract", "networks", "roles"},
    "brooks": {"extract", "brooks"},
    "turnover": {"extract", "turnover"},
    "compare": {"extract", "networks", "studies", "compare", "report"},
    "report": {"extract", "networks", "studies", "compare", "report"},
    "run": {"extract", "networks", "studies", "compare", "report"},
}


@dataclass
class VariantOutcome:
    name: str
    facts: Optional[VariantFacts] = None
    roles: Optional[RolesResult] = None
    brooks: Optional[BrooksResult] = None
    turnover: Optional[TurnoverResult] = None
    error: Optional[StageError] = None


@dataclass
class RunOutcome:
    out_dir: str
    variants: list[VariantOutcome]
    verdicts: list[agreement.AgreementVerdict] = field(default_factory=list)
    written: list[str] = field(default_factory=list)
    cache_hits: int = 0

    @property
    def failed(self) -> list[VariantOutcome]:
        return [v for v in self.variants if v.error is not None]


class _Writer:
    def __init__(self, out_dir: str, run: RunConfig):
        self.out_dir = out_dir
        self.run = run
        self.written: list[str] = []

    def csv(self, rel: str, header, rows, variant: Optional[VariantConfig] = None):
        path = os.path.join(self.out_dir, rel)
        self.written.append(write_csv(path, header, rows, self.run.metadata_line(variant)))

    def svg(self, rel: str, fn, *args, variant: Optional[VariantConfig] = None, **kwargs):
        path = os.path.join(self.out_dir, rel)
        self.written.append(fn(path, *args, meta=self.run.metadata_line(variant), **kwargs))

    def text(self, rel: str, text: str):
        self.written.append(write_text(os.path.join(self.out_dir, rel), text))


def _studies_for(stages: set, run: RunConfig) -> set:
    if "studies" in stages:
        return set(run.studies)
    return {s for s in ("roles", "brooks", "turnover") if s in stages}


def execute(run: RunConfig, out_dir: str, subcommand: str = "run", jobs: Optional[int] = None,
            only: Optional[Iterable[str]] = None) -> RunOutcome:
    """Run the stages a subcommand needs for every selected variant.

    Repository errors propagate; a failure inside one variant is recorded on
    its outcome and the remaining variants still run.
    """
    stages = SUBCOMMAND_STAGES[subcommand]
    jobs = run.jobs if jobs is None else jobs
    studies = _studies_for(stages, run)
    variants = [v for v in run.variants if only is None or v.name in set(only)]
    w = _Writer(out_dir, run)
    with Repository(run.repo) as repo:
        cache = ExtractionCache(repo, jobs)
        bounds = history_bounds(cache)
        outcomes = []
        for cfg in variants:
            outcome = VariantOutcome(cfg.name)
            outcomes.append(outcome)
            try:
                _run_variant(cfg, cache, run, bounds, stages, studies, jobs, w, outcome)
            except StageError as exc:
                log.error("%s", exc)
                outcome.error = exc
        result = RunOutcome(out_dir, outcomes, cache_hits=cache.hits)
        if "compare" in stages:
            ok = [o for o in outcomes if o.error is None]
            try:
                with stage("compare", "*"):
                    result.verdicts = _compare(ok, run, studies, w)
            except StageError as exc:
                log.error("%s", exc)
                outcomes.append(VariantOutcome("*", error=exc))
        if "report" in stages:
            w.text("report.md", render_report(run, result, studies))
    result.written = w.written
    return result


def _run_variant(cfg: VariantConfig, cache: ExtractionCache, run: RunConfig, bounds,
                 stages: set, studies: set, jobs: int, w: _Writer, outcome: VariantOutcome):
    need_blame = "brooks" in studies or cfg["network"]["variant"] == "line_ownership"
    facts = analyze_variant(cache, cfg, bounds, need_blame=need_blame, jobs=jobs)
    outcome.facts = facts
    with stage("extract", cfg.name):
        _write_facts(facts, w)
    if "networks" in stages or "roles" in studies:
        with stage("roles", cfg.name):
            outcome.roles = run_roles(facts)
        with stage("networks", cfg.name):
            _write_networks(facts, outcome.roles, w)
        if "roles" in studies:
            with stage("roles", cfg.name):
                _write_roles(facts, outcome.roles, w)
    if "brooks" in studies:
        with stage("brooks", cfg.name):
            outcome.brooks = run_brooks(facts, cache, run.project)
            _write_brooks(facts, outcome.brooks, w)
    if "turnover" in studies:
        with stage("turnover", cfg.name):
            outcome.turnover = run_turnover(facts, cache, run, jobs)
            _write_turnover(facts, outcome.turnover, run, w)


def _write_facts(facts: VariantFacts, w: _Writer):
    cfg = facts.config
    d = f"facts/{cfg.name}"
    w.csv(f"{d}/commits.csv", COMMITS_HEADER, [c.row() for c in facts.commits], cfg)
    w.csv(f"{d}/file_changes.csv", FILE_CHANGES_HEADER,
          [ch.row() for c in facts.commits for ch in facts.stored_changes[c.hash]], cfg)
    w.csv(f"{d}/identities.csv", IDENTITIES_HEADER, facts.partition.rows(), cfg)
    w.csv(f"{d}/entity_changes.csv", ENTITY_CHANGES_HEADER,
          [e.row() for e in facts.entity_changes], cfg)
    w.csv(f"{d}/windows.csv", WINDOWS_HEADER, [win.row() for win in facts.windows], cfg)


def _write_networks(facts: VariantFacts, res: RolesResult, w: _Writer):
    cfg = facts.config
    d = f"networks/{cfg.name}"
    rows = []
    for k in sorted(res.networks):
        net = res.networks[k]
        w.csv(f"{d}/edges_w{k}.csv", EDGES_HEADER, net.edge_rows(), cfg)
        w.csv(f"{d}/adjacency_w{k}.csv", ADJACENCY_HEADER, net.adjacency_rows(), cfg)
        gm = res.graph[k]
        if gm is not None:
            rows.append((k, net.variant, gm.n_nodes, gm.n_edges, gm.density, gm.diameter,
                         gm.global_clustering, gm.mean_in_degree))
    w.csv(f"{d}/graph_metrics.csv", ("window", "variant", "n_nodes", "n_edges", "density",
                                     "diameter", "global_clustering", "mean_in_degree"), rows, cfg)


def _agreement_rows(matrix: dict) -> list[tuple]:
    return [matrix[k].row() for k in sorted(matrix) if k[0] < k[1]]


def _write_roles(facts: VariantFacts, res: RolesResult, w: _Writer):
    cfg = facts.config
    d = f"studies/{cfg.name}"
    w.csv(f"{d}/roles_agreement.csv", roles.ROLES_AGREEMENT_HEADER, _agreement_rows(res.recent), cfg)
    w.csv(f"{d}/roles_agreement_all.csv", roles.ROLES_AGREEMENT_HEADER,
          _agreement_rows(res.overall), cfg)
    hrows = [r.row() for k in sorted(res.embeddings) for r in res.embeddings[k].rows]
    w.csv(f"{d}/hierarchy.csv", roles.HIERARCHY_HEADER, hrows, cfg)
    w.csv(f"{d}/hierarchy_slopes.csv", ("window", "slope"),
          [(k, res.embeddings[k].slope) for k in sorted(res.embeddings)], cfg)
    pts = [(r.degree, r.clustering, r.role) for k in sorted(res.embeddings)
           for r in res.embeddings[k].rows]
    w.svg(f"{d}/hierarchy.svg", plots.hierarchy_scatter, pts,
          title=f"{cfg.name}: clustering vs degree", variant=cfg)


def _write_brooks(facts: VariantFacts, res: BrooksResult, w: _Writer):
    cfg = facts.config
    d = f"studies/{cfg.name}"
    w.csv(f"{d}/brooks_metrics.csv", brooks.BROOKS_METRICS_HEADER, [r.row() for r in res.rows], cfg)
    w.csv(f"{d}/brooks_models.csv", brooks.BROOKS_MODELS_HEADER,
          [row for m in res.models for row in m.rows()], cfg)
    if res.correlation is not None:
        cols, m = res.correlation
        w.csv(f"{d}/brooks_correlation.csv", ("metric", *cols),
              [(c, *[float(x) for x in m[i]]) for i, c in enumerate(cols)], cfg)
    else:
        w.csv(f"{d}/brooks_correlation.csv", ("metric", "error"),
              [("", res.correlation_error)], cfg)
    for target in brooks.TARGETS:
        curves = {}
        for m in res.models:
            if m.target == target and not m.controls and m.fit is not None:
                curves[m.form] = [t.coefficient for t in m.fit.terms]
        xs, ys = [], []
        for x, y in zip(res.table.get("team_size", []), res.table.get(target, [])):
            if x == x and y == y:
                xs.append(x)
                ys.append(y)
        w.svg(f"{d}/brooks_{target}.svg", plots.regression_chart, xs, ys, curves,
              title=f"{cfg.name}: {target} per member", ylabel=f"{target} (transformed)", variant=cfg)


def _write_turnover(facts: VariantFacts, res: TurnoverResult, run: RunConfig, w: _Writer):
    cfg = facts.config
    d = f"studies/{cfg.name}"
    w.csv(f"{d}/turnover_activity.csv", turnover.TURNOVER_ACTIVITY_HEADER, res.rows, cfg)
    w.csv(f"{d}/turnover_ci.csv", turnover.TURNOVER_CI_HEADER,
          [c.row(run.project, run.bootstrap_resamples, run.seed) for c in res.correlations], cfg)


def _study_summary(o: VariantOutcome, studies: set) -> dict:
    out: dict = {}
    base = baseline_counts(o.facts)
    out["baseline"] = {m: [base[k][m] for k in sorted(base)] for m in agreement.BASELINE_METRICS}
    if "roles" in studies and o.roles is not None:
        out["roles"] = {k: v.mean_kappa for k, v in o.roles.recent.items() if k[0] < k[1]}
    if "brooks" in studies and o.brooks is not None:
        out["brooks"] = {m.label: m.ts_coefficient for m in o.brooks.models}
    if "turnover" in studies and o.turnover is not None:
        out["turnover"] = {c.metric: c.significance for c in o.turnover.correlations}
    return out


def _compare(outcomes: list[VariantOutcome], run: RunConfig, studies: set, w: _Writer):
    configs = {o.name: o.facts.config.as_dict() for o in outcomes}
    series = {o.name: baseline_counts(o.facts) for o in outcomes}
    bounds = {o.name: [(x.start, x.end) for x in o.facts.windows] for o in outcomes}
    rows = agreement.baseline_series(series, bounds)
    w.csv("compare/baseline.csv", agreement.BASELINE_HEADER, rows)
    for metric in agreement.BASELINE_METRICS:
        per_variant = {o.name: [series[o.name][k][metric] for k in sorted(series[o.name])]
                       for o in outcomes}
        w.svg(f"compare/baseline_{metric}.svg", plots.series_chart, f"{metric} per window",
              per_variant, ylabel=metric)
    summaries = {o.name: _study_summary(o, studies) for o in outcomes}
    verdicts = agreement.conclusion_report(summaries, configs)
    w.csv("compare/verdicts.csv", agreement.VERDICTS_HEADER, [v.row() for v in verdicts])
    cross = []
    with_roles = [o for o in outcomes if o.roles is not None]
    if len(with_roles) >= 2:
        names = {o.name: o.facts.partition.display_names() for o in with_roles}
        for a, b in combinations(sorted(o.name for o in with_roles), 2):
            oa = next(o for o in with_roles if o.name == a)
            ob = next(o for o in with_roles if o.name == b)
            for metric in roles.METRICS:
                kappas, skipped = [], 0
                for k in sorted(set(oa.roles.classifications) & set(ob.roles.classifications)):
                    ca = oa.roles.classifications[k].get(metric)
                    cb = ob.roles.classifications[k].get(metric)
                    if ca is None or cb is None:
                        skipped += 1
                        continue
                    try:
                        kv = roles.cross_variant_agreement({a: ca, b: cb}, names)[(a, b)]
                    except ValueError:
                        kv = None
                    if kv is None:
                        skipped += 1
                    else:
                        kappas.append(kv)
                mean = sum(kappas) / len(kappas) if kappas else None
                cross.append((metric, a, b, "" if mean is None else round(mean, 12),
                              len(kappas), skipped))
    w.csv("compare/roles_cross_variant.csv",
          ("metric", "variant_a", "variant_b", "mean_kappa", "windows_used", "windows_skipped"), cross)
    return verdicts


def render_report(run: RunConfig, result: RunOutcome, studies: set) -> str:
    lines = [f"# repomine report: {run.project}", "",
             f"Tool: repomine {__version__}. Variants: {', '.join(v.name for v in result.variants)}.",
             f"Studies: {', '.join(sorted(studies)) or 'none'}. Seed {run.seed}, "
             f"{run.bootstrap_resamples} bootstrap resamples "
             "(percentile intervals, per-resample PCG64 streams).", "",
             "Core developers are the smallest top-ranked group holding the configured share "
             "of a metric (default 80%); this cutoff is a configuration choice, not a "
             "recovered original setting.", ""]
    for o in result.variants:
        lines.append(f"## Variant `{o.name}`")
        lines.append("")
        if o.error is not None:
            lines.append(f"Failed in stage `{o.error.stage}`: {o.error.cause}")
            lines.append("")
            continue
        f = o.facts
        lines.append(f"- commits: {len(f.commits)}; developers: {len(f.partition)}; "
                     f"entity change records: {len(f.entity_changes)}; windows: {len(f.windows)}")
        if f.windows:
            lines.append(f"- history: {iso(f.windows[0].start)} to {iso(f.windows[-1].end)}")
        lines.append("")
        if o.roles is not None and "roles" in studies:
            lines.append("### Core/peripheral agreement (most recent span)")
            lines.append("")
            lines.append("| metric pair | mean kappa | band | windows used |")
            lines.append("|---|---|---|---|")
            for k in sorted(o.roles.recent):
                if k[0] >= k[1]:
                    continue
                pa = o.roles.recent[k]
                band = kappa_band(pa.mean_kappa) if pa.mean_kappa is not None else "n/a"
                val = "n/a" if pa.mean_kappa is None else f"{pa.mean_kappa:.3f}"
                lines.append(f"| {k[0]} ~ {k[1]} | {val} | {band} | {pa.windows_used} |")
            lines.append("")
        if o.brooks is not None:
            lines.append("### Team size and productivity")
            lines.append("")
            lines.append(f"{len(o.brooks.rows)} windows with commits.")
            lines.append("")
            lines.append("| model | TS coefficient | r2 | n |")
            lines.append("|---|---|---|---|")
            for m in o.brooks.models:
                if m.fit is None:
                    lines.append(f"| {m.label} | n/a ({m.reason}) | | |")
                else:
                    lines.append(f"| {m.label} | {m.ts_coefficient:.3f} | {m.fit.r2:.3f} | {m.fit.n} |")
            lines.append("")
        if o.turnover is not None:
            lines.append("### Turnover and bug density")
            lines.append("")
            share = "n/a" if o.turnover.share is None else f"{o.turnover.share:.2f}"
            lines.append(f"Share of newcomers or leavers among active developer-interval "
                         f"pairs: {share}. LOC source: {o.turnover.loc_source}.")
            lines.append("")
            lines.append("| group | 95% CI | significance |")
            lines.append("|---|---|---|")
            for c in o.turnover.correlations:
                if c.ci is None:
                    lines.append(f"| {c.metric} | n/a | absent ({c.reason}) |")
                else:
                    lines.append(f"| {c.metric} | [{c.ci.lo:.3f}, {c.ci.hi:.3f}] | {c.significance} |")
            lines.append("")
    lines.append(agreement.render_report(result.verdicts, [v.name for v in result.variants]))
    lines.append("## Configuration")
    lines.append("")
    lines.append("```json")
    lines.append(run.metadata_line())
    lines.append("```")
    lines.append("")
    return "\n".join(lines)

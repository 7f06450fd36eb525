from __future__ import annotations

import os

import numpy as np
import pytest

from conftest import build_f3, f3_config
from repomine import agreement as ag
from repomine.config import load_config
from repomine.runner import execute
from repomine.studies.brooks import fit_models

CFG = {"a": {"extract": {"deny_patterns": []}}, "b": {"extract": {"deny_patterns": ["^docs/"]}},
       "c": {"extract": {"deny_patterns": []}}}


def test_trend_direction():
    assert ag.trend_direction([1, 2, 3, 4]) == ag.UP
    assert ag.trend_direction([5, 5, 5]) == ag.FLAT
    assert ag.trend_direction([9, 1, 7, 4, 2]) == ag.DOWN
    assert ag.trend_direction([100, 100.1, 100.2]) == ag.FLAT
    with pytest.raises(ValueError):
        ag.trend_direction([1, 2])
    with pytest.raises(ValueError):
        ag.trend_direction([1, 2, 3], k=2)
    # slope agrees with a direct least-squares fit on the tail
    tail = [3.0, 7.0, 4.0, 9.0]
    ref = np.polyfit(range(4), tail, 1)[0]
    assert ag.trend_slope([0.0] + tail, k=4) == pytest.approx(ref, abs=1e-12)


def test_late_side_branch_trend_conflict():
    single = {"commits": [4, 5, 3, 2, 1]}
    every = {"commits": [4, 5, 4, 6, 9]}
    v = ag.baseline_verdicts({"all": every, "single": single},
                             {"all": {"extract": {"branch_mode": "all_branches"}},
                              "single": {"extract": {"branch_mode": "single_branch"}}})
    assert [x.verdict for x in v] == [ag.CONFLICT]
    assert v[0].provenance == ("extract.branch_mode='all_branches'->'single_branch'",)


def test_baseline_series():
    rows = ag.baseline_series({"a": {0: {"commits": 2}}, "b": {0: {"commits": 2}, 1: {"commits": 1}}})
    assert ("a", 1, "commits", 0, 1) in rows and ("b", 1, "commits", 1, 0) in rows
    same = ag.baseline_series({"x": {0: {"commits": 3}}, "y": {0: {"commits": 3}}})
    assert [r[2:] for r in same if r[0] == "x"] == [r[2:] for r in same if r[0] == "y"]
    with pytest.raises(ag.MisalignedWindows):
        ag.baseline_series({"a": {}, "b": {}}, {"a": [(0, 10)], "b": [(0, 11)]})


def test_role_band_rules():
    m = {"a": {("commits", "loc"): 0.85}, "b": {("commits", "loc"): 0.7},
         "c": {("commits", "loc"): 0.3}}
    cfg = {n: {"identity": {"threshold": t}} for n, t in (("a", 0), ("b", 1), ("c", 2))}
    v = {x.variant_pair: x for x in ag.role_verdicts(m, cfg)}
    assert v[("a", "b")].verdict == ag.DIFFER and v[("a", "b")].provenance == ()  # one band apart
    assert v[("b", "c")].verdict == ag.CONFLICT  # two bands apart
    assert v[("a", "c")].provenance == ("identity.threshold=0->2",)


def test_conflict_needs_flags():
    with pytest.raises(AssertionError):
        ag.turnover_verdicts({"a": {"ENA": "positive"}, "c": {"ENA": "none"}}, CFG)


def test_symmetric_and_reflexive():
    out_a = {"brooks": {"commits~TS": -0.4}, "turnover": {"ENA": "positive"},
             "roles": {("commits", "loc"): 0.6}, "baseline": {"commits": [1, 2, 3]}}
    out_b = {"brooks": {"commits~TS": 0.2}, "turnover": {"ENA": "none"},
             "roles": {("commits", "loc"): 0.1}, "baseline": {"commits": [3, 2, 1]}}
    fwd = ag.conclusion_report({"a": out_a, "b": out_b}, CFG)
    swapped = ag.conclusion_report({"a": out_b, "b": out_a},
                                   {"a": CFG["b"], "b": CFG["a"]})
    assert [x.verdict for x in fwd] == [x.verdict for x in swapped]
    assert all(x.verdict == ag.CONFLICT for x in fwd)
    self_cmp = ag.conclusion_report({"a": out_a, "c": out_a}, CFG)
    assert self_cmp and all(x.verdict == ag.AGREE for x in self_cmp)


def test_three_variants_three_pairs():
    outs = {n: {"turnover": {"ENA": "positive"}} for n in ("a", "b", "c")}
    v = ag.conclusion_report(outs, CFG)
    assert sorted(x.variant_pair for x in v) == [("a", "b"), ("a", "c"), ("b", "c")]


def test_brooks_planted_negative_agrees():
    coefs = {}
    rng = np.random.default_rng(4)
    for name, scale in (("a", 1.0), ("b", 1.3)):
        ts = rng.uniform(0, 3, size=40)
        y = scale * (4.84 - 0.45 * ts) + rng.normal(0, 0.05, size=40)
        coefs[name] = {m.label: m.ts_coefficient for m in fit_models(
            {"team_size": list(ts), "commits": list(y)}, targets=("commits",), forms=("linear",))}
    v = ag.brooks_verdicts(coefs, CFG)
    assert all(c < 0 for d in coefs.values() for c in d.values())
    assert [x.verdict for x in v] == [ag.AGREE]


# -- fixture F3 ---------------------------------------------------------------

def _ranks(v):
    order = sorted(range(len(v)), key=lambda i: v[i])
    r = [0.0] * len(v)
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
            j += 1
        for k in range(i, j + 1):
            r[order[k]] = (i + j) / 2 + 1
        i = j + 1
    return r


def _brute_spearman(x, y):
    rx, ry = _ranks(x), _ranks(y)
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    sxy = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    sxx = sum((a - mx) ** 2 for a in rx)
    syy = sum((b - my) ** 2 for b in ry)
    return None if sxx == 0 or syy == 0 else sxy / (sxx * syy) ** 0.5


def brute_bootstrap(pairs, B, seed):
    """Percentile interval from an independent loop over the same per-resample index streams."""
    n = len(pairs)
    vals = []
    for i in range(B):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, i])))
        idx = rng.integers(0, n, size=n)
        r = _brute_spearman([pairs[k][0] for k in idx], [pairs[k][1] for k in idx])
        if r is not None:
            vals.append(r)
    vals.sort()

    def q(p):
        h = (len(vals) - 1) * p
        lo = int(h)
        return vals[lo] + (h - lo) * (vals[min(lo + 1, len(vals) - 1)] - vals[lo])
    return q(0.025), q(0.975)


def run_f3(tmp_path, flip=True):
    build_f3(tmp_path)
    run = load_config(f3_config(tmp_path, flip))
    return run, execute(run, os.path.join(tmp_path, "out"), "compare")


def f3_observations(outcome):
    obs = []
    for row in outcome.turnover.rows:
        if row[-1] is not None:
            obs.append((float(row[3]), float(row[-1])))  # ENA, density
    return obs


def test_f3_doc_filter_flips_one_conclusion(tmp_path):
    run, result = run_f3(tmp_path)
    conflicts = [v for v in result.verdicts if v.verdict == ag.CONFLICT]
    assert len(conflicts) == 1
    assert conflicts[0].subject == ag.TURNOVER_SIGNIFICANCE
    assert any(f.startswith("extract.deny_patterns") for f in conflicts[0].provenance)
    labels = {}
    for o in result.variants:
        (ena,) = [c for c in o.turnover.correlations if c.metric == "ENA"]
        lo, hi = brute_bootstrap(f3_observations(o), run.bootstrap_resamples, run.seed)
        assert (ena.ci.lo, ena.ci.hi) == pytest.approx((lo, hi), abs=1e-12)
        labels[o.name] = ena.significance
    assert labels == {"no_docs": "positive", "with_docs": "none"}


def test_f3_identical_configs_no_conflict(tmp_path):
    _, result = run_f3(tmp_path, flip=False)
    assert result.verdicts and not any(v.verdict == ag.CONFLICT for v in result.verdicts)

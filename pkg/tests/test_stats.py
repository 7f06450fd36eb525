from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repomine.stats import (ConfidenceInterval, RankDeficientError, UndefinedStatistic,
                            average_ranks, bootstrap_ci, cohen_kappa, kappa_band, ols, pearson,
                            significance, spearman)


def test_pearson_examples():
    x = [1.0, 2.0, 3.0, 5.0]
    assert pearson(x, [2 * v for v in x]) == 1.0
    assert pearson(x, [-v for v in x]) == -1.0
    with pytest.raises(UndefinedStatistic):
        pearson(x, [3.0] * 4)


def test_spearman_examples():
    assert spearman([1, 2, 3, 4], [2, 5, 9, 11]) == 1.0
    assert list(average_ranks([1, 2, 2, 3])) == [1, 2.5, 2.5, 4]
    expected = pearson([1, 2.5, 2.5, 4], [1, 2, 3, 4])
    assert spearman([1, 2, 2, 3], [1, 2, 3, 4]) == pytest.approx(expected, abs=1e-15)
    assert spearman([1, 2, 3, 4], [4, 3, 2, 1]) == -1.0
    with pytest.raises(UndefinedStatistic):
        spearman([1, 1, 1], [1, 2, 3])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(-100, 100), st.integers(-100, 100)), min_size=3, max_size=15))
def test_spearman_monotone_invariance(pairs):
    x = [p[0] for p in pairs]
    y = [p[1] for p in pairs]
    try:
        base = spearman(x, y)
    except UndefinedStatistic:
        return
    assert spearman([math.exp(v / 10) * 7 + 3 for v in x], y) == pytest.approx(base, abs=1e-12)
    assert spearman(x, [v ** 3 for v in y]) == pytest.approx(base, abs=1e-12)


def test_kappa_examples():
    assert cohen_kappa([1, 0, 1, 1], [1, 0, 1, 1]) == 1.0
    assert cohen_kappa([1, 1, 0, 0], [1, 0, 1, 0]) == 0.0
    assert cohen_kappa([1, 0, 1, 0], [0, 1, 0, 1]) == -1.0
    with pytest.raises(UndefinedStatistic):
        cohen_kappa([1, 1], [1, 1])


def contingency_kappa(a, b):
    n = len(a)
    n11 = sum(1 for u, v in zip(a, b) if u and v)
    n00 = sum(1 for u, v in zip(a, b) if not u and not v)
    n10 = sum(1 for u, v in zip(a, b) if u and not v)
    n01 = n - n11 - n00 - n10
    po = (n11 + n00) / n
    pe = ((n11 + n10) * (n11 + n01) + (n00 + n01) * (n00 + n10)) / (n * n)
    return None if pe == 1 else (po - pe) / (1 - pe)


def kappa_oracle_max_error(max_len: int = 8) -> tuple[float, int]:
    worst, checked = 0.0, 0
    for n in range(1, max_len + 1):
        vectors = list(itertools.product((0, 1), repeat=n))
        for a in vectors:
            for b in vectors:
                ref = contingency_kappa(a, b)
                if ref is None:
                    with pytest.raises(UndefinedStatistic):
                        cohen_kappa(a, b)
                    continue
                worst = max(worst, abs(cohen_kappa(a, b) - ref))
                checked += 1
    return worst, checked


def test_kappa_exhaustive_oracle():
    worst, checked = kappa_oracle_max_error()
    assert checked > 80_000 and worst < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("xyz"), st.sampled_from("xyz")), min_size=1, max_size=12))
def test_kappa_symmetric_and_reflexive(pairs):
    a = [p[0] for p in pairs]
    b = [p[1] for p in pairs]
    try:
        assert cohen_kappa(a, b) == pytest.approx(cohen_kappa(b, a), abs=1e-15)
    except UndefinedStatistic:
        pass
    if len(set(a)) >= 2:
        assert cohen_kappa(a, a) == 1.0


@pytest.mark.parametrize("k,band", [(0.27, "fair"), (0.82, "almost perfect"), (-0.1, "poor"),
                                    (0.0, "slight"), (0.2, "slight"), (0.205, "fair"),
                                    (0.4, "fair"), (0.41, "moderate"), (0.6, "moderate"),
                                    (0.61, "substantial"), (0.8, "substantial"),
                                    (0.805, "almost perfect"), (1.0, "almost perfect")])
def test_kappa_bands(k, band):
    assert kappa_band(k) == band


def test_ols_exact():
    xs = [0.0, 1.0, 2.0, 3.0, 4.0]
    fit = ols([[1, x] for x in xs], [2 * x + 1 for x in xs], ["(IC)", "x"])
    assert fit.coef("(IC)") == pytest.approx(1, abs=1e-12) and fit.coef("x") == pytest.approx(2, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0)
    q = ols([[1, x, x * x] for x in xs], [1 - x + 0.5 * x * x for x in xs])
    assert [t.coefficient for t in q.terms] == pytest.approx([1, -1, 0.5], abs=1e-10)
    with pytest.raises(ValueError):
        ols([[1, 0], [1, 1]], [0, 1])
    with pytest.raises(RankDeficientError):
        ols([[1, 2], [1, 2], [1, 2]], [0, 1, 2])


def normal_equation_fit(X, y):
    X, y = np.asarray(X, float), np.asarray(y, float)
    xtx_inv = np.linalg.inv(X.T @ X)
    beta = xtx_inv @ X.T @ y
    resid = y - X @ beta
    sigma2 = resid @ resid / (len(y) - X.shape[1])
    return beta, np.sqrt(np.diag(sigma2 * xtx_inv))


def test_ols_matches_normal_equations():
    X = [[1, 0.5, 2.0], [1, 1.5, 1.0], [1, 2.5, 3.5], [1, 3.0, 0.5], [1, 4.5, 2.5]]
    y = [1.2, 2.9, 4.1, 4.4, 7.3]
    fit = ols(X, y)
    beta, se = normal_equation_fit(X, y)
    assert [t.coefficient for t in fit.terms] == pytest.approx(list(beta), abs=1e-9)
    assert [t.standard_error for t in fit.terms] == pytest.approx(list(se), abs=1e-9)
    resid = np.asarray(fit.residuals)
    for col in np.asarray(X, float).T:
        assert abs(col @ resid) < 1e-8
    assert fit.adj_r2 <= fit.r2


def test_bootstrap_examples():
    pairs = [(i, i * i) for i in range(20)]
    ci = bootstrap_ci(pairs, B=500, seed=3)
    assert (ci.lo, ci.hi) == (1.0, 1.0)
    assert bootstrap_ci(pairs, B=500, seed=3) == ci
    with pytest.raises(ValueError):
        bootstrap_ci(pairs, B=0)
    with pytest.raises(ValueError):
        bootstrap_ci(pairs[:2], B=10)


def test_bootstrap_jobs_independent():
    rng = np.random.default_rng(1)
    pairs = list(zip(rng.normal(size=30), rng.normal(size=30)))
    assert bootstrap_ci(pairs, B=400, seed=9, jobs=1) == bootstrap_ci(pairs, B=400, seed=9, jobs=8)


def test_bootstrap_skips_undefined():
    pairs = [(0, 0)] * 8 + [(1, 1), (2, 2)]
    ci = bootstrap_ci(pairs, B=200, seed=1)
    assert ci.skipped > 0 and ci.lo == ci.hi == 1.0


def test_bootstrap_widens_with_smaller_samples():
    widths = {}
    for n in (10, 40):
        total = 0.0
        for s in range(100):
            rng = np.random.default_rng(s)
            x = rng.normal(size=n)
            y = 0.5 * x + rng.normal(size=n)
            ci = bootstrap_ci(list(zip(x, y)), B=100, seed=s)
            total += ci.hi - ci.lo
        widths[n] = total / 100
    assert widths[10] > widths[40]


@pytest.mark.parametrize("lo,hi,label", [(0.2, 0.6, "positive"), (-0.3, 0.4, "none"),
                                         (-0.6, -0.1, "negative"), (0.0, 0.5, "none")])
def test_significance(lo, hi, label):
    assert significance(ConfidenceInterval(lo, hi, 0.95, 10, 0)) == label

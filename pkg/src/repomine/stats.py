"""Correlation, agreement, least squares and bootstrap intervals."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

GENERATOR_ID = "numpy.random.PCG64 seeded per resample by SeedSequence([seed, index])"

POSITIVE = "positive"
NEGATIVE = "negative"
NONE = "none"


class UndefinedStatistic(ValueError):
    """The statistic has no value for this input (zero variance, single class)."""


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson needs two equal-length vectors")
    if len(x) < 2:
        raise ValueError("pearson needs at least two observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedStatistic("correlation undefined for constant input")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def average_ranks(x: Sequence[float]) -> np.ndarray:
    """1-based ranks; ties share the mean of the ranks they span."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sx = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    if len(x) != len(y):
        raise ValueError("spearman needs two equal-length vectors")
    return pearson(average_ranks(x), average_ranks(y))


def cohen_kappa(a: Sequence, b: Sequence) -> float:
    if len(a) != len(b):
        raise ValueError("kappa needs two equal-length label vectors")
    n = len(a)
    if n == 0:
        raise ValueError("kappa needs at least one item")
    labels = sorted(set(a) | set(b), key=repr)
    po = sum(1 for u, v in zip(a, b) if u == v) / n
    pe = sum((list(a).count(c) / n) * (list(b).count(c) / n) for c in labels)
    if pe >= 1.0:
        raise UndefinedStatistic("kappa undefined when expected agreement is 1")
    return (po - pe) / (1.0 - pe)


KAPPA_BANDS = ("poor", "slight", "fair", "moderate", "substantial", "almost perfect")


def kappa_band(kappa: float) -> str:
    """Landis–Koch style band; values between published bounds go to the upper band."""
    if kappa > 1.0 + 1e-12:
        raise ValueError("kappa cannot exceed 1")
    if kappa < 0:
        return "poor"
    if kappa <= 0.20:
        return "slight"
    if kappa <= 0.40:
        return "fair"
    if kappa <= 0.60:
        return "moderate"
    if kappa <= 0.80:
        return "substantial"
    return "almost perfect"


def band_index(label: str) -> int:
    return KAPPA_BANDS.index(label)


@dataclass(frozen=True)
class Term:
    name: str
    coefficient: float
    standard_error: float


@dataclass(frozen=True)
class ModelFit:
    terms: tuple[Term, ...]
    r2: float
    adj_r2: float
    n: int
    fitted: tuple[float, ...] = field(default=(), repr=False)
    residuals: tuple[float, ...] = field(default=(), repr=False)

    def coef(self, name: str) -> float:
        return self.term(name).coefficient

    def se(self, name: str) -> float:
        return self.term(name).standard_error

    def term(self, name: str) -> Term:
        for t in self.terms:
            if t.name == name:
                return t
        raise KeyError(name)


class RankDeficientError(ValueError):
    pass


def ols(design: Sequence[Sequence[float]], y: Sequence[float],
        names: Optional[Sequence[str]] = None) -> ModelFit:
    """Least squares via QR. ``design`` must already contain the intercept column."""
    X = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("design rows must match the response length")
    n, p = X.shape
    if n <= p:
        raise ValueError(f"need more observations than terms (n={n}, p={p})")
    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-10 * max(diag.max(), 1.0):
        raise RankDeficientError("design matrix is rank deficient")
    beta = np.linalg.solve(r, q.T @ y)
    fitted = X @ beta
    resid = y - fitted
    rss = float(resid @ resid)
    sigma2 = rss / (n - p)
    rinv = np.linalg.solve(r, np.eye(p))
    cov = sigma2 * (rinv @ rinv.T)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    dy = y - y.mean()
    tss = float(dy @ dy)
    has_intercept = bool(np.any(np.all(X == 1.0, axis=0)))
    if tss == 0.0:
        r2 = 1.0 if rss == 0.0 else 0.0
    else:
        r2 = 1.0 - rss / tss if has_intercept else 1.0 - rss / float(y @ y)
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - p) if has_intercept else 1.0 - (1.0 - r2) * n / (n - p)
    names = list(names) if names is not None else [f"x{k}" for k in range(p)]
    terms = tuple(Term(nm, float(b), float(s)) for nm, b, s in zip(names, beta, se))
    return ModelFit(terms, float(r2), float(min(adj, r2)), n, tuple(map(float, fitted)),
                    tuple(map(float, resid)))


@dataclass(frozen=True)
class ConfidenceInterval:
    lo: float
    hi: float
    level: float
    b_resamples: int
    seed: int
    skipped: int = 0
    generator: str = GENERATOR_ID

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("interval lower bound exceeds upper bound")


def _resample_indices(n: int, seed: int, index: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))
    return rng.integers(0, n, size=n)


def bootstrap_ci(pairs: Sequence[tuple[float, float]], statistic: Callable = spearman,
                 B: int = 2000, seed: int = 0, level: float = 0.95, jobs: int = 1
                 ) -> ConfidenceInterval:
    """Percentile bootstrap interval over with-replacement resamples of pairs.

    Resample ``i`` draws from its own generator keyed by ``(seed, i)``, so the
    result does not depend on ``jobs``. Resamples where the statistic is
    undefined are skipped and counted.
    """
    if B < 1:
        raise ValueError("bootstrap needs at least one resample")
    data = np.asarray(pairs, dtype=float)
    if data.ndim != 2 or data.shape[0] < 3:
        raise ValueError("bootstrap needs at least three pairs")
    n = data.shape[0]

    def one(i: int) -> Optional[float]:
        idx = _resample_indices(n, seed, i)
        try:
            return statistic(data[idx, 0], data[idx, 1])
        except UndefinedStatistic:
            return None

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            values = list(pool.map(one, range(B)))
    else:
        values = [one(i) for i in range(B)]
    kept = np.array([v for v in values if v is not None])
    skipped = B - len(kept)
    if len(kept) == 0:
        raise UndefinedStatistic("statistic undefined on every resample")
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(kept, [alpha, 1.0 - alpha])
    return ConfidenceInterval(float(lo), float(hi), level, B, seed, skipped)


def significance(ci: ConfidenceInterval) -> str:
    if ci.lo > 0:
        return POSITIVE
    if ci.hi < 0:
        return NEGATIVE
    return NONE

"""Cross-variant comparison of baseline series and study conclusions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Any, Mapping, Optional, Sequence

from .stats import band_index, kappa_band, ols

AGREE = "agree"
DIFFER = "differ"
CONFLICT = "conflict"

UP = "up"
DOWN = "down"
FLAT = "flat"

BASELINE_COUNTS = "baseline_counts"
ROLE_CLASSIFICATION = "role_classification"
BROOKS_SIGN = "brooks_sign"
TURNOVER_SIGNIFICANCE = "turnover_significance"

BASELINE_METRICS = ("commits", "files", "developers", "entity_blocks")
BASELINE_HEADER = ("variant", "window", "metric", "value", "absent")
VERDICTS_HEADER = ("subject", "variant_a", "variant_b", "verdict", "detail")


class MisalignedWindows(ValueError):
    pass


@dataclass(frozen=True)
class AgreementVerdict:
    subject: str
    variant_pair: tuple[str, str]
    verdict: str
    detail: str
    provenance: tuple[str, ...] = ()

    def row(self) -> tuple:
        detail = self.detail
        if self.provenance:
            detail += " | flags: " + ", ".join(self.provenance)
        return (self.subject, self.variant_pair[0], self.variant_pair[1], self.verdict, detail)


def baseline_series(variant_outputs: Mapping[str, Mapping[int, Mapping[str, int]]],
                    windows: Mapping[str, Sequence[tuple[int, int]]] | None = None
                    ) -> list[tuple]:
    """Long table (variant, window, metric, value, absent) over the union of windows.

    ``windows`` maps each variant to its (start, end) boundaries; differing
    boundaries are an error.
    """
    if windows:
        bounds = {tuple(map(tuple, w)) for w in windows.values()}
        if len(bounds) > 1:
            shortest = min(len(b) for b in bounds)
            if len({b[:shortest] for b in bounds}) > 1:
                raise MisalignedWindows("variants do not share window boundaries")
    all_windows = sorted({w for out in variant_outputs.values() for w in out})
    rows = []
    for variant in sorted(variant_outputs):
        out = variant_outputs[variant]
        for w in all_windows:
            for metric in BASELINE_METRICS:
                if w in out and metric in out[w]:
                    rows.append((variant, w, metric, out[w][metric], 0))
                else:
                    rows.append((variant, w, metric, 0, 1))
    return rows


def trend_slope(series: Sequence[float], k: int = 3) -> float:
    if k < 3:
        raise ValueError("trend needs k >= 3")
    if len(series) < k:
        raise ValueError(f"trend needs at least {k} windows, got {len(series)}")
    tail = [float(v) for v in series[-k:]]
    if max(tail) == min(tail):
        return 0.0
    fit = ols([[1.0, float(i)] for i in range(k)], tail)
    return fit.terms[1].coefficient


def trend_direction(series: Sequence[float], k: int = 3, eps: float = 0.01) -> str:
    slope = trend_slope(series, k)
    tail = series[-k:]
    scale = abs(sum(tail) / k)
    if abs(slope) < eps * scale or slope == 0.0:
        return FLAT
    return UP if slope > 0 else DOWN


def _pairs(names: Sequence[str]):
    return list(combinations(sorted(names), 2))


def differing_flags(configs: Mapping[str, Mapping[str, Any]], a: str, b: str) -> tuple[str, ...]:
    ca, cb = _flatten(configs.get(a, {})), _flatten(configs.get(b, {}))
    keys = sorted((set(ca) | set(cb)) - {"name"})
    return tuple(f"{k}={ca.get(k)!r}->{cb.get(k)!r}" for k in keys if ca.get(k) != cb.get(k))


def _flatten(d: Mapping[str, Any], prefix: str = "") -> dict[str, Any]:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, Mapping):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = tuple(v) if isinstance(v, list) else v
    return out


def _verdict(subject, pair, verdict, detail, flags) -> AgreementVerdict:
    if verdict == CONFLICT and not flags:
        # identical configurations produce identical outputs; a conflict here is a bug
        raise AssertionError(f"{subject}: conflict between identically configured variants")
    return AgreementVerdict(subject, pair, verdict, detail, flags if verdict == CONFLICT else ())


def baseline_verdicts(series: Mapping[str, Mapping[str, Sequence[float]]], configs, k: int = 3
                      ) -> list[AgreementVerdict]:
    """series[variant][metric] -> per-window values."""
    out = []
    for a, b in _pairs(list(series)):
        flags = differing_flags(configs, a, b)
        for metric in BASELINE_METRICS:
            sa, sb = series[a].get(metric), series[b].get(metric)
            if sa is None or sb is None:
                continue
            delta = sum(abs(x - y) for x, y in zip(sa, sb)) + abs(len(sa) - len(sb))
            try:
                ta, tb = trend_direction(sa, k), trend_direction(sb, k)
            except ValueError:
                ta = tb = None
            if ta and tb and {ta, tb} == {UP, DOWN}:
                verdict = CONFLICT
            elif delta:
                verdict = DIFFER
            else:
                verdict = AGREE
            detail = f"{metric}: total abs delta {_num(delta)}; trend {ta or 'n/a'} vs {tb or 'n/a'}"
            out.append(_verdict(BASELINE_COUNTS, (a, b), verdict, detail, flags))
    return out


def role_verdicts(matrices: Mapping[str, Mapping[tuple[str, str], Optional[float]]], configs
                  ) -> list[AgreementVerdict]:
    """matrices[variant][(metric_a, metric_b)] -> mean kappa (one entry per unordered pair)."""
    out = []
    for a, b in _pairs(list(matrices)):
        flags = differing_flags(configs, a, b)
        keys = sorted(set(matrices[a]) & set(matrices[b]))
        for key in keys:
            if key[0] >= key[1]:
                continue
            ka, kb = matrices[a][key], matrices[b][key]
            label = f"{key[0]}~{key[1]}"
            if ka is None or kb is None:
                verdict = AGREE if ka is None and kb is None else DIFFER
                out.append(_verdict(ROLE_CLASSIFICATION, (a, b), verdict,
                                    f"{label}: kappa {_k(ka)} vs {_k(kb)}", flags))
                continue
            steps = abs(band_index(kappa_band(ka)) - band_index(kappa_band(kb)))
            verdict = AGREE if steps == 0 else (DIFFER if steps == 1 else CONFLICT)
            detail = (f"{label}: kappa {_k(ka)} ({kappa_band(ka)}) vs {_k(kb)} ({kappa_band(kb)}); "
                      f"delta {_num(round(kb - ka, 6))}")
            out.append(_verdict(ROLE_CLASSIFICATION, (a, b), verdict, detail, flags))
    return out


def _sign(x: Optional[float]) -> Optional[int]:
    if x is None or math.isnan(x):
        return None
    return (x > 0) - (x < 0)


def brooks_verdicts(coefs: Mapping[str, Mapping[str, Optional[float]]], configs
                    ) -> list[AgreementVerdict]:
    """coefs[variant][model label] -> TS coefficient."""
    out = []
    for a, b in _pairs(list(coefs)):
        flags = differing_flags(configs, a, b)
        for label in sorted(set(coefs[a]) | set(coefs[b])):
            ca, cb = coefs[a].get(label), coefs[b].get(label)
            sa, sb = _sign(ca), _sign(cb)
            if sa is None or sb is None:
                verdict = AGREE if sa is None and sb is None else DIFFER
            elif sa * sb < 0:
                verdict = CONFLICT
            else:
                verdict = AGREE
            delta = "n/a" if sa is None or sb is None else _num(round(cb - ca, 6))
            out.append(_verdict(BROOKS_SIGN, (a, b), verdict,
                                f"{label}: TS {_k(ca)} vs {_k(cb)}; delta {delta}", flags))
    return out


def turnover_verdicts(labels: Mapping[str, Mapping[str, Optional[str]]], configs
                      ) -> list[AgreementVerdict]:
    """labels[variant][metric] -> significance label, None when absent."""
    out = []
    for a, b in _pairs(list(labels)):
        flags = differing_flags(configs, a, b)
        for metric in sorted(set(labels[a]) | set(labels[b])):
            la, lb = labels[a].get(metric), labels[b].get(metric)
            if la == lb:
                verdict = AGREE
            elif la is None or lb is None:
                verdict = DIFFER
            else:
                verdict = CONFLICT
            out.append(_verdict(TURNOVER_SIGNIFICANCE, (a, b), verdict,
                                f"{metric}: {la or 'absent'} vs {lb or 'absent'}", flags))
    return out


def conclusion_report(study_outputs: Mapping[str, Mapping[str, Any]],
                      configs: Mapping[str, Mapping[str, Any]]) -> list[AgreementVerdict]:
    """Verdicts for every study present in at least two variants.

    ``study_outputs[variant]`` may hold ``baseline`` (metric -> series),
    ``roles`` (pair -> mean kappa), ``brooks`` (model label -> TS coefficient)
    and ``turnover`` (metric -> significance label).
    """
    out: list[AgreementVerdict] = []
    for key, fn in (("baseline", baseline_verdicts), ("roles", role_verdicts),
                    ("brooks", brooks_verdicts), ("turnover", turnover_verdicts)):
        present = {v: o[key] for v, o in study_outputs.items() if o.get(key) is not None}
        if len(present) >= 2:
            out.extend(fn(present, configs))
    return out


def render_report(verdicts: Sequence[AgreementVerdict], variants: Sequence[str]) -> str:
    lines = ["## Conclusion stability", ""]
    subjects = [BASELINE_COUNTS, ROLE_CLASSIFICATION, BROOKS_SIGN, TURNOVER_SIGNIFICANCE]
    for subject in subjects:
        sel = [v for v in verdicts if v.subject == subject]
        if not sel:
            continue
        counts = {x: sum(1 for v in sel if v.verdict == x) for x in (AGREE, DIFFER, CONFLICT)}
        lines.append(f"### {subject}")
        lines.append("")
        lines.append(f"> agree {counts[AGREE]}, differ {counts[DIFFER]}, conflict {counts[CONFLICT]}")
        lines.append("")
        for v in sel:
            if v.verdict == CONFLICT:
                lines.append(f"- **conflict** {v.variant_pair[0]} vs {v.variant_pair[1]}: {v.detail}")
                lines.append(f"  - diverging flags: {', '.join(v.provenance)}")
        lines.append("")
    if len(lines) == 2:
        lines.append(f"Fewer than two variants ran a study ({', '.join(variants)}); nothing to compare.")
        lines.append("")
    return "\n".join(lines)


def _k(x: Optional[float]) -> str:
    return "n/a" if x is None else f"{x:.3f}"


def _num(x):
    return int(x) if float(x).is_integer() else x

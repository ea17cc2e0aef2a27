"""Aggregate stage scores: per-environment means, deltas, and Welch's ANOVA."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

from .evaluation import EvalRecord
from .noise import NoiseLevel

logger = logging.getLogger(__name__)

STAGES = ("ts", "pi", "cf")
STAGE_LABELS = {"ts": "Tool Selection", "pi": "Parameter Identification", "cf": "Content Filling"}
LEVEL_ORDER = [
    NoiseLevel.CLEAN,
    NoiseLevel.SLIGHT,
    NoiseLevel.MEDIUM,
    NoiseLevel.HEAVY,
    NoiseLevel.UNION,
]


class DegenerateVarianceError(ValueError):
    """A zero-variance group makes the Welch weights undefined."""

    def __init__(self, label: str):
        self.label = label
        super().__init__(f"group {label!r} has zero variance")


@dataclass(frozen=True)
class ScoreGroup:
    label: str
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))


@dataclass(frozen=True)
class AnovaResult:
    f_statistic: float
    p_value: float
    df1: float
    df2: float


def _stage_value(record: EvalRecord, stage: str) -> int:
    return getattr(record.scores, f"s_{stage}")


def stage_means(records: Sequence[EvalRecord]) -> dict[tuple[str, str], float]:
    """Mean score per (level, stage), as a percentage rounded to 2 decimals."""
    groups: dict[tuple[str, str], list[int]] = defaultdict(list)
    for r in records:
        for stage in STAGES:
            groups[(r.level.value, stage)].append(_stage_value(r, stage))
    return {key: round(100.0 * sum(vals) / len(vals), 2) for key, vals in groups.items()}


def scenario_means(records: Sequence[EvalRecord]) -> dict[tuple[str, str, str], float]:
    """Mean score per (scenario, level, stage), as percentages."""
    groups: dict[tuple[str, str, str], list[int]] = defaultdict(list)
    for r in records:
        for stage in STAGES:
            groups[(r.scenario, r.level.value, stage)].append(_stage_value(r, stage))
    return {key: round(100.0 * sum(vals) / len(vals), 2) for key, vals in groups.items()}


def score_groups(records: Sequence[EvalRecord], stage: str = "cf") -> list[ScoreGroup]:
    """Per-level 0/1 score groups for the chosen stage, in canonical order."""
    by_level: dict[str, list[float]] = defaultdict(list)
    for r in records:
        by_level[r.level.value].append(float(_stage_value(r, stage)))
    out = []
    for level in LEVEL_ORDER:
        if level.value in by_level:
            out.append(ScoreGroup(level.value, tuple(by_level[level.value])))
    return out


# ---------------------------------------------------------------------------
# Regularized incomplete beta via continued fraction (Lentz's method), used
# for the F-distribution upper tail.
# ---------------------------------------------------------------------------

_MAX_ITER = 500
_EPS = 1e-14
_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def betainc_regularized(a: float, b: float, x: float) -> float:
    """I_x(a, b), the regularized incomplete beta function."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_bt = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def f_upper_tail(f: float, df1: float, df2: float) -> float:
    """P(F >= f) for an F distribution with (df1, df2) degrees of freedom."""
    if f <= 0:
        return 1.0
    if math.isinf(df2):
        df2 = 1e12  # large-df2 approximation of the chi-square limit
    x = df2 / (df2 + df1 * f)
    return betainc_regularized(df2 / 2.0, df1 / 2.0, x)


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def _variance(values: Sequence[float]) -> float:
    # Sample variance (n-1 denominator).
    m = _mean(values)
    return sum((v - m) ** 2 for v in values) / (len(values) - 1)


def welch_anova(groups: Sequence[ScoreGroup]) -> AnovaResult:
    """Welch's unequal-variance one-way ANOVA.

    Groups that are all constant with equal means return the degenerate
    (F=0, p=1) limit; a zero-variance group alongside variation elsewhere is
    an error because its weight would be infinite.
    """
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    for g in groups:
        if len(g.values) < 2:
            raise ValueError(f"group {g.label!r} needs at least two values")

    k = len(groups)
    means = [_mean(g.values) for g in groups]
    variances = [_variance(g.values) for g in groups]

    if all(v == 0.0 for v in variances):
        if len(set(means)) == 1:
            return AnovaResult(0.0, 1.0, float(k - 1), math.inf)
        raise DegenerateVarianceError(groups[0].label)
    for g, v in zip(groups, variances):
        if v == 0.0:
            raise DegenerateVarianceError(g.label)

    ns = [len(g.values) for g in groups]
    weights = [n / v for n, v in zip(ns, variances)]
    w_total = sum(weights)
    grand = sum(w * m for w, m in zip(weights, means)) / w_total
    numerator = sum(w * (m - grand) ** 2 for w, m in zip(weights, means)) / (k - 1)
    s = sum((1.0 - w / w_total) ** 2 / (n - 1) for w, n in zip(weights, ns))
    denominator = 1.0 + 2.0 * (k - 2) / (k * k - 1.0) * s
    f = numerator / denominator
    df1 = float(k - 1)
    df2 = (k * k - 1.0) / (3.0 * s)
    return AnovaResult(f, f_upper_tail(f, df1, df2), df1, df2)


def delta_vs_clean(
    means: Mapping[tuple[str, str], float]
) -> dict[tuple[str, str], float]:
    """Absolute difference between each level's mean and the Clean mean, per stage."""
    out: dict[tuple[str, str], float] = {}
    for stage in STAGES:
        clean_key = (NoiseLevel.CLEAN.value, stage)
        if clean_key not in means:
            raise ValueError("Clean level missing from means")
        for (level, st), value in means.items():
            if st == stage:
                out[(level, stage)] = round(abs(value - means[clean_key]), 2)
    return out


def extreme_difference(values: Iterable[float]) -> float:
    """Max minus min of per-level means."""
    vals = list(values)
    if len(vals) < 2:
        raise ValueError("need at least two values")
    return round(max(vals) - min(vals), 2)


def stage_std(means: Mapping[tuple[str, str], float], stage: str) -> float:
    """Population standard deviation of one stage's per-level means."""
    vals = [v for (_, st), v in means.items() if st == stage]
    m = sum(vals) / len(vals)
    return math.sqrt(sum((v - m) ** 2 for v in vals) / len(vals))


# ---------------------------------------------------------------------------
# Report assembly and rendering
# ---------------------------------------------------------------------------


def build_report(
    records: Sequence[EvalRecord], anova_stage: str = "cf"
) -> dict[str, Any]:
    """Machine-readable results document covering every analysis."""
    if anova_stage not in STAGES:
        raise ValueError(f"unknown stage {anova_stage!r}")
    means = stage_means(records)
    per_scenario = scenario_means(records)
    report: dict[str, Any] = {
        "means": {f"{level}/{stage}": v for (level, stage), v in sorted(means.items())},
        "scenario_means": {
            f"{scen}/{level}/{stage}": v
            for (scen, level, stage), v in sorted(per_scenario.items())
        },
        "hallucinations": sum(1 for r in records if r.hallucinated),
        "noise_corrections": sum(1 for r in records if r.noise_corrected),
        "parse_failures": sum(1 for r in records if r.parse_failed),
        "anova_stage": anova_stage,
    }
    if (NoiseLevel.CLEAN.value, "cf") in means:
        report["delta_vs_clean"] = {
            f"{level}/{stage}": v for (level, stage), v in sorted(delta_vs_clean(means).items())
        }
    for stage in STAGES:
        vals = [v for (_, st), v in means.items() if st == stage]
        if len(vals) >= 2:
            report.setdefault("extreme_difference", {})[stage] = extreme_difference(vals)
            report.setdefault("std_across_levels", {})[stage] = round(stage_std(means, stage), 2)
    groups = score_groups(records, anova_stage)
    if len(groups) >= 2 and all(len(g.values) >= 2 for g in groups):
        try:
            anova = welch_anova(groups)
            report["anova"] = {
                "f_statistic": anova.f_statistic,
                "p_value": anova.p_value,
                "df1": anova.df1,
                "df2": anova.df2,
            }
        except DegenerateVarianceError as exc:
            report["anova"] = {"error": str(exc)}
    if not records:
        logger.warning("no records to aggregate; report is empty")
    return report


def render_table(means: Mapping[tuple[str, str], float]) -> str:
    """Human-readable per-stage, per-level table."""
    lines = []
    levels = [lv.value for lv in LEVEL_ORDER if any(k[0] == lv.value for k in means)]
    for stage in STAGES:
        lines.append(STAGE_LABELS[stage])
        for level in levels:
            value = means.get((level, stage))
            if value is not None:
                lines.append(f"  {level.capitalize():<8} {value:>6.2f}")
    return "\n".join(lines)

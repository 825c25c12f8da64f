"""Accuracy measures, exact binomial intervals and per-examiner false-positive counts."""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Mapping

from scipy.special import betaincinv

from .study import Decision, ResponseRecord, SourceLabel


class InconclusiveTreatment(enum.Enum):
    CORRECT = "correct"
    ERROR = "error"
    EXCLUDED = "excluded"


class NonComparisonTreatment(enum.Enum):
    OBSERVED_NON_ERROR = "observed"
    MISSING = "missing"


@dataclass(frozen=True)
class ScoringPolicy:
    inconclusive_treatment: InconclusiveTreatment = InconclusiveTreatment.CORRECT
    unsuitable_treatment: NonComparisonTreatment = NonComparisonTreatment.OBSERVED_NON_ERROR
    no_value_treatment: NonComparisonTreatment = NonComparisonTreatment.OBSERVED_NON_ERROR


DEFAULT_POLICY = ScoringPolicy()


class Outcome(enum.Enum):
    FALSE_POSITIVE = "false_positive"
    FALSE_NEGATIVE = "false_negative"
    TRUE_POSITIVE = "true_positive"
    TRUE_NEGATIVE = "true_negative"
    CORRECT_BY_POLICY = "correct_by_policy"
    NOT_SCORED = "not_scored"


def classify(truth: SourceLabel, decision: Decision | None, policy: ScoringPolicy = DEFAULT_POLICY) -> Outcome:
    same = truth is SourceLabel.SAME
    if decision is None:
        return Outcome.NOT_SCORED
    if decision is Decision.IDENTIFICATION:
        return Outcome.TRUE_POSITIVE if same else Outcome.FALSE_POSITIVE
    if decision is Decision.EXCLUSION:
        return Outcome.FALSE_NEGATIVE if same else Outcome.TRUE_NEGATIVE
    if decision.is_inconclusive:
        treatment = policy.inconclusive_treatment
        if treatment is InconclusiveTreatment.CORRECT:
            return Outcome.CORRECT_BY_POLICY
        if treatment is InconclusiveTreatment.ERROR:
            return Outcome.FALSE_NEGATIVE if same else Outcome.FALSE_POSITIVE
        return Outcome.NOT_SCORED
    treatment = policy.unsuitable_treatment if decision is Decision.UNSUITABLE else policy.no_value_treatment
    if treatment is NonComparisonTreatment.OBSERVED_NON_ERROR:
        return Outcome.CORRECT_BY_POLICY
    return Outcome.NOT_SCORED


def clopper_pearson(x: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Exact two-sided binomial interval for ``x`` successes in ``n`` trials.

    The endpoints are beta quantiles, which solve the binomial tail equations
    P(X >= x | low) = P(X <= x | high) = (1 - level) / 2.
    """
    if not (isinstance(x, int) and isinstance(n, int)) or isinstance(x, bool) or isinstance(n, bool):
        raise TypeError("x and n must be integers")
    if n < 1 or not 0 <= x <= n:
        raise ValueError(f"need 0 <= x <= n and n >= 1, got x={x}, n={n}")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    tail = (1.0 - level) / 2.0
    low = 0.0 if x == 0 else float(betaincinv(x, n - x + 1, tail))
    high = 1.0 if x == n else float(betaincinv(x + 1, n - x, 1.0 - tail))
    return low, high


@dataclass(frozen=True)
class RateEstimate:
    numerator: int
    denominator: int
    level: float = 0.95
    point: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None

    @classmethod
    def from_counts(cls, numerator: int, denominator: int, level: float = 0.95) -> RateEstimate:
        if not 0 <= numerator <= max(denominator, 0):
            raise ValueError(f"numerator {numerator} outside [0, {denominator}]")
        if denominator == 0:
            return cls(numerator, denominator, level)
        low, high = clopper_pearson(numerator, denominator, level)
        return cls(numerator, denominator, level, numerator / denominator, low, high)

    @property
    def undefined(self) -> bool:
        return self.denominator == 0

    def as_dict(self) -> dict:
        return {
            "numerator": self.numerator,
            "denominator": self.denominator,
            "point": self.point,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "level": self.level,
            "undefined": self.undefined,
        }


def round_pct(proportion: float, places: int = 1) -> float:
    """Proportion to percent, rounded half away from zero."""
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(proportion * 100)).quantize(q, rounding=ROUND_HALF_UP))


def fmt_pct(proportion: float | None, places: int = 1) -> str:
    if proportion is None:
        return "undefined"
    return f"{round_pct(proportion, places):.{places}f}"


def fmt_estimate(est: RateEstimate) -> str:
    """Human form, e.g. ``0.7 (0.4, 1.1)``."""
    if est.undefined:
        return "undefined"
    return f"{fmt_pct(est.point)} ({fmt_pct(est.ci_low)}, {fmt_pct(est.ci_high)})"


MEASURES = ("false_positive", "false_negative", "sensitivity", "specificity")


@dataclass(frozen=True)
class AccuracySummary:
    false_positive: RateEstimate
    false_negative: RateEstimate
    sensitivity: RateEstimate
    specificity: RateEstimate
    scored_counts: Mapping[str, Mapping[str, int]] = field(default_factory=dict)

    def rows(self) -> list[tuple[str, RateEstimate]]:
        return [(m, getattr(self, m)) for m in MEASURES]

    def as_dict(self) -> dict:
        out = {m: est.as_dict() for m, est in self.rows()}
        out["scored_counts"] = {k: dict(v) for k, v in self.scored_counts.items()}
        return out


def summarize(
    records: Iterable[ResponseRecord], policy: ScoringPolicy = DEFAULT_POLICY, level: float = 0.95
) -> AccuracySummary:
    tallies = {label: Counter() for label in SourceLabel}
    for r in records:
        tallies[r.truth][classify(r.truth, r.decision, policy)] += 1

    def scored(label: SourceLabel) -> int:
        c = tallies[label]
        return sum(c.values()) - c[Outcome.NOT_SCORED]

    same, diff = tallies[SourceLabel.SAME], tallies[SourceLabel.DIFFERENT]
    n_same, n_diff = scored(SourceLabel.SAME), scored(SourceLabel.DIFFERENT)
    return AccuracySummary(
        false_positive=RateEstimate.from_counts(diff[Outcome.FALSE_POSITIVE], n_diff, level),
        false_negative=RateEstimate.from_counts(same[Outcome.FALSE_NEGATIVE], n_same, level),
        sensitivity=RateEstimate.from_counts(same[Outcome.TRUE_POSITIVE], n_same, level),
        specificity=RateEstimate.from_counts(diff[Outcome.TRUE_NEGATIVE], n_diff, level),
        scored_counts={
            label.value: {o.value: tallies[label][o] for o in Outcome} for label in SourceLabel
        },
    )


@dataclass(frozen=True)
class FpHistogram:
    """Examiner counts with 0, 1 and 2+ false positives."""

    zero: int
    one: int
    two_plus: int
    total_errors: int
    erring_examiners: int

    def buckets(self) -> tuple[int, int, int]:
        return (self.zero, self.one, self.two_plus)

    def as_dict(self) -> dict:
        return {"0": self.zero, "1": self.one, "2+": self.two_plus,
                "total_errors": self.total_errors, "erring_examiners": self.erring_examiners}


def histogram_from_counts(fp_by_examiner: Iterable[int]) -> FpHistogram:
    """Bucket per-examiner false-positive counts.

    The input holds one count per examiner with at least one scored
    different-source decision.
    """
    counts = list(fp_by_examiner)
    zero = sum(1 for c in counts if c == 0)
    one = sum(1 for c in counts if c == 1)
    return FpHistogram(zero, one, len(counts) - zero - one, sum(counts), len(counts) - zero)


def fp_histogram(records: Iterable[ResponseRecord], policy: ScoringPolicy = DEFAULT_POLICY) -> FpHistogram:
    fp: Counter = Counter()
    for r in records:
        if r.truth is not SourceLabel.DIFFERENT:
            continue
        outcome = classify(r.truth, r.decision, policy)
        if outcome is Outcome.NOT_SCORED:
            continue
        fp[r.examiner_id] += outcome is Outcome.FALSE_POSITIVE
    return histogram_from_counts(fp.values())


def binomial_se(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n)

"""Unit and item nonresponse accounting."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .study import Decision, ResponseRecord, SourceLabel, StudyDesign, response_table


class Scope(enum.Enum):
    ALL = "all"
    DIFFERENT_SOURCE_ONLY = "different"
    SAME_SOURCE_ONLY = "same"

    def includes(self, truth: SourceLabel) -> bool:
        if self is Scope.ALL:
            return True
        return (truth is SourceLabel.DIFFERENT) == (self is Scope.DIFFERENT_SOURCE_ONLY)


class Answered(enum.Enum):
    """Which recorded decisions count as an answer."""

    ANY_RECORDED = "any"
    COMPARISON_DECISION = "comparison"

    def __call__(self, decision: Decision | None) -> bool:
        if decision is None:
            return False
        return self is Answered.ANY_RECORDED or decision.is_comparison


OK = "ok"
UNDEFINED = "undefined"
INSUFFICIENT = "insufficient design data"


@dataclass(frozen=True)
class NonresponseLedger:
    """Nonresponse for one scope.

    ``assigned_items`` covers active responders only, so unit and item
    nonresponse never count the same examiner. ``total_assigned`` and
    ``overall_rate`` cover every examiner with assignments in scope.
    """

    scope: Scope
    answered_rule: Answered
    enrolled: int
    active_responders: int
    unit_rate: float | None
    assigned_items: int
    answered_items: int
    item_rate: float | None
    total_assigned: int
    overall_rate: float | None
    per_examiner_rates: Mapping[str, float] = field(default_factory=dict)
    status: str = OK

    def as_dict(self) -> dict:
        return {
            "scope": self.scope.value,
            "answered_rule": self.answered_rule.value,
            "enrolled": self.enrolled,
            "active_responders": self.active_responders,
            "unit_rate": self.unit_rate,
            "assigned_items": self.assigned_items,
            "answered_items": self.answered_items,
            "item_rate": self.item_rate,
            "total_assigned": self.total_assigned,
            "overall_rate": self.overall_rate,
            "status": self.status,
            "per_examiner_rates": dict(sorted(self.per_examiner_rates.items())),
        }


def _per_examiner(design, records, scope, answered):
    table = response_table(design, records)
    out: dict[str, tuple[int, int]] = {}
    for ex, items in design.assignments.items():
        n_assigned = n_answered = 0
        for item, truth in items:
            if not scope.includes(truth):
                continue
            n_assigned += 1
            rec = table[(ex, item)]
            n_answered += answered(rec.decision if rec is not None else None)
        out[ex] = (n_assigned, n_answered)
    return out


def ledger(
    design: StudyDesign,
    records: Iterable[ResponseRecord],
    scope: Scope = Scope.ALL,
    answered: Answered = Answered.ANY_RECORDED,
) -> NonresponseLedger:
    counts = _per_examiner(design, list(records), scope, answered)
    responders = {ex: c for ex, c in counts.items() if c[1] > 0}
    assigned = sum(a for a, _ in responders.values())
    answered_n = sum(b for _, b in responders.values())
    total = sum(a for a, _ in counts.values())

    # with nothing assigned in scope there is nobody who could have responded
    unit = 1.0 - len(responders) / design.enrolled_count if design.enrolled_count and total else None
    item = 1.0 - answered_n / assigned if assigned else None
    overall = 1.0 - answered_n / total if total else None
    if total == 0:
        status = INSUFFICIENT
    elif unit is None or item is None:
        status = UNDEFINED
    else:
        status = OK
    return NonresponseLedger(
        scope=scope,
        answered_rule=answered,
        enrolled=design.enrolled_count,
        active_responders=len(responders),
        unit_rate=unit,
        assigned_items=assigned,
        answered_items=answered_n,
        item_rate=item,
        total_assigned=total,
        overall_rate=overall,
        per_examiner_rates={ex: 1.0 - b / a for ex, (a, b) in counts.items() if a},
        status=status,
    )


def derived_rate(assigned: int, answered: int) -> float:
    """Item nonresponse from published totals: ``1 - answered / assigned``."""
    if assigned <= 0:
        raise ValueError("assigned must be positive")
    if not 0 <= answered <= assigned:
        raise ValueError(f"answered={answered} outside [0, {assigned}]")
    return 1.0 - answered / assigned


def high_nonresponse_flags(
    design: StudyDesign,
    records: Iterable[ResponseRecord],
    threshold: float = 0.5,
    scope: Scope = Scope.ALL,
    answered: Answered = Answered.ANY_RECORDED,
) -> tuple[dict[str, bool], list[str]]:
    """Flag examiners whose item nonresponse is strictly above ``threshold``.

    Returns ``(flags, excluded)`` where ``excluded`` lists examiners with no
    assignments in scope.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    counts = _per_examiner(design, list(records), scope, answered)
    flags = {ex: (a - b) / a > threshold for ex, (a, b) in counts.items() if a}
    excluded = sorted(ex for ex, (a, _) in counts.items() if not a)
    return flags, excluded

"""Shared data model for black-box study records, designs and examiner attributes."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping


class SourceLabel(enum.Enum):
    SAME = "same"
    DIFFERENT = "different"


class Decision(enum.Enum):
    """Examiner conclusion for one comparison.

    Graded inconclusives (A/B/C) are carried as distinct members so a record
    round-trips through CSV, but scoring treats every grade like a plain
    ``INCONCLUSIVE``.
    """

    IDENTIFICATION = "id"
    EXCLUSION = "exclusion"
    INCONCLUSIVE = "inconclusive"
    INCONCLUSIVE_A = "inconclusive_a"
    INCONCLUSIVE_B = "inconclusive_b"
    INCONCLUSIVE_C = "inconclusive_c"
    NO_VALUE = "no_value"
    UNSUITABLE = "unsuitable"

    @property
    def is_inconclusive(self) -> bool:
        return self.value.startswith("inconclusive")

    @property
    def grade(self) -> str | None:
        if self.is_inconclusive and "_" in self.value:
            return self.value[-1].upper()
        return None

    @property
    def is_comparison(self) -> bool:
        """True for Identification, Exclusion and any Inconclusive."""
        return self not in (Decision.NO_VALUE, Decision.UNSUITABLE)


class Difficulty(enum.Enum):
    VERY_EASY = "very_easy"
    EASY = "easy"
    MODERATE = "moderate"
    DIFFICULT = "difficult"
    VERY_DIFFICULT = "very_difficult"


@dataclass(frozen=True)
class ResponseRecord:
    examiner_id: str
    item_id: str
    truth: SourceLabel
    decision: Decision | None = None
    difficulty: Difficulty | None = None

    @property
    def key(self) -> tuple[str, str]:
        return (self.examiner_id, self.item_id)


@dataclass(frozen=True)
class StudyDesign:
    """Assignment ledger.

    ``assignments`` maps examiner id to a tuple of ``(item_id, truth)`` pairs.
    ``enrolled_count`` also counts participants who agreed to take part but
    returned nothing, and may exceed the number of examiners with assignments.
    """

    assignments: Mapping[str, tuple[tuple[str, SourceLabel], ...]]
    enrolled_count: int

    def __post_init__(self) -> None:
        frozen = {ex: tuple(items) for ex, items in self.assignments.items()}
        object.__setattr__(self, "assignments", MappingProxyType(frozen))
        if self.enrolled_count < 0:
            raise ValueError("enrolled_count must be nonnegative")
        if self.enrolled_count < len(frozen):
            raise ValueError(
                f"enrolled_count={self.enrolled_count} is smaller than the "
                f"{len(frozen)} examiners with assignments"
            )
        for ex, items in frozen.items():
            dup = [i for i, c in Counter(i for i, _ in items).items() if c > 1]
            if dup:
                raise ValueError(f"examiner {ex!r} has duplicate assignments: {dup}")

    @classmethod
    def from_records(cls, records: Iterable[ResponseRecord], enrolled_count: int | None = None) -> StudyDesign:
        """Design implied by a complete record set (every assignment has a row)."""
        assignments: dict[str, list[tuple[str, SourceLabel]]] = {}
        seen: set[tuple[str, str]] = set()
        for r in records:
            if r.key in seen:
                continue
            seen.add(r.key)
            assignments.setdefault(r.examiner_id, []).append((r.item_id, r.truth))
        n = len(assignments) if enrolled_count is None else enrolled_count
        return cls({ex: tuple(v) for ex, v in assignments.items()}, n)

    def truth_of(self) -> dict[tuple[str, str], SourceLabel]:
        return {(ex, item): truth for ex, items in self.assignments.items() for item, truth in items}

    def n_assigned(self) -> int:
        return sum(len(items) for items in self.assignments.values())


@dataclass(frozen=True)
class ExaminerAttributes:
    """Binary examiner characteristics; ``None`` marks a value that was not reported."""

    examiner_id: str
    flags: Mapping[str, bool | None] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if any(not name for name in self.flags):
            raise ValueError(f"examiner {self.examiner_id!r}: empty characteristic name")
        object.__setattr__(self, "flags", MappingProxyType(dict(self.flags)))


@dataclass(frozen=True)
class Violation:
    kind: str
    examiner_id: str
    item_id: str
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.violations)

    def __len__(self) -> int:
        return len(self.violations)

    def kinds(self) -> Counter:
        return Counter(v.kind for v in self.violations)


UNASSIGNED = "unassigned response"
DUPLICATE = "duplicate record"
TRUTH_MISMATCH = "truth mismatch"


def validate(records: Iterable[ResponseRecord], design: StudyDesign) -> ValidationReport:
    """Check records against the design.

    Violations are returned as data, sorted so that the result does not
    depend on record order.
    """
    truth = design.truth_of()
    counts = Counter()
    out: list[Violation] = []
    for r in records:
        counts[r.key] += 1
        if counts[r.key] == 2:
            out.append(Violation(DUPLICATE, r.examiner_id, r.item_id))
        expected = truth.get(r.key)
        if expected is None:
            out.append(Violation(UNASSIGNED, r.examiner_id, r.item_id))
        elif expected is not r.truth:
            out.append(
                Violation(TRUTH_MISMATCH, r.examiner_id, r.item_id,
                          f"design={expected.value} record={r.truth.value}")
            )
    out.sort(key=lambda v: (v.examiner_id, v.item_id, v.kind, v.detail))
    return ValidationReport(tuple(out))


def response_table(
    design: StudyDesign, records: Iterable[ResponseRecord]
) -> dict[tuple[str, str], ResponseRecord | None]:
    """Map every assignment to its record, or ``None`` when no row exists.

    A row with an absent decision and a missing row both mean "no response";
    callers read ``decision`` off the returned record (or get ``None``) so the
    two encodings land in the same state.
    """
    by_key = {r.key: r for r in records}
    return {
        (ex, item): by_key.get((ex, item))
        for ex, items in design.assignments.items()
        for item, _ in items
    }

"""Expert-witness CV coding: duplicate resolution and inclusion-criteria coverage."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

from .accuracy import round_pct


class Employment(enum.Enum):
    PUBLIC = "public"
    PRIVATE = "private"
    UNSTATED = "unstated"


@dataclass(frozen=True)
class CvRecord:
    expert_id: str
    afte_member: bool | None
    employment: Employment

    def __post_init__(self) -> None:
        if not self.expert_id:
            raise ValueError("expert_id must be nonempty")


@dataclass(frozen=True)
class ExpertProfile:
    expert_id: str
    afte_member: bool
    public_employer: bool
    n_resumes: int


def resolve(records: Iterable[CvRecord]) -> list[ExpertProfile]:
    """Collapse resumes to one profile per expert.

    Conflicts resolve toward meeting the study's inclusion criteria: any
    resume showing AFTE membership makes the expert a member, any public
    employer makes them publicly employed. Unknown membership counts as not a
    member and unstated employment as private.
    """
    afte: dict[str, bool] = {}
    public: dict[str, bool] = {}
    n: Counter = Counter()
    for r in records:
        n[r.expert_id] += 1
        afte[r.expert_id] = afte.get(r.expert_id, False) or r.afte_member is True
        public[r.expert_id] = public.get(r.expert_id, False) or r.employment is Employment.PUBLIC
    return [ExpertProfile(e, afte[e], public[e], n[e]) for e in sorted(n)]


@dataclass(frozen=True)
class CriteriaSummary:
    n_experts: int
    n_afte: int
    n_public: int
    n_both: int

    @property
    def pct_afte(self) -> float:
        return round_pct(self.n_afte / self.n_experts)

    @property
    def pct_public(self) -> float:
        return round_pct(self.n_public / self.n_experts)

    @property
    def pct_both(self) -> float:
        return round_pct(self.n_both / self.n_experts)

    def percentages(self) -> tuple[float, float, float]:
        return (self.pct_afte, self.pct_public, self.pct_both)


def criteria_summary(profiles: Iterable[ExpertProfile]) -> CriteriaSummary:
    profiles = list(profiles)
    if not profiles:
        raise ValueError("no expert profiles")
    return CriteriaSummary(
        n_experts=len(profiles),
        n_afte=sum(p.afte_member for p in profiles),
        n_public=sum(p.public_employer for p in profiles),
        n_both=sum(p.afte_member and p.public_employer for p in profiles),
    )


def resume_histogram(profiles: Iterable[ExpertProfile]) -> tuple[dict[int, int], int, int]:
    """``({n_resumes: n_experts}, total_experts, total_resumes)``."""
    profiles = list(profiles)
    hist = Counter(p.n_resumes for p in profiles)
    return dict(sorted(hist.items())), len(profiles), sum(p.n_resumes for p in profiles)

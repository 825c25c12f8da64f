"""Association between a binary examiner characteristic and high item nonresponse.

The test statistic is the overlap ``k``: examiners both flagged for high
nonresponse and carrying the characteristic. Larger overlap is evidence
that characteristic holders leave more items blank (one-sided).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .accuracy import clopper_pearson
from .streams import derive_seed
from .study import ExaminerAttributes

log = logging.getLogger(__name__)

# permutations per substream; fixed so results do not depend on scheduling
BLOCK = 4096


@dataclass(frozen=True)
class ContingencySummary:
    n_total: int
    n_characteristic: int
    n_flagged: int
    k_overlap: int

    def __post_init__(self) -> None:
        N, K, n, k = self.n_total, self.n_characteristic, self.n_flagged, self.k_overlap
        if min(N, K, n, k) < 0 or K > N or n > N or k > min(K, n) or k < K + n - N:
            raise ValueError(f"inconsistent 2x2 summary N={N} K={K} n={n} k={k}")


def _log_comb(a: int, b: int) -> float:
    return math.lgamma(a + 1) - math.lgamma(b + 1) - math.lgamma(a - b + 1)


def hypergeom_tail(N: int, K: int, n: int, k: int) -> float:
    """P(X >= k) for X ~ Hypergeometric(population N, K successes, n draws)."""
    if not (0 <= k <= n <= N and 0 <= K <= N):
        raise ValueError(f"need 0 <= k <= n <= N and 0 <= K <= N, got N={N} K={K} n={n} k={k}")
    lo, hi = max(0, n - (N - K)), min(K, n)
    if k <= lo:
        return 1.0
    if k > hi:
        return 0.0
    log_total = _log_comb(N, n)
    terms = [math.exp(_log_comb(K, j) + _log_comb(N - K, n - j) - log_total) for j in range(k, hi + 1)]
    return min(1.0, math.fsum(terms))


def _overlap_counts(N: int, K: int, n: int, n_perm: int, seed: int) -> np.ndarray:
    """Overlap under ``n_perm`` uniform relabelings of the characteristic.

    Each permutation is a partial Fisher-Yates shuffle: the ``n`` flagged
    slots are filled one at a time with a label drawn uniformly from those
    not yet placed, and only the running count of characteristic labels is
    kept. Block ``b`` of ``BLOCK`` permutations uses substream ``(seed, b)``.
    """
    out = np.empty(n_perm, dtype=np.int64)
    for b, start in enumerate(range(0, n_perm, BLOCK)):
        size = min(BLOCK, n_perm - start)
        rng = np.random.default_rng(derive_seed(seed, b))
        remaining = np.full(size, K, dtype=np.int64)
        overlap = np.zeros(size, dtype=np.int64)
        for slot in range(n):
            hit = rng.random(size) * (N - slot) < remaining
            overlap += hit
            remaining -= hit
        out[start : start + size] = overlap
    return out


@dataclass(frozen=True)
class PermutationResult:
    p_hat: float
    mc_low: float
    mc_high: float
    exceed: int
    n_perm: int


def contingency(flags: Mapping[str, bool], characteristic: Mapping[str, bool]) -> ContingencySummary:
    if set(flags) != set(characteristic):
        missing = sorted(set(flags) ^ set(characteristic))[:5]
        raise ValueError(f"flag and characteristic maps have different examiners, e.g. {missing}")
    keys = list(flags)
    return ContingencySummary(
        n_total=len(keys),
        n_characteristic=sum(bool(characteristic[k]) for k in keys),
        n_flagged=sum(bool(flags[k]) for k in keys),
        k_overlap=sum(bool(flags[k]) and bool(characteristic[k]) for k in keys),
    )


def permutation_from_summary(summary: ContingencySummary, n_perm: int, seed: int, level: float = 0.95) -> PermutationResult:
    if n_perm < 1:
        raise ValueError("n_perm must be at least 1")
    s = summary
    overlaps = _overlap_counts(s.n_total, s.n_characteristic, s.n_flagged, n_perm, seed)
    exceed = int((overlaps >= s.k_overlap).sum())
    low, high = clopper_pearson(exceed, n_perm, level)
    return PermutationResult((1 + exceed) / (n_perm + 1), low, high, exceed, n_perm)


def permutation_p(
    flags: Mapping[str, bool], characteristic: Mapping[str, bool], n_perm: int = 10_000, seed: int = 0
) -> PermutationResult:
    """Monte-Carlo one-sided permutation p-value, ``(1 + #{overlap >= observed}) / (n_perm + 1)``.

    ``mc_low``/``mc_high`` are a 95% Clopper-Pearson interval for the
    exceedance proportion.
    """
    return permutation_from_summary(contingency(flags, characteristic), n_perm, seed)


@dataclass(frozen=True)
class BatteryRow:
    name: str
    contingency: ContingencySummary
    exact_p: float
    mc: PermutationResult
    n_excluded: int = 0


def run_battery(
    flags: Mapping[str, bool],
    attributes: Iterable[ExaminerAttributes],
    characteristics: Sequence[str],
    n_perm: int = 10_000,
    seed: int = 0,
) -> list[BatteryRow]:
    """One test per characteristic; every row uses ``seed``.

    Examiners without a value for a characteristic, or without a flag, are
    dropped from that row only.
    """
    attrs = {a.examiner_id: a.flags for a in attributes}
    rows = []
    for name in characteristics:
        char = {ex: f.get(name) for ex, f in attrs.items()}
        keep = [ex for ex in flags if char.get(ex) is not None]
        dropped = len(flags) - len(keep)
        if dropped:
            log.info("%s: %d examiners without a value excluded", name, dropped)
        table = contingency({ex: flags[ex] for ex in keep}, {ex: bool(char[ex]) for ex in keep})
        exact = hypergeom_tail(table.n_total, table.n_characteristic, table.n_flagged, table.k_overlap)
        rows.append(BatteryRow(name, table, exact, permutation_from_summary(table, n_perm, seed), dropped))
    return rows

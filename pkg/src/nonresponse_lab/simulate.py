"""Simulated error and missingness matrices under MCAR and two-group NMAR masking.

Each examiner ``i`` draws ``1 + 2k`` uniforms from its own substream: the
first sets the error probability, the next ``k`` decide errors ``y`` and the
last ``k`` decide missingness ``m``. The masking thresholds (``pi`` for an
error cell, ``theta_i`` for a correct one) are applied afterwards, which lets
group A be calibrated from group B's realized missingness without touching
the draws.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .study import Decision, ResponseRecord, SourceLabel, StudyDesign
from .streams import examiner_stream

log = logging.getLogger(__name__)

# share of examiners in the low-error and high-error groups, as published
PUBLISHED_WEIGHTS = (0.942, 0.058)


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class Group:
    size: int
    p_low: float
    p_high: float


@dataclass(frozen=True)
class PopulationSpec:
    n_examiners: int = 173
    items_per_examiner: int = 20
    groups: tuple[Group, ...] = (Group(163, 0.0, 0.007), Group(10, 0.55, 0.6))

    def __post_init__(self) -> None:
        groups = tuple(g if isinstance(g, Group) else Group(*g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        if self.n_examiners < 1 or self.items_per_examiner < 1:
            raise ValueError("need at least one examiner and one item")
        if sum(g.size for g in groups) != self.n_examiners:
            raise ValueError(
                f"group sizes sum to {sum(g.size for g in groups)}, expected {self.n_examiners}"
            )
        for g in groups:
            if g.size < 0 or not 0.0 <= g.p_low <= g.p_high <= 1.0:
                raise ValueError(f"invalid group {g}")

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        low = np.concatenate([np.full(g.size, g.p_low) for g in self.groups])
        high = np.concatenate([np.full(g.size, g.p_high) for g in self.groups])
        return low, high

    def expected_error_rate(self) -> float:
        return sum(g.size * (g.p_low + g.p_high) / 2 for g in self.groups) / self.n_examiners


@dataclass(frozen=True)
class MCAR:
    rate: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"MCAR rate must lie in [0, 1], got {self.rate}")


@dataclass(frozen=True)
class NMARTwoGroup:
    """Two-group non-ignorable masking.

    ``pi`` is the chance an error cell goes missing. Correct cells go missing
    with a per-examiner ``theta_i`` chosen so group B sits near
    ``group_b_target`` and the whole study near ``target_overall``.
    """

    pi: float = 0.0
    target_overall: float = 0.179
    group_b_target: float = 0.4
    exact_weights: bool = False

    def __post_init__(self) -> None:
        for name in ("pi", "target_overall", "group_b_target"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class MissingnessConfig:
    mechanism: MCAR | NMARTwoGroup = field(default_factory=NMARTwoGroup)
    clamp_theta: bool = True

    @property
    def pi(self) -> float:
        m = self.mechanism
        return m.rate if isinstance(m, MCAR) else m.pi

    def with_pi(self, pi: float) -> MissingnessConfig:
        if isinstance(self.mechanism, MCAR):
            return self
        return replace(self, mechanism=replace(self.mechanism, pi=pi))


@dataclass(frozen=True, eq=False)
class SimulatedDataset:
    y: np.ndarray
    m: np.ndarray
    p: np.ndarray
    theta: np.ndarray
    pi: float
    seed: int
    spec: PopulationSpec = field(default_factory=PopulationSpec)

    def __post_init__(self) -> None:
        for a in (self.y, self.m, self.p, self.theta):
            a.setflags(write=False)

    @property
    def realized_missing(self) -> float:
        return float(self.m.mean())

    def examiner_ids(self) -> list[str]:
        width = len(str(self.spec.n_examiners))
        return [f"E{i + 1:0{width}d}" for i in range(self.spec.n_examiners)]

    def item_ids(self) -> list[str]:
        width = len(str(self.spec.items_per_examiner))
        return [f"D{j + 1:0{width}d}" for j in range(self.spec.items_per_examiner)]

    def to_records(self) -> list[ResponseRecord]:
        """One different-source record per cell; masked cells carry no decision."""
        out = []
        items = self.item_ids()
        for i, ex in enumerate(self.examiner_ids()):
            for j, item in enumerate(items):
                out.append(ResponseRecord(ex, item, SourceLabel.DIFFERENT, _cell_decision(self.y[i, j], self.m[i, j])))
        return out

    def design(self) -> StudyDesign:
        items = tuple((item, SourceLabel.DIFFERENT) for item in self.item_ids())
        return StudyDesign({ex: items for ex in self.examiner_ids()}, self.spec.n_examiners)


def _cell_decision(y, m) -> Decision | None:
    if m:
        return None
    return Decision.IDENTIFICATION if y else Decision.EXCLUSION


def _uniforms(seed: int, rows: range, items: int) -> np.ndarray:
    width = 1 + 2 * items
    out = np.empty((len(rows), width))
    for r, i in enumerate(rows):
        out[r] = examiner_stream(seed, i).random(width)
    return out


def _probs(spec: PopulationSpec, u0: np.ndarray) -> np.ndarray:
    low, high = spec.bounds()
    p = low + (high - low) * u0
    return np.where(low == high, low, p)


def draw_error_probs(spec: PopulationSpec, seed: int) -> np.ndarray:
    """Per-examiner error probabilities, uniform within each group's bounds.

    Groups occupy consecutive index blocks in the order given.
    """
    return _probs(spec, _uniforms(seed, range(spec.n_examiners), spec.items_per_examiner)[:, 0])


def theta_for(p: np.ndarray, pi: float, target: float, clamp: bool = True, first_index: int = 0) -> np.ndarray:
    """Masking probability for correct cells giving expected missingness ``target``.

    Solves ``p*pi + (1 - p)*theta = target`` per examiner.
    """
    p = np.asarray(p, dtype=float)
    if np.any(p >= 1.0):
        raise SimulationError("error probabilities must be below 1 to calibrate theta")
    theta = (target - p * pi) / (1.0 - p)
    bad = np.flatnonzero((theta < 0.0) | (theta > 1.0))
    if bad.size:
        if not clamp:
            i = int(bad[0])
            raise SimulationError(f"examiner {first_index + i}: theta={theta[i]:.6g} outside [0, 1]")
        log.debug("clamping theta for %d of %d examiners", bad.size, p.size)
        theta = np.clip(theta, 0.0, 1.0)
    return theta


def _mask(y: np.ndarray, u_m: np.ndarray, pi: float, theta: np.ndarray) -> np.ndarray:
    threshold = np.where(y == 1, pi, theta[:, None])
    return (u_m < threshold).astype(np.int8)


def _split(u: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    return u[:, 1 : 1 + k], u[:, 1 + k :]


def simulate_group_b(
    p_b: Sequence[float],
    pi: float,
    group_b_target: float = 0.4,
    seed: int = 0,
    items: int = 20,
    clamp_theta: bool = True,
    first_index: int = 0,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Errors and masks for the high-error group; returns ``(y_b, m_b, realized_mb)``.

    Rows use the substreams of examiners ``first_index, first_index + 1, ...``.
    """
    p_b = np.asarray(p_b, dtype=float)
    u = _uniforms(seed, range(first_index, first_index + len(p_b)), items)
    y, m, realized, _ = _group_b(p_b, pi, group_b_target, u, items, clamp_theta, first_index)
    return y, m, realized


def _group_b(p_b, pi, target, u, k, clamp, first_index):
    theta = theta_for(p_b, pi, target, clamp, first_index)
    u_y, u_m = _split(u, k)
    y = (u_y < p_b[:, None]).astype(np.int8)
    m = _mask(y, u_m, pi, theta)
    return y, m, (float(m.mean()) if m.size else 0.0), theta


def calibrate_group_a(
    p_a: Sequence[float],
    pi: float,
    target_overall: float = 0.179,
    realized_mb: float = 0.4,
    weights: tuple[float, float] = PUBLISHED_WEIGHTS,
    clamp_theta: bool = True,
) -> np.ndarray:
    """Theta for the low-error group given group B's realized missingness."""
    if not 0.0 <= realized_mb <= 1.0:
        raise ValueError(f"realized_mb must lie in [0, 1], got {realized_mb}")
    w_a, w_b = weights
    m_a = (target_overall - w_b * realized_mb) / w_a
    return theta_for(p_a, pi, m_a, clamp_theta)


def generate(spec: PopulationSpec, config: MissingnessConfig, seed: int) -> SimulatedDataset:
    k = spec.items_per_examiner
    u = _uniforms(seed, range(spec.n_examiners), k)
    p = _probs(spec, u[:, 0])
    u_y, u_m = _split(u, k)
    mech = config.mechanism

    if isinstance(mech, MCAR):
        theta = np.full(spec.n_examiners, mech.rate)
        y = (u_y < p[:, None]).astype(np.int8)
        m = _mask(y, u_m, mech.rate, theta)
        return SimulatedDataset(y, m, p, theta, mech.rate, seed, spec)

    if len(spec.groups) != 2:
        raise SimulationError("two-group masking needs exactly two groups (low-error first)")
    n_a = spec.groups[0].size
    y_b, m_b, realized_mb, theta_b = _group_b(
        p[n_a:], mech.pi, mech.group_b_target, u[n_a:], k, config.clamp_theta, n_a
    )
    weights = (n_a / spec.n_examiners, 1 - n_a / spec.n_examiners) if mech.exact_weights else PUBLISHED_WEIGHTS
    theta_a = calibrate_group_a(p[:n_a], mech.pi, mech.target_overall, realized_mb, weights, config.clamp_theta)
    y_a = (u_y[:n_a] < p[:n_a, None]).astype(np.int8)
    m_a = _mask(y_a, u_m[:n_a], mech.pi, theta_a)

    ds = SimulatedDataset(
        np.vstack([y_a, y_b]), np.vstack([m_a, m_b]), p, np.concatenate([theta_a, theta_b]),
        mech.pi, seed, spec,
    )
    log.debug("seed=%d pi=%.3f realized m_B=%.4f overall=%.4f", seed, mech.pi, realized_mb, ds.realized_missing)
    return ds


def mask(ds: SimulatedDataset) -> tuple[list[ResponseRecord], list[ResponseRecord]]:
    """Split a dataset into ``(observed_records, full_records)``."""
    full, observed = [], []
    items = ds.item_ids()
    for i, ex in enumerate(ds.examiner_ids()):
        for j, item in enumerate(items):
            rec = ResponseRecord(ex, item, SourceLabel.DIFFERENT, _cell_decision(ds.y[i, j], 0))
            full.append(rec)
            if not ds.m[i, j]:
                observed.append(rec)
    return observed, full

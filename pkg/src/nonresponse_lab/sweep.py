"""Grid experiment over the error-masking probability, observed vs. full data."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .accuracy import FpHistogram, RateEstimate, histogram_from_counts
from .simulate import MissingnessConfig, PopulationSpec, SimulatedDataset, generate
from .streams import derive_seed

log = logging.getLogger(__name__)

INFINITE_UNDERSTATEMENT = math.inf

CSV_HEADER = ("pi", "dataset", "point", "ci_low", "ci_high", "numerator", "denominator", "realized_missing", "seed")


def default_grid(n: int = 101) -> tuple[float, ...]:
    return tuple(round(i / (n - 1), 12) for i in range(n)) if n > 1 else (0.0,)


def parse_grid(text: str) -> tuple[float, ...]:
    """``start:stop:count`` with both ends included; ``0:0:1`` is the singleton 0."""
    try:
        start, stop, count = text.split(":")
        start, stop, n = float(start), float(stop), int(count)
    except ValueError:
        raise ValueError(f"grid must look like start:stop:count, got {text!r}") from None
    if n < 1:
        raise ValueError("grid count must be at least 1")
    if n == 1:
        values = (start,)
    else:
        values = tuple(round(start + (stop - start) * i / (n - 1), 12) for i in range(n))
    check_grid(values)
    return values


def check_grid(values) -> None:
    if any(not 0.0 <= v <= 1.0 for v in values):
        raise ValueError("grid values must lie in [0, 1]")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError("grid values must be strictly increasing")


@dataclass(frozen=True)
class CellResult:
    pi: float
    seed: int
    observed: RateEstimate | None = None
    full: RateEstimate | None = None
    histogram_observed: FpHistogram | None = None
    realized_missing: float | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def errors_observed(self) -> int:
        return self.histogram_observed.total_errors

    @property
    def erring_examiners_observed(self) -> int:
        return self.histogram_observed.erring_examiners


def summarize_dataset(ds: SimulatedDataset, level: float = 0.95, pi: float | None = None) -> CellResult:
    """Observed and full false-positive estimates from a dataset's matrices.

    Counts come straight from ``y`` and ``m``; this agrees with running the
    record-level estimators on ``mask(ds)`` (see the tests).
    """
    y = ds.y.astype(np.int64)
    seen = 1 - ds.m.astype(np.int64)
    fp_obs = (y * seen).sum(axis=1)
    scored_obs = seen.sum(axis=1)
    full = RateEstimate.from_counts(int(y.sum()), int(y.size), level)
    observed = RateEstimate.from_counts(int(fp_obs.sum()), int(scored_obs.sum()), level)
    hist = histogram_from_counts(int(c) for c, s in zip(fp_obs, scored_obs) if s > 0)
    return CellResult(ds.pi if pi is None else pi, ds.seed, observed, full, hist, ds.realized_missing)


def run_cell(spec: PopulationSpec, config: MissingnessConfig, seed: int, level: float = 0.95) -> CellResult:
    return summarize_dataset(generate(spec, config, seed), level, config.pi)


def cell_seed(base_seed: int, index: int) -> int:
    return derive_seed(base_seed, index)


def _safe_cell(spec, config, seed, level):
    try:
        return run_cell(spec, config, seed, level)
    except (ValueError, ArithmeticError) as exc:
        log.warning("cell pi=%s seed=%d failed: %s", config.pi, seed, exc)
        return CellResult(config.pi, seed, error=f"{type(exc).__name__}: {exc}")


def run_sweep(
    spec: PopulationSpec,
    template: MissingnessConfig,
    grid=None,
    base_seed: int = 0,
    workers: int = 1,
    level: float = 0.95,
) -> list[CellResult]:
    """One cell per grid value, in grid order.

    Cell ``i`` uses seed ``cell_seed(base_seed, i)``, so results do not depend
    on ``workers``. A cell that raises is returned with ``error`` set.
    """
    grid = default_grid() if grid is None else tuple(grid)
    check_grid(grid)
    tasks = [(spec, template.with_pi(pi), cell_seed(base_seed, i), level) for i, pi in enumerate(grid)]
    if workers <= 1:
        return [_safe_cell(*t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda t: _safe_cell(*t), tasks))


def sweep_rows(results: list[CellResult]) -> list[tuple]:
    """Two rows per successful cell (observed, then full) in grid order."""
    rows = []
    for cell in results:
        if cell.failed:
            continue
        for name, est in (("observed", cell.observed), ("full", cell.full)):
            rows.append((cell.pi, name, est.point, est.ci_low, est.ci_high,
                         est.numerator, est.denominator, cell.realized_missing, cell.seed))
    return rows


@dataclass(frozen=True)
class PublishedSummary:
    histogram: tuple[int, int, int] = (163, 5, 5)
    total_errors: int = 20
    erring_examiners: int = 13


def match_published(cell: CellResult, reference: PublishedSummary = PublishedSummary()) -> bool:
    if cell.failed:
        return False
    h = cell.histogram_observed
    return (
        h.buckets() == tuple(reference.histogram)
        and h.total_errors == reference.total_errors
        and h.erring_examiners == reference.erring_examiners
    )


def summary_distance(cell: CellResult, reference: PublishedSummary = PublishedSummary()) -> int:
    h = cell.histogram_observed
    return (
        sum(abs(a - b) for a, b in zip(h.buckets(), reference.histogram))
        + abs(h.total_errors - reference.total_errors)
        + abs(h.erring_examiners - reference.erring_examiners)
    )


@dataclass
class SearchResult:
    pi: float
    scanned: int
    matches: list[CellResult] = field(default_factory=list)
    nearest: list[tuple[int, CellResult]] = field(default_factory=list)


def search_published(
    spec: PopulationSpec,
    template: MissingnessConfig,
    pi: float = 0.87,
    n_seeds: int = 10_000,
    reference: PublishedSummary = PublishedSummary(),
    keep_nearest: int = 5,
    workers: int = 1,
) -> SearchResult:
    """Scan seeds ``0 .. n_seeds - 1`` at fixed ``pi`` for cells matching ``reference``."""
    config = template.with_pi(pi)

    def one(seed):
        return run_cell(spec, config, seed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(one, range(n_seeds)))
    else:
        cells = [one(s) for s in range(n_seeds)]
    ranked = sorted(((summary_distance(c, reference), c) for c in cells), key=lambda t: (t[0], t[1].seed))
    return SearchResult(
        pi=pi,
        scanned=n_seeds,
        matches=[c for c in cells if match_published(c, reference)],
        nearest=ranked[:keep_nearest],
    )


def bias_report(cell: CellResult) -> float:
    """Relative understatement ``full / observed - 1`` of the false-positive rate."""
    obs, full = cell.observed.point, cell.full.point
    if not obs:
        return INFINITE_UNDERSTATEMENT
    return full / obs - 1.0

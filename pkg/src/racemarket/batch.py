"""Replicated runs, outcome distributions, comparison tests, benchmarks.

Runs in a batch are seeded by deriving one child seed per run index from
the batch master seed, so results are a pure function of (config, master
seed) and identical for any worker count; workers only change wall-clock
time.  Outcome PMFs use the full finish-order space up to 6 competitors
(720 permutations) and fall back to the winner marginal above that.

scipy is imported lazily inside the comparison helpers to keep batch
worker processes import-light.
"""

from __future__ import annotations

import time as _time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import partial
from statistics import fmean, stdev

from .exchange import Money
from .race import RaceConfig, Trajectory, run_race
from .seeding import derive_seed
from .session import SessionConfig, run_session

#: Largest field size whose full finish-order space (n!) is tracked exactly.
MAX_FULL_OUTCOME_COMPETITORS = 6


class BatchRunError(RuntimeError):
    """A batch run failed; carries the failing run index."""

    def __init__(self, run_index: int, message: str):
        super().__init__(f"run {run_index}: {message}")
        self.run_index = run_index

    def __reduce__(self):
        return (BatchRunError, (self.run_index, self.args[0].split(": ", 1)[1]))


@dataclass(frozen=True)
class BatchConfig:
    """R replications of a race or session at P workers."""

    base: RaceConfig | SessionConfig
    replications: int
    master_seed: int
    workers: int = 1

    def validate(self) -> None:
        self.base.validate()
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class RaceResult:
    run_index: int
    finish_order: tuple[str, ...]
    finish_ticks: tuple[int, ...]
    n_ticks: int

    @property
    def winner(self) -> str:
        return self.finish_order[0]

    @property
    def winner_ticks(self) -> int:
        return min(self.finish_ticks)


@dataclass(frozen=True)
class SessionSummary:
    run_index: int
    winner: str
    n_events: int
    total_matched: Money
    total_commission: Money
    winner_ticks: int


def _race_job(config: RaceConfig, item: tuple[int, int]) -> RaceResult:
    i, seed = item
    try:
        traj: Trajectory = run_race(config, seed, record=False)
    except Exception as exc:
        raise BatchRunError(i, repr(exc))
    return RaceResult(i, traj.finish_order, traj.finish_ticks, traj.n_ticks)


def _session_job(config: SessionConfig, item: tuple[int, int]) -> SessionSummary:
    i, seed = item
    try:
        res = run_session(replace(config, master_seed=seed))
    except Exception as exc:
        raise BatchRunError(i, repr(exc))
    matched = sum(e["amount"] for e in res.events if e["kind"] == "match")
    return SessionSummary(
        i,
        res.trajectory.winner,
        len(res.events),
        matched,
        res.settlement.total_commission,
        min(res.trajectory.finish_ticks),
    )


def run_batch(batch: BatchConfig) -> list:
    """All R results in run-index order; worker count never changes them."""
    batch.validate()
    if isinstance(batch.base, SessionConfig):
        job = partial(_session_job, batch.base)
    else:
        job = partial(_race_job, batch.base)
    items = [
        (i, derive_seed(batch.master_seed, "run", i)) for i in range(batch.replications)
    ]
    if batch.workers == 1:
        return [job(item) for item in items]
    chunk = max(1, batch.replications // (batch.workers * 8))
    with ProcessPoolExecutor(max_workers=batch.workers) as pool:
        return list(pool.map(job, items, chunksize=chunk))


# -- outcome distributions ------------------------------------------------

ORDER_SPACE = "order"
WINNER_SPACE = "winner"


@dataclass(frozen=True)
class OutcomePMF:
    """Empirical PMF over race outcomes.

    space is "order" (keys are hyphen-joined finish orders) for fields of
    up to 6 competitors, else "winner" (keys are winner ids).
    """

    space: str
    n_samples: int
    counts: dict[str, int]

    def frequency(self, key: str) -> float:
        return self.counts.get(key, 0) / self.n_samples


def estimate_pmf(orders: list[tuple[str, ...]]) -> OutcomePMF:
    """PMF of finish-order samples, winner-marginal above 6 competitors."""
    if not orders:
        raise ValueError("estimate_pmf needs at least one outcome sample")
    n = len(orders[0])
    if any(len(o) != n for o in orders):
        raise ValueError("outcome samples must all have the same field size")
    counts: dict[str, int] = {}
    if n <= MAX_FULL_OUTCOME_COMPETITORS:
        space = ORDER_SPACE
        for order in orders:
            key = "-".join(order)
            counts[key] = counts.get(key, 0) + 1
    else:
        space = WINNER_SPACE
        for order in orders:
            counts[order[0]] = counts.get(order[0], 0) + 1
    return OutcomePMF(space=space, n_samples=len(orders), counts=counts)


def pmf_from_results(results: list[RaceResult]) -> OutcomePMF:
    return estimate_pmf([r.finish_order for r in results])


@dataclass(frozen=True)
class ComparisonResult:
    method: str
    statistic: float
    p_value: float
    dof: int | None = None


def compare_pmf(a: OutcomePMF, b: OutcomePMF) -> ComparisonResult:
    """Chi-square homogeneity test that two PMFs share one distribution.

    Builds the 2 x K contingency table over the union of observed
    outcomes.  Identical count vectors give statistic 0, p = 1.  The
    chi-square approximation needs a few expected counts per cell, so keep
    sample sizes well above the outcome-space size.
    """
    if a.space != b.space:
        raise ValueError(f"cannot compare PMFs over {a.space!r} and {b.space!r} spaces")
    keys = sorted(set(a.counts) | set(b.counts))
    if not keys:
        raise ValueError("both PMFs are empty")
    row_a = [a.counts.get(k, 0) for k in keys]
    row_b = [b.counts.get(k, 0) for k in keys]
    if len(keys) == 1:
        return ComparisonResult("chi2_homogeneity", 0.0, 1.0, 0)
    if row_a == row_b:
        return ComparisonResult("chi2_homogeneity", 0.0, 1.0, len(keys) - 1)
    from scipy.stats import chi2_contingency

    stat, p, dof, _ = chi2_contingency([row_a, row_b], correction=False)
    return ComparisonResult("chi2_homogeneity", float(stat), float(p), int(dof))


def compare_finish_times(times_a, times_b) -> ComparisonResult:
    """Kruskal-Wallis test on two samples of finish times (secondary check)."""
    from scipy.stats import kruskal

    stat, p = kruskal(list(times_a), list(times_b))
    return ComparisonResult("kruskal_wallis", float(stat), float(p))


# -- benchmarking ------------------------------------------------------------

BENCH_WARMUPS = 3


@dataclass(frozen=True)
class BenchPoint:
    n_competitors: int
    mean_s: float
    sd_s: float
    cv: float
    reps: int


def resize_race(config: RaceConfig, n: int) -> RaceConfig:
    """Race with n competitors built by cycling the config's field as templates."""
    if n == config.n_competitors:
        return config
    if n < 1:
        raise ValueError(f"competitor count must be >= 1, got {n}")
    field = tuple(
        replace(config.competitors[i % config.n_competitors], cid=f"c{i + 1}")
        for i in range(n)
    )
    return replace(config, competitors=field)


def bench(
    base: RaceConfig,
    n_grid: tuple[int, ...],
    replications: int,
    timing_reps: int,
    master_seed: int,
    workers: int = 1,
) -> list[BenchPoint]:
    """Mean wall-clock seconds per race over a competitor-count grid.

    Per grid point: 3 untimed warm-up races, then timing_reps timed
    run_batch calls of R races each.  The per-race mean, sd, and cv are
    computed across the timed batch means; reps reports R * timing_reps.
    """
    if timing_reps < 1:
        raise ValueError(f"timing_reps must be >= 1, got {timing_reps}")
    points = []
    for n in n_grid:
        cfg = resize_race(base, n)
        warm = BatchConfig(cfg, BENCH_WARMUPS, derive_seed(master_seed, "warmup", n), 1)
        run_batch(warm)
        samples = []
        for rep in range(timing_reps):
            batch = BatchConfig(
                cfg, replications, derive_seed(master_seed, "bench", n, rep), workers
            )
            t0 = _time.perf_counter()
            run_batch(batch)
            samples.append((_time.perf_counter() - t0) / replications)
        mean = fmean(samples)
        sd = stdev(samples) if len(samples) > 1 else 0.0
        points.append(
            BenchPoint(
                n_competitors=n,
                mean_s=mean,
                sd_s=sd,
                cv=sd / mean if mean > 0 else 0.0,
                reps=replications * timing_reps,
            )
        )
    return points

"""File products: CSV tables, JSON-lines event logs, run metadata.

All numbers are written with repr precision so outputs are byte-stable for
identical inputs.  Money columns are integer minor units.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from . import __version__
from .batch import BenchPoint, OutcomePMF, RaceResult, SessionSummary
from .exchange import SettlementReport
from .race import Trajectory
from .seeding import RNG_ALGORITHM


def write_trajectory_csv(path: Path, traj: Trajectory) -> None:
    """tick,competitor_id,position with one row per tick per competitor."""
    if traj.ticks is None:
        raise ValueError("trajectory was recorded without per-tick snapshots")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tick", "competitor_id", "position"])
        for tick, row in enumerate(traj.ticks):
            for cid, pos in zip(traj.competitor_ids, row):
                w.writerow([tick, cid, repr(pos)])


def write_finish_csv(path: Path, traj: Trajectory) -> None:
    ranks = {cid: rank for rank, cid in enumerate(traj.finish_order, start=1)}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["competitor_id", "finish_tick", "finish_rank"])
        for cid, tick in zip(traj.competitor_ids, traj.finish_ticks):
            w.writerow([cid, tick, ranks[cid]])


def write_events_jsonl(path: Path, events: list[dict]) -> None:
    with open(path, "w") as fh:
        for event in events:
            fh.write(json.dumps(event, separators=(",", ":")))
            fh.write("\n")


def write_sentiment_csv(path: Path, rows: list[tuple[float, str, str, float]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "bettor_id", "competitor_id", "decimal_odds"])
        for time, bettor_id, cid, odds in rows:
            w.writerow([repr(float(time)), bettor_id, cid, repr(float(odds))])


def write_settlement_csv(path: Path, report: SettlementReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bettor_id", "gross", "commission", "net"])
        for row in report.rows:
            w.writerow([row.bettor_id, row.gross, row.commission, row.net])


def write_pmf_csv(path: Path, pmf: OutcomePMF) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["outcome", "count", "frequency"])
        for key in sorted(pmf.counts):
            w.writerow([key, pmf.counts[key], repr(pmf.counts[key] / pmf.n_samples)])


def read_pmf_csv(path: Path) -> OutcomePMF:
    """Read a PMF table back; the space is inferred from the outcome keys.

    Competitor ids cannot contain '-', so hyphenated keys are full finish
    orders and bare keys are winner marginals.
    """
    counts: dict[str, int] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["outcome", "count"]:
            raise ValueError(f"{path}: not a PMF table (header {header!r})")
        for row in reader:
            if not row:
                continue
            counts[row[0]] = int(row[1])
    if not counts:
        raise ValueError(f"{path}: PMF table has no rows")
    total = sum(counts.values())
    space = "order" if any("-" in k for k in counts) else "winner"
    return OutcomePMF(space=space, n_samples=total, counts=counts)


def write_race_runs_csv(path: Path, results: list[RaceResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "winner", "winner_ticks", "n_ticks", "finish_order"])
        for r in results:
            w.writerow([r.run_index, r.winner, r.winner_ticks, r.n_ticks, "-".join(r.finish_order)])


def write_session_runs_csv(path: Path, results: list[SessionSummary]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["run", "winner", "winner_ticks", "n_events", "total_matched", "total_commission"]
        )
        for r in results:
            w.writerow(
                [r.run_index, r.winner, r.winner_ticks, r.n_events, r.total_matched, r.total_commission]
            )


def write_bench_csv(path: Path, points: list[BenchPoint]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n_competitors", "mean_s", "sd_s", "cv", "reps"])
        for p in points:
            w.writerow([p.n_competitors, repr(p.mean_s), repr(p.sd_s), repr(p.cv), p.reps])


def write_metadata(
    out_dir: Path, command: str, master_seed: int, config_digest: str, outputs: list[str]
) -> None:
    """One metadata JSON per invocation, beside the outputs it describes."""
    meta = {
        "version": __version__,
        "rng_algorithm": RNG_ALGORITHM,
        "command": command,
        "master_seed": master_seed,
        "config_digest": config_digest,
        "outputs": sorted(outputs),
    }
    with open(out_dir / "metadata.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")

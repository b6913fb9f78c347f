"""Stochastic race simulator.

Each competitor advances once per tick by a strictly positive step drawn
from its own step distribution, scaled by a course-conditions preference
factor and a distance-dependent responsiveness multiplier.  A competitor
whose gap to the nearest rival strictly ahead is at or below its blocking
threshold cannot draw freely: its step is limited to the smaller of its own
and the front runner's previous step (times responsiveness), modelling
being boxed in behind a slower rival.  All updates within a tick are
synchronous, computed from start-of-tick positions.  The race ends when the
slowest competitor has crossed the finish line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .seeding import make_rng

DEFAULT_TICK_LIMIT = 1_000_000

#: preference_factor lower clamp; keeps every step strictly positive.
MIN_PREFERENCE_FACTOR = 0.01


class RaceConfigError(ValueError):
    """Raised when a race configuration fails validation."""


class RaceDivergedError(RuntimeError):
    """Raised when a race exceeds its tick limit without finishing."""


@dataclass(frozen=True)
class UniformSteps:
    """Uniform step law on [lo, hi], lo > 0."""

    lo: float
    hi: float

    def validate(self) -> None:
        if not 0.0 < self.lo <= self.hi:
            raise RaceConfigError(f"uniform steps need 0 < lo <= hi, got ({self.lo}, {self.hi})")

    def draw(self, rng) -> float:
        return rng.uniform(self.lo, self.hi)

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class LogNormalSteps:
    """Log-normal step law: scale * exp(Normal(mu, sigma))."""

    mu: float
    sigma: float
    scale: float = 1.0

    def validate(self) -> None:
        if self.sigma < 0.0:
            raise RaceConfigError(f"lognormal sigma must be >= 0, got {self.sigma}")
        if self.scale <= 0.0:
            raise RaceConfigError(f"lognormal scale must be > 0, got {self.scale}")

    def draw(self, rng) -> float:
        return self.scale * rng.lognormvariate(self.mu, self.sigma)

    @property
    def mean(self) -> float:
        return self.scale * math.exp(self.mu + 0.5 * self.sigma * self.sigma)


StepDistribution = UniformSteps | LogNormalSteps


@dataclass(frozen=True)
class Responsiveness:
    """Two-level distance profile: early_mult before breakpoint * L, late_mult after."""

    early_mult: float = 1.0
    late_mult: float = 1.0
    breakpoint: float = 0.5

    def validate(self) -> None:
        if self.early_mult <= 0.0 or self.late_mult <= 0.0:
            raise RaceConfigError("responsiveness multipliers must be > 0")
        if not 0.0 <= self.breakpoint <= 1.0:
            raise RaceConfigError(f"breakpoint must be in [0, 1], got {self.breakpoint}")

    def at(self, position: float, track_length: float) -> float:
        if position < self.breakpoint * track_length:
            return self.early_mult
        return self.late_mult


@dataclass(frozen=True)
class Competitor:
    cid: str
    steps: StepDistribution
    preference: float = 0.5
    pref_sensitivity: float = 0.0
    theta: float = 0.0
    responsiveness: Responsiveness = field(default_factory=Responsiveness)

    def validate(self) -> None:
        if not self.cid:
            raise RaceConfigError("competitor id must be non-empty")
        self.steps.validate()
        if self.pref_sensitivity < 0.0:
            raise RaceConfigError(f"pref_sensitivity must be >= 0, got {self.pref_sensitivity}")
        if self.theta < 0.0:
            raise RaceConfigError(f"theta must be >= 0, got {self.theta}")
        self.responsiveness.validate()


@dataclass(frozen=True)
class BettingClose:
    """When in-play betting closes: at the 1st, k-th, or last finisher."""

    rule: str
    k: int | None = None

    @staticmethod
    def first() -> "BettingClose":
        return BettingClose("first")

    @staticmethod
    def kth(k: int) -> "BettingClose":
        return BettingClose("kth", k)

    @staticmethod
    def last() -> "BettingClose":
        return BettingClose("last")

    def close_rank(self, n_competitors: int) -> int:
        """Number of finishers that triggers the close."""
        if self.rule == "first":
            return 1
        if self.rule == "kth":
            return self.k  # type: ignore[return-value]
        return n_competitors

    def validate(self, n_competitors: int) -> None:
        if self.rule not in ("first", "kth", "last"):
            raise RaceConfigError(f"unknown betting_close rule: {self.rule!r}")
        if self.rule == "kth":
            if self.k is None or not 1 <= self.k <= n_competitors:
                raise RaceConfigError(
                    f"betting_close kth needs 1 <= k <= {n_competitors}, got {self.k}"
                )
        elif self.k is not None:
            raise RaceConfigError(f"betting_close {self.rule!r} takes no k")


@dataclass(frozen=True)
class RaceConfig:
    track_length: float
    competitors: tuple[Competitor, ...]
    dt: float = 1.0
    conditions: float = 0.5
    betting_close: BettingClose = field(default_factory=BettingClose.last)
    tick_limit: int = DEFAULT_TICK_LIMIT

    @property
    def n_competitors(self) -> int:
        return len(self.competitors)

    @property
    def competitor_ids(self) -> tuple[str, ...]:
        return tuple(c.cid for c in self.competitors)

    def validate(self) -> None:
        if self.track_length <= 0.0:
            raise RaceConfigError(f"track_length must be > 0, got {self.track_length}")
        if self.dt <= 0.0:
            raise RaceConfigError(f"dt must be > 0, got {self.dt}")
        if self.tick_limit < 1:
            raise RaceConfigError(f"tick_limit must be >= 1, got {self.tick_limit}")
        if not self.competitors:
            raise RaceConfigError("a race needs at least one competitor")
        ids = [c.cid for c in self.competitors]
        if len(set(ids)) != len(ids):
            raise RaceConfigError(f"competitor ids must be unique, got {ids}")
        for c in self.competitors:
            c.validate()
        self.betting_close.validate(len(self.competitors))


def preference_factor(conditions: float, preference: float, sensitivity: float) -> float:
    """Conditions-suitability multiplier, clamped to [0.01, 1.0]."""
    f = 1.0 - sensitivity * abs(conditions - preference)
    if f < MIN_PREFERENCE_FACTOR:
        return MIN_PREFERENCE_FACTOR
    if f > 1.0:
        return 1.0
    return f


def draw_step(dist: StepDistribution, rng) -> float:
    """One raw step draw; strictly positive for any valid distribution."""
    return dist.draw(rng)


@dataclass
class RaceState:
    """Mutable mid-race state.  finish_ticks[c] is None while c is racing."""

    tick: int
    positions: list[float]
    prev_steps: list[float]
    finish_ticks: list[int | None]
    blocked_steps: int = 0

    def clone(self) -> "RaceState":
        return RaceState(
            self.tick,
            list(self.positions),
            list(self.prev_steps),
            list(self.finish_ticks),
            self.blocked_steps,
        )

    def finished_count(self) -> int:
        return sum(1 for t in self.finish_ticks if t is not None)

    def all_finished(self) -> bool:
        return all(t is not None for t in self.finish_ticks)


def initial_state(config: RaceConfig, rng) -> RaceState:
    """All competitors at 0; previous steps primed with one unblocked draw each."""
    n = config.n_competitors
    prev = []
    for comp in config.competitors:
        pref = preference_factor(config.conditions, comp.preference, comp.pref_sensitivity)
        resp = comp.responsiveness.at(0.0, config.track_length)
        prev.append(resp * pref * comp.steps.draw(rng))
    return RaceState(0, [0.0] * n, prev, [None] * n)


def _front_runner(positions: list[float], finish_ticks: list, c: int) -> tuple[int, float] | None:
    """Nearest still-racing competitor strictly ahead of c: (index, gap).

    Equal positions do not count as ahead.  Among rivals tied at the nearest
    front position the lowest index is chosen.  Finished competitors have
    left the track and never block.
    """
    pc = positions[c]
    best_i = -1
    best_gap = -1.0
    for i, p in enumerate(positions):
        if i == c or finish_ticks[i] is not None:
            continue
        if p > pc:
            gap = p - pc
            if best_i < 0 or gap < best_gap:
                best_i = i
                best_gap = gap
    if best_i < 0:
        return None
    return best_i, best_gap


def _resolve_step(state: RaceState, config: RaceConfig, c: int, rng) -> tuple[float, bool]:
    comp = config.competitors[c]
    resp = comp.responsiveness.at(state.positions[c], config.track_length)
    front = _front_runner(state.positions, state.finish_ticks, c)
    if front is None or front[1] > comp.theta:
        pref = preference_factor(config.conditions, comp.preference, comp.pref_sensitivity)
        return resp * pref * comp.steps.draw(rng), False
    return resp * min(state.prev_steps[c], state.prev_steps[front[0]]), True


def step_competitor(state: RaceState, config: RaceConfig, c: int, rng) -> float:
    """Step for competitor c this tick; does not mutate state.

    Free draw when nobody is close ahead (gap > theta or no one strictly
    ahead); otherwise limited to the smaller of c's and the front runner's
    previous step, scaled by responsiveness.
    """
    return _resolve_step(state, config, c, rng)[0]


def advance_race(state: RaceState, config: RaceConfig, rng) -> RaceState:
    """One synchronous tick, in place.

    Steps for all still-racing competitors are computed from start-of-tick
    positions (draws in competitor-index order), then applied together.
    Competitors reaching track_length are marked finished at the new tick.
    """
    positions = state.positions
    finish = state.finish_ticks
    n = len(positions)
    steps: list[float] = [0.0] * n
    blocked = 0
    for c in range(n):
        if finish[c] is None:
            s, was_blocked = _resolve_step(state, config, c, rng)
            steps[c] = s
            blocked += was_blocked
    t = state.tick + 1
    length = config.track_length
    prev = state.prev_steps
    for c in range(n):
        if finish[c] is None:
            p = positions[c] + steps[c]
            if p == positions[c]:
                # steps are always positive but can underflow float addition
                # in long blocked chains; keep positions strictly increasing
                p = math.nextafter(p, math.inf)
            positions[c] = p
            prev[c] = steps[c]
            if p >= length:
                finish[c] = t
    state.tick = t
    state.blocked_steps += blocked
    return state


def _finish_order(state: RaceState, config: RaceConfig) -> tuple[int, ...]:
    # Same-tick ties rank the larger overshoot past the line first,
    # then the lower competitor index.
    length = config.track_length
    return tuple(
        sorted(
            range(config.n_competitors),
            key=lambda c: (state.finish_ticks[c], length - state.positions[c], c),
        )
    )


@dataclass(frozen=True)
class Trajectory:
    """Completed race record.  ticks is None when snapshots were not kept."""

    competitor_ids: tuple[str, ...]
    dt: float
    ticks: tuple[tuple[float, ...], ...] | None
    finish_ticks: tuple[int, ...]
    finish_order: tuple[str, ...]
    final_positions: tuple[float, ...]
    blocked_steps: int

    @property
    def n_ticks(self) -> int:
        return max(self.finish_ticks)

    @property
    def winner(self) -> str:
        return self.finish_order[0]


def finalize_trajectory(
    state: RaceState, config: RaceConfig, snapshots: list[tuple[float, ...]] | None
) -> Trajectory:
    """Build the immutable race record from a fully finished state."""
    order = _finish_order(state, config)
    ids = config.competitor_ids
    return Trajectory(
        competitor_ids=ids,
        dt=config.dt,
        ticks=tuple(snapshots) if snapshots is not None else None,
        finish_ticks=tuple(state.finish_ticks),  # type: ignore[arg-type]
        finish_order=tuple(ids[c] for c in order),
        final_positions=tuple(state.positions),
        blocked_steps=state.blocked_steps,
    )


def run_race(config: RaceConfig, seed: int, record: bool = True) -> Trajectory:
    """Run one race to completion on a private stream seeded with seed."""
    config.validate()
    rng = make_rng(seed)
    state = initial_state(config, rng)
    snapshots: list[tuple[float, ...]] | None = None
    if record:
        snapshots = [tuple(state.positions)]
    while not state.all_finished():
        if state.tick >= config.tick_limit:
            raise RaceDivergedError(
                f"race exceeded tick_limit={config.tick_limit} with "
                f"{state.finished_count()}/{config.n_competitors} finished"
            )
        advance_race(state, config, rng)
        if snapshots is not None:
            snapshots.append(tuple(state.positions))
    return finalize_trajectory(state, config, snapshots)


def simulate_from(state: RaceState, config: RaceConfig, seed: int) -> tuple[str, ...]:
    """Finish order of one independent continuation of a mid-race state.

    The caller's state is not mutated; draws come from a fresh stream so
    repeated calls with distinct seeds give i.i.d. continuations.
    """
    st = state.clone()
    rng = make_rng(seed)
    start = st.tick
    while not st.all_finished():
        if st.tick - start >= config.tick_limit:
            raise RaceDivergedError(f"continuation exceeded tick_limit={config.tick_limit}")
        advance_race(st, config, rng)
    return tuple(config.competitor_ids[c] for c in _finish_order(st, config))

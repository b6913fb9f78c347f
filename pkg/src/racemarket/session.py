"""One betting session: a race, a market, and a population of agents.

The session clock runs in seconds.  Betting opens at time 0; the race
starts after the opening period, one tick every dt seconds.  Agents wake on
their own jittered periodic schedules, observe the race and the book, and
act; wakes are processed in (time, agent index) order, so the whole session
is a pure function of its configuration and produces an identical event log
on every run, whatever worker count the surrounding tooling uses.

Betting closes when the configured number of competitors has finished; the
race always runs to completion and the market settles on the actual winner.
The event log is a list of dicts with gap-free increasing seq numbers,
ready to be written as JSON lines.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .agents import (
    AgentParams,
    Bettor,
    CancelOrder,
    Observation,
    OpenBet,
    PlaceOrder,
    make_bettor,
)
from .exchange import (
    OPEN,
    ExchangeError,
    MarketBook,
    Money,
    SettlementReport,
    odds_to_decimal,
)
from .race import (
    RaceConfig,
    RaceDivergedError,
    Trajectory,
    advance_race,
    finalize_trajectory,
    initial_state,
)
from .seeding import spawn_rng


class SessionConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SessionConfig:
    race: RaceConfig
    agent_groups: tuple[AgentParams, ...]
    master_seed: int
    commission_rate: float = 0.05
    opening_period: float = 60.0
    grid_depth: int = 3
    sentiment: bool = False
    exchange_self_check: bool = False

    def validate(self) -> None:
        self.race.validate()
        for g in self.agent_groups:
            g.validate()
            if g.strategy == "ud" and self.race.n_competitors < 2:
                raise SessionConfigError("ud agents need at least two competitors")
        if not 0.0 <= self.commission_rate < 1.0:
            raise SessionConfigError(
                f"commission_rate must be in [0, 1), got {self.commission_rate}"
            )
        if self.opening_period < 0.0:
            raise SessionConfigError(
                f"opening_period must be >= 0, got {self.opening_period}"
            )
        if self.grid_depth < 1:
            raise SessionConfigError(f"grid_depth must be >= 1, got {self.grid_depth}")


@dataclass(frozen=True)
class SessionResult:
    events: list[dict]
    trajectory: Trajectory
    settlement: SettlementReport
    sentiment_rows: list[tuple[float, str, str, float]]
    final_balances: dict[str, Money]
    starting_balances: dict[str, Money]


def expand_agents(config: SessionConfig) -> list[Bettor]:
    """Instantiate the agent population with per-agent derived streams."""
    agents: list[Bettor] = []
    idx = 0
    for group in config.agent_groups:
        for _ in range(group.count):
            bettor_id = f"a{idx:03d}.{group.strategy}"
            rng = spawn_rng(config.master_seed, "agent", idx)
            agents.append(make_bettor(bettor_id, group, config.race, rng))
            idx += 1
    return agents


def wake_schedule(
    agent_params: list[AgentParams], horizon: float, master_seed: int
) -> list[tuple[float, int]]:
    """All (wake time, agent index) pairs with k * period within the horizon.

    Each agent wakes at jitter + k * reevaluate_every for
    k = 0 .. floor(horizon / reevaluate_every); jitter is drawn once per
    agent from a seed-derived stream.  Sorted by time, ties by index.
    """
    wakes: list[tuple[float, int]] = []
    for i, params in enumerate(agent_params):
        jitter = spawn_rng(master_seed, "jitter", i).uniform(0.0, params.wake_jitter)
        k = 0
        while k * params.reevaluate_every <= horizon:
            wakes.append((jitter + k * params.reevaluate_every, i))
            k += 1
    wakes.sort()
    return wakes


class _Session:
    def __init__(self, config: SessionConfig):
        config.validate()
        self.config = config
        self.race_cfg = config.race
        self.n = config.race.n_competitors
        self.rng_race = spawn_rng(config.master_seed, "race")
        self.agents = expand_agents(config)
        self.book = MarketBook(config.race.competitor_ids, config.commission_rate)
        self.book.self_check = config.exchange_self_check
        self.starting: dict[str, Money] = {}
        for agent in self.agents:
            balance = agent.params.starting_balance * 100
            self.book.open_account(agent.bettor_id, balance)
            self.starting[agent.bettor_id] = balance
        self.next_wake = [
            spawn_rng(config.master_seed, "jitter", i).uniform(0.0, a.params.wake_jitter)
            for i, a in enumerate(self.agents)
        ]
        self.state = initial_state(self.race_cfg, self.rng_race)
        self.histories: list[list[float]] = [[] for _ in range(self.n)]
        self.snapshots: list[tuple[float, ...]] = [tuple(self.state.positions)]
        self.events: list[dict] = []
        self.sentiment_rows: list[tuple[float, str, str, float]] = []
        self._obs_cache: tuple[tuple, tuple, tuple] | None = None

    # -- event log ----------------------------------------------------------

    def emit(self, time: float, kind: str, payload: dict) -> None:
        self.events.append({"seq": len(self.events) + 1, "time": time, "kind": kind, **payload})

    # -- observations ---------------------------------------------------------

    def _race_view(self) -> tuple[tuple, tuple, tuple]:
        if self._obs_cache is None:
            self._obs_cache = (
                tuple(self.state.positions),
                tuple(self.state.finish_ticks),
                tuple(tuple(h) for h in self.histories),
            )
        return self._obs_cache

    def _observe(self, time: float, agent: Bettor) -> Observation:
        positions, finish_ticks, history = self._race_view()
        my_bets = tuple(
            OpenBet(b.bet_id, b.competitor_id, b.side, b.odds, b.unmatched, b.arrival_time)
            for b in self.book.bets_of(agent.bettor_id)
            if b.unmatched > 0
        )
        return Observation(
            time=time,
            race_tick=self.state.tick,
            positions=positions,
            finish_ticks=finish_ticks,
            step_history=history,
            grid=self.book.market_grid(self.config.grid_depth),
            my_bets=my_bets,
            balance=self.book.free_balance(agent.bettor_id),
        )

    # -- agent turns ----------------------------------------------------------

    def _apply(self, time: float, agent: Bettor, action) -> None:
        if isinstance(action, CancelOrder):
            try:
                cancelled = self.book.cancel_bet(action.bet_id, agent.bettor_id, time)
            except ExchangeError as exc:
                self.emit(time, "reject", {"bettor": agent.bettor_id, "reason": str(exc)})
                return
            self.emit(
                time,
                "cancel",
                {"bettor": agent.bettor_id, "bet_id": action.bet_id, "cancelled": cancelled},
            )
            return
        assert isinstance(action, PlaceOrder)
        try:
            bet_id, records = self.book.submit_bet(
                agent.bettor_id,
                action.competitor_id,
                action.side,
                action.odds,
                action.stake,
                time,
            )
        except ExchangeError as exc:
            self.emit(time, "reject", {"bettor": agent.bettor_id, "reason": str(exc)})
            return
        self.emit(
            time,
            "submit",
            {
                "bettor": agent.bettor_id,
                "competitor": action.competitor_id,
                "side": action.side,
                "odds": odds_to_decimal(action.odds),
                "stake": action.stake,
                "bet_id": bet_id,
                "matched": sum(r.amount for r in records),
            },
        )
        for rec in records:
            self.emit(
                time,
                "match",
                {
                    "competitor": rec.competitor_id,
                    "odds": odds_to_decimal(rec.odds),
                    "amount": rec.amount,
                    "back_bet": rec.back_bet_id,
                    "lay_bet": rec.lay_bet_id,
                    "back_bettor": rec.back_bettor,
                    "lay_bettor": rec.lay_bettor,
                },
            )

    def _wake(self, time: float, i: int) -> None:
        agent = self.agents[i]
        obs = self._observe(time, agent)
        actions = agent.decide(obs)
        if self.config.sentiment and agent.last_prediction is not None:
            odds = [
                min(1.0 / p, 1000.0) if p > 0.0 else 1000.0 for p in agent.last_prediction
            ]
            self.emit(
                time,
                "sentiment",
                {"bettor": agent.bettor_id, "odds": [round(o, 4) for o in odds]},
            )
            for cid, o in zip(self.race_cfg.competitor_ids, odds):
                self.sentiment_rows.append((time, agent.bettor_id, cid, round(o, 4)))
        for action in actions:
            self._apply(time, agent, action)

    def _process_wakes(self, until: float) -> None:
        due: list[tuple[float, int]] = []
        for i, agent in enumerate(self.agents):
            period = agent.params.reevaluate_every
            while self.next_wake[i] <= until:
                due.append((self.next_wake[i], i))
                self.next_wake[i] += period
        due.sort()
        for time, i in due:
            self._wake(time, i)

    # -- main loop ----------------------------------------------------------

    def run(self) -> SessionResult:
        cfg = self.config
        race_cfg = self.race_cfg
        close_rank = race_cfg.betting_close.close_rank(self.n)
        self._process_wakes(cfg.opening_period)

        time = cfg.opening_period
        while not self.state.all_finished():
            if self.state.tick >= race_cfg.tick_limit:
                raise RaceDivergedError(f"session race exceeded tick_limit={race_cfg.tick_limit}")
            racing_before = [t is None for t in self.state.finish_ticks]
            advance_race(self.state, race_cfg, self.rng_race)
            self._obs_cache = None
            time = cfg.opening_period + self.state.tick * race_cfg.dt
            self.snapshots.append(tuple(self.state.positions))
            for c in range(self.n):
                if racing_before[c]:
                    self.histories[c].append(self.state.prev_steps[c])
            self.emit(
                time,
                "race_tick",
                {"tick": self.state.tick, "positions": list(self.state.positions)},
            )
            if self.book.state == OPEN and self.state.finished_count() >= close_rank:
                expired = self.book.close_betting(time)
                refunds: dict[str, Money] = {}
                for bet_id, bettor_id, amount, refund in expired:
                    refunds[bettor_id] = refunds.get(bettor_id, 0) + refund
                    self.emit(
                        time,
                        "expire",
                        {"bet_id": bet_id, "bettor": bettor_id, "amount": amount, "refund": refund},
                    )
                self.emit(
                    time,
                    "close",
                    {"refunds": [[b, refunds[b]] for b in sorted(refunds)]},
                )
            self.emit(time, "grid_snapshot", {"grid": self._grid_payload()})
            if self.book.state == OPEN:
                self._process_wakes(time)

        trajectory = finalize_trajectory(self.state, race_cfg, self.snapshots)
        report = self.book.settle(trajectory.winner, time=time)
        self.emit(
            time,
            "settle",
            {
                "winner": report.winner,
                "total_commission": report.total_commission,
                "rows": [[r.bettor_id, r.gross, r.commission, r.net] for r in report.rows],
            },
        )
        final = {b: acct.balance for b, acct in sorted(self.book.accounts.items())}
        return SessionResult(
            events=self.events,
            trajectory=trajectory,
            settlement=report,
            sentiment_rows=self.sentiment_rows,
            final_balances=final,
            starting_balances=self.starting,
        )

    def _grid_payload(self) -> dict:
        grid = self.book.market_grid(self.config.grid_depth)
        return {
            cid: {
                "backs": [[odds_to_decimal(l.odds), l.stake] for l in row.backs],
                "lays": [[odds_to_decimal(l.odds), l.stake] for l in row.lays],
            }
            for cid, row in grid.items()
        }


def run_session(config: SessionConfig) -> SessionResult:
    """Run one full session: open, trade in play, close, settle."""
    return _Session(config).run()

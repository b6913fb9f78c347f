"""In-play betting exchange for a single winner market.

Money is held as integer minor units (cents).  Odds are decimal odds stored
as integer hundredths and must sit on the quantized ladder.  Back and lay
bets carry stakes in backer-stake units; a lay bet escrows its worst-case
liability stake * (odds - 1).  Matching is exact-odds with price-time
priority: an incoming bet trades against the oldest resting opposite bet at
the same odds, partial fills rest in the book, and the matched portion of a
bet is immutable.  Unmatched portions can be cancelled while the market is
open and expire with their escrow returned when betting closes.

Settlement transfers, per match record, the backer winnings on the market
winner and the backer stake on every loser, nets each bettor's market
result, and charges commission on positive nets only.  Per-record winnings
are floored to a cent so the escrowed (ceiling) liability always covers
them; commission rounds half up.  The sum of all bettor deltas plus total
commission is exactly zero.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from collections import deque
from dataclasses import dataclass

Money = int  # integer minor currency units

MIN_ODDS = 101  # 1.01 in hundredths
MAX_ODDS = 100_000  # 1000.0 in hundredths

BACK = "back"
LAY = "lay"

OPEN = "open"
CLOSED = "closed"
SETTLED = "settled"


class ExchangeError(Exception):
    """Base class for exchange rule violations."""


class MarketClosedError(ExchangeError):
    pass


class InvalidOddsError(ExchangeError):
    pass


class InsufficientFundsError(ExchangeError):
    pass


class UnknownBetError(ExchangeError):
    """Bet id not found, or not owned by the requesting bettor."""


class SettlementError(ExchangeError):
    pass


def _build_ladder() -> tuple[int, ...]:
    bands = (
        (101, 200, 1),
        (200, 300, 2),
        (300, 400, 5),
        (400, 600, 10),
        (600, 1000, 20),
        (1000, 2000, 50),
        (2000, 3000, 100),
        (3000, 5000, 200),
        (5000, 10_000, 500),
        (10_000, 100_000, 1000),
    )
    vals: list[int] = []
    for lo, hi, step in bands:
        vals.extend(range(lo, hi, step))
    vals.append(MAX_ODDS)
    return tuple(vals)


LADDER: tuple[int, ...] = _build_ladder()
_LADDER_SET = frozenset(LADDER)


def on_ladder(odds: int) -> bool:
    return odds in _LADDER_SET


def quantize_odds(raw: float) -> int:
    """Snap raw decimal odds (> 1.0) to the nearest ladder value, ties up.

    Raw values between 1.0 and 1.01 clamp to 1.01; values above 1000 clamp
    to 1000.  Returns integer hundredths.
    """
    if not raw > 1.0:
        raise InvalidOddsError(f"decimal odds must be > 1.0, got {raw}")
    # Work in 1e-5 odds units so written decimals like 2.01 land exactly
    # between ladder neighbours instead of a float hair to one side.
    h = round(raw * 100_000)
    if h <= MIN_ODDS * 1000:
        return MIN_ODDS
    if h >= MAX_ODDS * 1000:
        return MAX_ODDS
    i = bisect_left(LADDER, -(-h // 1000))
    lo, hi = LADDER[i - 1], LADDER[i]
    if h * 2 >= (lo + hi) * 1000:  # midpoint or above rounds up
        return hi
    return lo


def odds_to_decimal(odds: int) -> float:
    return odds / 100.0


def ladder_band(lo_decimal: float, hi_decimal: float) -> tuple[int, ...]:
    """All ladder values v with lo <= v/100 <= hi, ascending."""
    lo_h = round(lo_decimal * 100)
    hi_h = round(hi_decimal * 100)
    return tuple(v for v in LADDER if lo_h <= v <= hi_h)


def back_winnings(amount: Money, odds: int) -> Money:
    """Backer profit on a win, floored to a cent.  Stake is returned on top."""
    return amount * (odds - 100) // 100


def lay_liability(amount: Money, odds: int) -> Money:
    """Worst-case layer exposure for a backer-stake amount, ceiling to a cent."""
    return -((-amount * (odds - 100)) // 100)


def commission_due(gross: Money, rate: float) -> Money:
    """Commission on positive net market winnings, rounded half up."""
    if gross <= 0:
        return 0
    return math.floor(gross * rate + 0.5)


@dataclass
class Account:
    bettor_id: str
    balance: Money
    reserved: Money = 0

    def reserve(self, amount: Money) -> None:
        if amount > self.balance:
            raise InsufficientFundsError(
                f"{self.bettor_id}: need {amount}, free {self.balance}"
            )
        self.balance -= amount
        self.reserved += amount

    def release(self, amount: Money) -> None:
        assert 0 <= amount <= self.reserved
        self.reserved -= amount
        self.balance += amount


@dataclass
class Bet:
    bet_id: int
    bettor_id: str
    competitor_id: str
    side: str
    odds: int
    stake: Money
    arrival_seq: int
    arrival_time: float
    matched: Money = 0
    unmatched: Money = 0
    reserved: Money = 0


@dataclass(frozen=True)
class MatchRecord:
    match_id: int
    competitor_id: str
    odds: int
    amount: Money
    back_bet_id: int
    lay_bet_id: int
    back_bettor: str
    lay_bettor: str
    time: float


@dataclass(frozen=True)
class GridLevel:
    odds: int
    stake: Money


@dataclass(frozen=True)
class GridRow:
    """Top-of-book view for one competitor.

    backs hold resting back bets, best level first for a would-be layer
    (highest odds first); lays hold resting lay bets, lowest odds first.
    """

    backs: tuple[GridLevel, ...]
    lays: tuple[GridLevel, ...]

    @property
    def best_back(self) -> GridLevel | None:
        return self.backs[0] if self.backs else None

    @property
    def best_lay(self) -> GridLevel | None:
        return self.lays[0] if self.lays else None


@dataclass(frozen=True)
class SettlementRow:
    bettor_id: str
    gross: Money
    commission: Money
    net: Money


@dataclass(frozen=True)
class SettlementReport:
    winner: str
    rows: tuple[SettlementRow, ...]
    total_commission: Money


class MarketBook:
    """Winner market over a fixed set of competitors with bettor accounts."""

    def __init__(self, competitor_ids, commission_rate: float = 0.05):
        ids = tuple(competitor_ids)
        if len(ids) != len(set(ids)) or not ids:
            raise ExchangeError(f"competitor ids must be unique and non-empty, got {ids}")
        if not 0.0 <= commission_rate < 1.0:
            raise ExchangeError(f"commission_rate must be in [0, 1), got {commission_rate}")
        self.competitor_ids = ids
        self.commission_rate = commission_rate
        self.state = OPEN
        self.bets: dict[int, Bet] = {}
        self.matches: list[MatchRecord] = []
        self.accounts: dict[str, Account] = {}
        # competitor -> side -> odds -> FIFO of resting bets with unmatched > 0
        self._queues: dict[str, dict[str, dict[int, deque[Bet]]]] = {
            cid: {BACK: {}, LAY: {}} for cid in ids
        }
        self._by_bettor: dict[str, list[Bet]] = {}
        self._next_id = 1
        self.self_check = False
        self.self_checks_run = 0

    # -- accounts ---------------------------------------------------------

    def open_account(self, bettor_id: str, balance: Money) -> Account:
        if bettor_id in self.accounts:
            raise ExchangeError(f"account {bettor_id!r} already exists")
        if balance < 0:
            raise ExchangeError(f"starting balance must be >= 0, got {balance}")
        acct = Account(bettor_id, balance)
        self.accounts[bettor_id] = acct
        return acct

    def free_balance(self, bettor_id: str) -> Money:
        return self.accounts[bettor_id].balance

    def bets_of(self, bettor_id: str) -> list[Bet]:
        """All bets ever submitted by a bettor, in arrival order."""
        return self._by_bettor.get(bettor_id, [])

    # -- order flow -------------------------------------------------------

    def submit_bet(
        self,
        bettor_id: str,
        competitor_id: str,
        side: str,
        odds: int,
        stake: Money,
        time: float = 0.0,
    ) -> tuple[int, list[MatchRecord]]:
        """Accept a bet, match what crosses, rest the remainder.

        Returns the new bet id and the match records created, oldest
        counterparty first.  Raises without side effects on any rule
        violation.
        """
        if self.state != OPEN:
            raise MarketClosedError(f"market is {self.state}")
        acct = self.accounts.get(bettor_id)
        if acct is None:
            raise ExchangeError(f"unknown bettor {bettor_id!r}")
        if competitor_id not in self._queues:
            raise ExchangeError(f"unknown competitor {competitor_id!r}")
        if side not in (BACK, LAY):
            raise ExchangeError(f"side must be 'back' or 'lay', got {side!r}")
        if not on_ladder(odds):
            raise InvalidOddsError(f"odds {odds} not on the ladder")
        if not isinstance(stake, int) or stake <= 0:
            raise ExchangeError(f"stake must be a positive integer, got {stake!r}")

        need = stake if side == BACK else lay_liability(stake, odds)
        acct.reserve(need)

        bet = Bet(
            bet_id=self._next_id,
            bettor_id=bettor_id,
            competitor_id=competitor_id,
            side=side,
            odds=odds,
            stake=stake,
            arrival_seq=self._next_id,
            arrival_time=time,
            unmatched=stake,
            reserved=need,
        )
        self._next_id += 1
        self.bets[bet.bet_id] = bet
        self._by_bettor.setdefault(bettor_id, []).append(bet)

        records: list[MatchRecord] = []
        opp_side = LAY if side == BACK else BACK
        levels = self._queues[competitor_id][opp_side]
        queue = levels.get(odds)
        while bet.unmatched > 0 and queue:
            resting = queue[0]
            amount = min(bet.unmatched, resting.unmatched)
            back_bet, lay_bet = (bet, resting) if side == BACK else (resting, bet)
            rec = MatchRecord(
                match_id=len(self.matches) + len(records) + 1,
                competitor_id=competitor_id,
                odds=odds,
                amount=amount,
                back_bet_id=back_bet.bet_id,
                lay_bet_id=lay_bet.bet_id,
                back_bettor=back_bet.bettor_id,
                lay_bettor=lay_bet.bettor_id,
                time=time,
            )
            records.append(rec)
            bet.matched += amount
            bet.unmatched -= amount
            resting.matched += amount
            resting.unmatched -= amount
            if resting.unmatched == 0:
                queue.popleft()
        if queue is not None and not queue:
            del levels[odds]
        if bet.unmatched > 0:
            own = self._queues[competitor_id][side]
            own.setdefault(odds, deque()).append(bet)
        self.matches.extend(records)
        self._maybe_self_check()
        return bet.bet_id, records

    def cancel_bet(self, bet_id: int, bettor_id: str, time: float = 0.0) -> Money:
        """Remove the unmatched portion of an own bet; returns the amount.

        Returns 0 when nothing was left to cancel (fully matched or already
        cancelled), so callers can tell a no-op from a real cancellation.
        """
        if self.state != OPEN:
            raise MarketClosedError(f"market is {self.state}")
        bet = self.bets.get(bet_id)
        if bet is None or bet.bettor_id != bettor_id:
            raise UnknownBetError(f"no bet {bet_id} for bettor {bettor_id!r}")
        if bet.unmatched == 0:
            return 0
        cancelled = self._retire_unmatched(bet)
        self._maybe_self_check()
        return cancelled

    def _retire_unmatched(self, bet: Bet) -> Money:
        amount = bet.unmatched
        levels = self._queues[bet.competitor_id][bet.side]
        queue = levels.get(bet.odds)
        if queue is not None:
            try:
                queue.remove(bet)
            except ValueError:
                pass
            if not queue:
                del levels[bet.odds]
        bet.unmatched = 0
        keep = bet.matched if bet.side == BACK else lay_liability(bet.matched, bet.odds)
        release = bet.reserved - keep
        self.accounts[bet.bettor_id].release(release)
        bet.reserved = keep
        return amount

    # -- views ------------------------------------------------------------

    def market_grid(self, depth: int = 3) -> dict[str, GridRow]:
        """Aggregated top-of-book per competitor, depth levels per side."""
        grid: dict[str, GridRow] = {}
        for cid in self.competitor_ids:
            sides = self._queues[cid]
            backs = tuple(
                GridLevel(odds, sum(b.unmatched for b in sides[BACK][odds]))
                for odds in sorted(sides[BACK], reverse=True)[:depth]
            )
            lays = tuple(
                GridLevel(odds, sum(b.unmatched for b in sides[LAY][odds]))
                for odds in sorted(sides[LAY])[:depth]
            )
            grid[cid] = GridRow(backs=backs, lays=lays)
        return grid

    def ladder_view(self, competitor_id: str) -> tuple[tuple[int, Money, Money], ...]:
        """(odds, back stake, lay stake) for every level with liquidity, ascending."""
        if competitor_id not in self._queues:
            raise ExchangeError(f"unknown competitor {competitor_id!r}")
        sides = self._queues[competitor_id]
        levels = sorted(set(sides[BACK]) | set(sides[LAY]))
        return tuple(
            (
                odds,
                sum(b.unmatched for b in sides[BACK].get(odds, ())),
                sum(b.unmatched for b in sides[LAY].get(odds, ())),
            )
            for odds in levels
        )

    # -- lifecycle --------------------------------------------------------

    def close_betting(self, time: float = 0.0) -> list[tuple[int, str, Money, Money]]:
        """Close the market, expiring all unmatched portions.

        Returns one (bet_id, bettor_id, expired_amount, released_escrow)
        row per affected bet, in bet id order.
        """
        if self.state != OPEN:
            raise MarketClosedError(f"market is {self.state}")
        self.state = CLOSED
        expired: list[tuple[int, str, Money, Money]] = []
        for bet_id in sorted(self.bets):
            bet = self.bets[bet_id]
            if bet.unmatched > 0:
                before = bet.reserved
                amount = self._retire_unmatched(bet)
                expired.append((bet_id, bet.bettor_id, amount, before - bet.reserved))
        self._maybe_self_check()
        return expired

    def settle(self, winner: str, commission_rate: float | None = None, time: float = 0.0) -> SettlementReport:
        """Pay out every match record against the actual winner.

        Nets each bettor's gross market result, charges commission on
        positive nets, releases every remaining escrow, and freezes the
        book.  Sum of all net deltas plus total commission is exactly 0.
        """
        if self.state == SETTLED:
            raise SettlementError("market already settled")
        if self.state != CLOSED:
            raise SettlementError("close betting before settling")
        if winner not in self._queues:
            raise SettlementError(f"unknown winner {winner!r}")
        rate = self.commission_rate if commission_rate is None else commission_rate
        if not 0.0 <= rate < 1.0:
            raise SettlementError(f"commission_rate must be in [0, 1), got {rate}")

        gross: dict[str, Money] = {b: 0 for b in self.accounts}
        for rec in self.matches:
            if rec.competitor_id == winner:
                w = back_winnings(rec.amount, rec.odds)
                gross[rec.back_bettor] += w
                gross[rec.lay_bettor] -= w
            else:
                gross[rec.lay_bettor] += rec.amount
                gross[rec.back_bettor] -= rec.amount

        for bet in self.bets.values():
            if bet.reserved > 0:
                self.accounts[bet.bettor_id].release(bet.reserved)
                bet.reserved = 0

        rows = []
        total_commission = 0
        for bettor_id in sorted(self.accounts):
            g = gross[bettor_id]
            fee = commission_due(g, rate)
            net = g - fee
            self.accounts[bettor_id].balance += net
            total_commission += fee
            rows.append(SettlementRow(bettor_id, g, fee, net))
        self.state = SETTLED
        return SettlementReport(winner=winner, rows=tuple(rows), total_commission=total_commission)

    # -- integrity --------------------------------------------------------

    def check_no_cross(self) -> None:
        """Assert no competitor has resting backs and lays at the same odds."""
        for cid, sides in self._queues.items():
            crossed = set(sides[BACK]) & set(sides[LAY])
            if crossed:
                raise AssertionError(f"crossed book on {cid!r} at odds {sorted(crossed)}")

    def check_accounts(self) -> None:
        """Assert escrow totals reconcile with per-bet reservations."""
        held: dict[str, Money] = {b: 0 for b in self.accounts}
        for bet in self.bets.values():
            held[bet.bettor_id] += bet.reserved
        for bettor_id, acct in self.accounts.items():
            if acct.balance < 0 or acct.reserved < 0:
                raise AssertionError(f"negative account field for {bettor_id!r}")
            if acct.reserved != held[bettor_id]:
                raise AssertionError(
                    f"escrow mismatch for {bettor_id!r}: "
                    f"account {acct.reserved}, bets {held[bettor_id]}"
                )

    def _maybe_self_check(self) -> None:
        if self.self_check:
            self.check_no_cross()
            self.check_accounts()
            self.self_checks_run += 1

    def queue_snapshot(self) -> dict:
        """Canonical resting-book dump for equivalence and replay tests."""
        snap: dict = {}
        for cid in self.competitor_ids:
            sides = self._queues[cid]
            snap[cid] = {
                side: {
                    odds: [(b.bet_id, b.unmatched) for b in sides[side][odds]]
                    for odds in sorted(sides[side])
                }
                for side in (BACK, LAY)
            }
        return snap

    def total_matched(self) -> Money:
        return sum(rec.amount for rec in self.matches)

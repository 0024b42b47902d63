"""Recurring-charge mining, next-occurrence prediction and large-expense lists.

Chains are built backward from recent transactions: from a chain's oldest
member we step back one nominal period and look for a same-biller
transaction (same category) within the frequency's date window. A chain
that reaches four windows is a recurring transaction.
"""

from __future__ import annotations

import calendar
import enum
from collections import defaultdict
from dataclasses import dataclass
from datetime import date, timedelta
from typing import Iterable, Sequence

import numpy as np

from .model import Category, Ledger, Transaction
from .textsim import DEFAULT, SimilarityConfig, is_same_biller

DEPTH = 4


class Frequency(enum.Enum):
    # (backtrack days, window days)
    MONTHLY = (31, 7)
    SEMIMONTHLY = (15, 7)
    BIWEEKLY = (14, 2)
    WEEKLY = (7, 2)

    @property
    def backtrack_days(self) -> int:
        return self.value[0]

    @property
    def window_days(self) -> int:
        return self.value[1]

    @property
    def label(self) -> str:
        return self.name.lower()

    def advance(self, d: date, periods: int = 1) -> date:
        """Nominal date ``periods`` periods after ``d``."""
        if self is Frequency.MONTHLY:
            return add_months(d, periods)
        return d + timedelta(days=self.backtrack_days * periods)


# longest period first; used to resolve multi-frequency duplicates
FREQUENCIES = (Frequency.MONTHLY, Frequency.SEMIMONTHLY, Frequency.BIWEEKLY, Frequency.WEEKLY)


def add_months(d: date, months: int) -> date:
    """Calendar-month addition clamped to the target month's last day."""
    m = d.month - 1 + months
    year, month = d.year + m // 12, m % 12 + 1
    return date(year, month, min(d.day, calendar.monthrange(year, month)[1]))


@dataclass(frozen=True)
class RecurringTransaction:
    account_id: str
    frequency: Frequency
    representative_description: str
    category: Category
    mean_amount: float
    last_date: date
    support: tuple[Transaction, ...]  # newest first

    @property
    def is_inflow(self) -> bool:
        return self.mean_amount < 0

    def matches(self, tx: Transaction, simcfg: SimilarityConfig = DEFAULT) -> bool:
        return (
            tx.account_id == self.account_id
            and tx.category is self.category
            and is_same_biller(tx.description, self.representative_description, simcfg)
        )


@dataclass(frozen=True)
class NextOccurrence:
    recurring: RecurringTransaction
    predicted_date: date
    predicted_amount: float


@dataclass(frozen=True)
class LargeExpense:
    description: str
    approximate_cost: float
    source_user: str


def _sort_key(t: Transaction) -> tuple:
    return (t.date, t.description, t.amount_cents, t.category.value, t.category_label)


def _build_chain(
    seed: Transaction,
    pool: Sequence[Transaction],
    freq: Frequency,
    simcfg: SimilarityConfig,
    depth: int,
) -> list[Transaction] | None:
    chain = [seed]
    while len(chain) < depth:
        cur = chain[-1]
        target = cur.date - timedelta(days=freq.backtrack_days)
        lo = target - timedelta(days=freq.window_days)
        hi = target + timedelta(days=freq.window_days)
        candidates = [
            t for t in pool
            if lo <= t.date <= hi and t.date < cur.date and any(is_same_biller(t.description, c.description, simcfg) for c in chain)
        ]
        if not candidates:
            return None
        pick = min(candidates, key=lambda t: (abs((t.date - target).days), _sort_key(t)))
        # consecutive occurrences only: another same-biller charge strictly
        # between pick and cur means the true period is shorter
        between = any(
            pick.date < t.date < cur.date and is_same_biller(t.description, cur.description, simcfg)
            for t in pool
        )
        if between:
            return None
        chain.append(pick)
    return chain


def extract_recurring(
    transactions: Iterable[Transaction],
    as_of: date,
    frequency: Frequency,
    simcfg: SimilarityConfig = DEFAULT,
    depth: int = DEPTH,
) -> list[RecurringTransaction]:
    """Recurring charges of one frequency that are active at ``as_of``.

    Seeds are the transactions of the most recent period (one backtrack
    plus one window ending at ``as_of``), newest first; each seed grows a
    chain backward until it spans ``depth`` windows or breaks.
    """
    txs = sorted((t for t in transactions if t.date <= as_of), key=_sort_key)
    groups: dict[tuple[str, Category], list[Transaction]] = defaultdict(list)
    for t in txs:
        groups[(t.account_id, t.category)].append(t)
    seed_from = as_of - timedelta(days=frequency.backtrack_days + frequency.window_days)
    found: list[RecurringTransaction] = []
    for (account_id, category), pool in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        used: set[Transaction] = set()
        for seed in reversed(pool):
            if seed.date <= seed_from:
                break
            if seed in used:
                continue
            # a newer same-biller charge already anchors this biller's chain
            if any(is_same_biller(seed.description, u.description, simcfg) for u in used if u.date > seed.date):
                continue
            chain = _build_chain(seed, pool, frequency, simcfg, depth)
            if chain is None:
                continue
            used.update(chain)
            amounts = [t.amount_cents for t in chain]
            found.append(
                RecurringTransaction(
                    account_id=account_id,
                    frequency=frequency,
                    representative_description=seed.description,
                    category=category,
                    mean_amount=float(np.mean(amounts)) / 100.0,
                    last_date=seed.date,
                    support=tuple(chain),
                )
            )
    return found


def extract_all_recurring(
    transactions: Iterable[Transaction],
    as_of: date,
    simcfg: SimilarityConfig = DEFAULT,
    depth: int = DEPTH,
) -> list[RecurringTransaction]:
    """Union over the four frequencies; overlapping chains keep the longest period."""
    txs = list(transactions)
    kept: list[RecurringTransaction] = []
    claimed: set[Transaction] = set()
    for freq in FREQUENCIES:
        for rec in extract_recurring(txs, as_of, freq, simcfg, depth):
            if claimed.intersection(rec.support):
                continue
            kept.append(rec)
        claimed.update(t for r in kept for t in r.support)
    return sorted(kept, key=lambda r: (r.account_id, r.last_date, r.representative_description, r.frequency.backtrack_days))


def predict_next(recurring: RecurringTransaction, after: date | None = None) -> NextOccurrence:
    """Last date plus one nominal period (advanced past ``after`` if given)."""
    k = 1
    when = recurring.frequency.advance(recurring.last_date, k)
    while after is not None and when <= after:
        k += 1
        when = recurring.frequency.advance(recurring.last_date, k)
    amount = float(np.mean([t.amount_cents for t in recurring.support])) / 100.0
    return NextOccurrence(recurring, when, amount)


def scheduled_occurrences(recurring: RecurringTransaction, start: date, end: date) -> list[date]:
    """Predicted dates in ``(start, end]`` obtained by iterating the period."""
    out = []
    k = 1
    while True:
        when = recurring.frequency.advance(recurring.last_date, k)
        if when > end:
            return out
        if when > start:
            out.append(when)
        k += 1


def recurring_history(
    transactions: Sequence[Transaction],
    start: date,
    end: date,
    simcfg: SimilarityConfig = DEFAULT,
    stride_days: int = 7,
) -> set[Transaction]:
    """All transactions in ``[start, end]`` that belong to some recurring chain.

    Extraction is repeated at as-of dates every ``stride_days`` so chains
    that lapsed before ``end`` are found too; transactions of the same
    biller as a found chain count as recurring as well.
    """
    txs = [t for t in transactions if t.date <= end]
    recs: list[RecurringTransaction] = []
    as_of = end
    while as_of >= start:
        recs.extend(extract_all_recurring(txs, as_of, simcfg))
        as_of -= timedelta(days=stride_days)
    marked: set[Transaction] = set()
    for t in txs:
        if t.date < start:
            continue
        if any(r.matches(t, simcfg) for r in recs):
            marked.add(t)
    for r in recs:
        marked.update(t for t in r.support if t.date >= start)
    return marked


def unexpected_large_expenses(
    ledger: Ledger,
    simcfg: SimilarityConfig = DEFAULT,
    quantile: float = 90.0,
) -> list[LargeExpense]:
    """Top-decile non-recurring outflows per user, one per biller, pooled."""
    pooled: list[LargeExpense] = []
    for user, account_ids in ledger.users().items():
        remaining: list[Transaction] = []
        for acc in account_ids:
            txs = ledger.account_transactions(acc)
            if not txs:
                continue
            recurring = recurring_history(txs, txs[0].date, txs[-1].date, simcfg)
            remaining.extend(t for t in txs if t not in recurring)
        outflows = [t for t in remaining if t.is_outflow]
        if not outflows:
            continue
        cutoff = np.percentile([t.amount_cents for t in outflows], quantile)
        top = sorted((t for t in outflows if t.amount_cents >= cutoff), key=lambda t: (-t.amount_cents, _sort_key(t)))
        reps: list[Transaction] = []
        for t in top:
            if not any(is_same_biller(t.description, r.description, simcfg) for r in reps):
                reps.append(t)
        pooled.extend(LargeExpense(t.description, t.amount, user) for t in reps)
    return pooled

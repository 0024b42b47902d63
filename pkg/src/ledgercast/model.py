"""Core ledger types and balance reconstruction.

Amounts follow the outflow-positive convention: spending is positive,
income is negative (a $1000 direct deposit is stored as -1000). Money is
held as integer cents; floats only appear in the numeric kernels.
"""

from __future__ import annotations

import enum
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field, replace
from datetime import date, timedelta
from decimal import Decimal, InvalidOperation
from typing import Iterable, Mapping

import numpy as np


class LedgerError(ValueError):
    """Invalid ledger data or an impossible request against it."""


class Category(enum.Enum):
    BANK_FEES = "BankFees"
    CASH_ADVANCE = "CashAdvance"
    COMMUNITY = "Community"
    FOOD_AND_DRINK = "FoodAndDrink"
    HEALTHCARE = "Healthcare"
    INTEREST = "Interest"
    PAYMENT = "Payment"
    RECREATION = "Recreation"
    SERVICE = "Service"
    SHOPS = "Shops"
    TRAVEL = "Travel"
    TRANSFER = "Transfer"
    UNLABELED = "NA"

    @classmethod
    def parse(cls, label: str) -> Category | None:
        """Map a raw label such as ``"Food & Drink"`` or ``"Service - Insurance"``.

        Returns None for labels that name no known category; empty and
        ``NA`` labels map to UNLABELED.
        """
        text = label.strip()
        if not text or text.upper() in ("NA", "N/A"):
            return cls.UNLABELED
        head = re.split(r"\s+-\s+|,", text, maxsplit=1)[0]
        key = re.sub(r"[^a-z]", "", head.lower().replace("&", "and"))
        return _CATEGORY_KEYS.get(key)


_CATEGORY_KEYS = {re.sub(r"[^a-z]", "", c.value.lower()): c for c in Category}
_CATEGORY_KEYS["food"] = Category.FOOD_AND_DRINK
_CATEGORY_KEYS["unlabeled"] = Category.UNLABELED


class Step(enum.Enum):
    DAILY = "daily"
    WEEKLY = "weekly"

    @property
    def days(self) -> int:
        return 1 if self is Step.DAILY else 7


class AccountKind(enum.Enum):
    CHECKING = "checking"
    SAVINGS = "savings"
    OTHER = "other"


def to_cents(value: str | int | float | Decimal) -> int:
    """Parse a currency amount into integer cents (half-up at the cent)."""
    try:
        d = Decimal(str(value).strip())
    except InvalidOperation as exc:
        raise LedgerError(f"unparseable amount {value!r}") from exc
    if not d.is_finite():
        raise LedgerError(f"non-finite amount {value!r}")
    return int(d.scaleb(2).quantize(Decimal(1), rounding="ROUND_HALF_UP"))


def format_cents(cents: int) -> str:
    sign = "-" if cents < 0 else ""
    whole, frac = divmod(abs(cents), 100)
    return f"{sign}{whole}" if frac == 0 else f"{sign}{whole}.{frac:02d}"


@dataclass(frozen=True, order=True)
class Transaction:
    account_id: str
    date: date
    description: str
    amount_cents: int
    category: Category = field(default=Category.UNLABELED, compare=False)
    # Raw label as delivered by the source (e.g. "Service - Subscription").
    category_label: str = field(default="", compare=False)

    @property
    def amount(self) -> float:
        return self.amount_cents / 100.0

    @property
    def is_outflow(self) -> bool:
        return self.amount_cents > 0


@dataclass(frozen=True)
class Account:
    account_id: str
    user_id: str
    kind: AccountKind
    balance_cents: int
    as_of: date

    @property
    def current_balance(self) -> float:
        return self.balance_cents / 100.0


def step_index(start: date, step: Step, when: date) -> int:
    """Index of the step holding ``when`` in a series whose step 0 ends on ``start``.

    Weekly steps are labelled by their last day, so a Monday belongs to the
    step ending the following Sunday.
    """
    offset = (when - start).days
    if step is Step.DAILY:
        return offset
    return -((-offset) // 7)


def week_end(d: date) -> date:
    """The Sunday closing the ISO week containing ``d``."""
    return d + timedelta(days=6 - d.weekday())


@dataclass(frozen=True)
class BalanceSeries:
    """End-of-step balances; ``start_date`` is the last day of step 0."""

    account_id: str
    start_date: date
    step: Step
    cents: np.ndarray

    def __post_init__(self) -> None:
        if len(self.cents) < 1:
            raise LedgerError("balance series must be non-empty")

    @property
    def values(self) -> np.ndarray:
        return self.cents / 100.0

    def __len__(self) -> int:
        return len(self.cents)

    def date_at(self, index: int) -> date:
        return self.start_date + timedelta(days=index * self.step.days)

    def index_of(self, when: date) -> int:
        return step_index(self.start_date, self.step, when)

    @property
    def end_date(self) -> date:
        return self.date_at(len(self) - 1)


@dataclass(frozen=True, eq=False)
class Ledger:
    accounts: Mapping[str, Account]
    transactions: tuple[Transaction, ...]
    train_end: date | None = None
    step: Step = Step.DAILY

    def __post_init__(self) -> None:
        txs = tuple(sorted(self.transactions, key=lambda t: (t.account_id, t.date)))
        object.__setattr__(self, "transactions", txs)
        by_account: dict[str, list[Transaction]] = defaultdict(list)
        for tx in txs:
            if tx.account_id not in self.accounts:
                raise LedgerError(f"transaction references unknown account {tx.account_id!r}")
            by_account[tx.account_id].append(tx)
        object.__setattr__(self, "_by_account", {k: tuple(v) for k, v in by_account.items()})
        if self.train_end is not None and txs:
            lo, hi = self.date_range()
            hi = max([hi] + [a.as_of for a in self.accounts.values()])
            if not lo <= self.train_end <= hi:
                raise LedgerError(f"train_end {self.train_end} outside data range {lo}..{hi}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Ledger):
            return NotImplemented
        return (
            dict(self.accounts) == dict(other.accounts)
            and _full_key(self.transactions) == _full_key(other.transactions)
            and self.train_end == other.train_end
            and self.step == other.step
        )

    def account_transactions(self, account_id: str) -> tuple[Transaction, ...]:
        if account_id not in self.accounts:
            raise LedgerError(f"unknown account {account_id!r}")
        return self._by_account.get(account_id, ())

    def users(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = defaultdict(list)
        for acc in sorted(self.accounts.values(), key=lambda a: a.account_id):
            out[acc.user_id].append(acc.account_id)
        return dict(out)

    def date_range(self) -> tuple[date, date]:
        if not self.transactions:
            raise LedgerError("ledger has no transactions")
        return min(t.date for t in self.transactions), max(t.date for t in self.transactions)

    def truncate(self, until: date) -> Ledger:
        """View of the ledger as it stood at the end of ``until``.

        Later transactions are dropped and each account's balance is rolled
        back to ``until``, so nothing after that date is observable.
        """
        accounts = {}
        for acc in self.accounts.values():
            if acc.as_of <= until:
                accounts[acc.account_id] = acc
                continue
            later = sum(t.amount_cents for t in self._by_account.get(acc.account_id, ()) if t.date > until)
            accounts[acc.account_id] = replace(acc, balance_cents=acc.balance_cents + later, as_of=until)
        kept = tuple(t for t in self.transactions if t.date <= until)
        train_end = self.train_end if self.train_end is not None and self.train_end <= until else None
        if train_end is not None and kept and train_end < min(t.date for t in kept):
            train_end = None
        return Ledger(accounts, kept, train_end, self.step)

    def after(self, start: date) -> Ledger:
        """Transactions dated strictly after ``start`` (balances unchanged)."""
        kept = tuple(t for t in self.transactions if t.date > start)
        return Ledger(dict(self.accounts), kept, None, self.step)

    def with_transactions(self, extra: Iterable[Transaction]) -> Ledger:
        return Ledger(dict(self.accounts), self.transactions + tuple(extra), self.train_end, self.step)


def _full_key(txs: Iterable[Transaction]) -> list[tuple]:
    return [(t.account_id, t.date, t.description, t.amount_cents, t.category, t.category_label) for t in txs]


def build_balance_series(
    ledger: Ledger, account_id: str, step: Step | None = None, start: date | None = None
) -> BalanceSeries:
    """Reconstruct an account's balance history backward from its current balance.

    The series runs from the step holding the first transaction (or
    ``start``) through the step holding the account's as-of date. Same-day
    transactions are netted into a single daily delta.
    """
    step = step or ledger.step
    if account_id not in ledger.accounts:
        raise LedgerError(f"unknown account {account_id!r}")
    acc = ledger.accounts[account_id]
    txs = ledger.account_transactions(account_id)
    if not txs:
        raise LedgerError(f"account {account_id!r} has no transactions")
    if txs[-1].date > acc.as_of:
        raise LedgerError(f"account {account_id!r} has transactions after its as-of date {acc.as_of}")
    first = min(txs[0].date, start) if start is not None else txs[0].date
    origin = first if step is Step.DAILY else week_end(first)
    n = step_index(origin, step, acc.as_of) + 1
    deltas = np.zeros(n, dtype=np.int64)
    for tx in txs:
        deltas[step_index(origin, step, tx.date)] += tx.amount_cents
    # balance[i-1] = balance[i] + (amounts in step i)
    cents = np.empty(n, dtype=np.int64)
    cents[-1] = acc.balance_cents
    if n > 1:
        cents[:-1] = acc.balance_cents + np.cumsum(deltas[:0:-1])[::-1]
    return BalanceSeries(account_id, origin, step, cents)


@dataclass(frozen=True)
class Standardized:
    values: np.ndarray
    mean: float
    stdev: float

    def invert(self, z: np.ndarray | float) -> np.ndarray | float:
        return np.asarray(z) * self.stdev + self.mean if self.stdev > 0 else np.full_like(np.asarray(z, dtype=float), self.mean)


def standardize(series: np.ndarray | list[float]) -> Standardized:
    """Z-score with the sample (n-1) standard deviation.

    A constant input yields zeros and ``stdev == 0``; inversion then
    restores the constant.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise LedgerError("standardize needs a 1-d series of length >= 2")
    if not np.all(np.isfinite(x)):
        raise LedgerError("standardize needs finite values")
    mean = float(x.mean())
    sd = float(x.std(ddof=1))
    if sd == 0.0 or not math.isfinite(sd) or sd <= 1e-12 * max(1.0, abs(mean)):
        return Standardized(np.zeros_like(x), mean, 0.0)
    return Standardized((x - mean) / sd, mean, sd)

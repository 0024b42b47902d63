from __future__ import annotations

from datetime import date, timedelta

import numpy as np
import pytest

from ledgercast.model import Account, AccountKind, Category, Ledger, Step, Transaction
from ledgercast.synth import wagegoal_fixture


def tx(account: str, when: date, description: str, amount: float, category: Category = Category.SHOPS, label: str = "") -> Transaction:
    return Transaction(account, when, description, int(round(amount * 100)), category, label or category.value)


def make_ledger(txs: list[Transaction], balances: dict[str, float] | None = None, as_of: date | None = None,
                train_end: date | None = None, step: Step = Step.DAILY) -> Ledger:
    """Ledger with one account per id; current balances default to 0 at the last date."""
    as_of = as_of or max(t.date for t in txs)
    balances = balances or {}
    ids = sorted({t.account_id for t in txs} | set(balances))
    accounts = {a: Account(a, f"u{a}", AccountKind.CHECKING, int(round(balances.get(a, 0.0) * 100)), as_of) for a in ids}
    return Ledger(accounts, tuple(txs), train_end, step)


def days(start: date, n: int) -> list[date]:
    return [start + timedelta(days=k) for k in range(n)]


@pytest.fixture(scope="session")
def synthetic():
    return wagegoal_fixture()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def series_corpus(arrays: dict[str, np.ndarray], window_len: int, norm_len: int, start: date = date(2020, 1, 1)):
    """Corpus over raw balance arrays (dollars, rounded to cents) with no ledger behind it."""
    from ledgercast.dtw import Corpus
    from ledgercast.model import BalanceSeries

    series = {k: BalanceSeries(k, start, Step.DAILY, np.round(np.asarray(v) * 100).astype(np.int64)) for k, v in arrays.items()}
    return Corpus(series, window_len, norm_len)


def with_canary(ledger: Ledger, account_id: str, when: date, amount: float = 4321.09) -> Ledger:
    """Ledger with one extra post-origin outflow; the current balance moves with it,
    so the history up to ``when - 1`` is unchanged."""
    from dataclasses import replace

    canary = tx(account_id, when, "CANARY WIRE OUT", amount, Category.TRANSFER)
    accounts = dict(ledger.accounts)
    accounts[account_id] = replace(accounts[account_id], balance_cents=accounts[account_id].balance_cents - canary.amount_cents)
    return Ledger(accounts, ledger.transactions + (canary,), ledger.train_end, ledger.step)


def planted_fixture(seed: int, L: int = 31, S: int = 31):
    """Target account whose last L balances, plus a continuation, sit verbatim
    (shifted by a constant) inside another account of the corpus."""
    rng = np.random.default_rng(seed)
    steps = rng.integers(-20000, 20000, size=L + S).astype(np.int64)
    path = np.cumsum(steps)  # cents: target history (L) then continuation (S)
    origin = date(2021, 7, 20)
    first = origin - timedelta(days=L - 1)
    txs = [tx("q", first - timedelta(days=5), "OPEN", 0.0)]
    bal = np.concatenate([[0], path[:L]])
    for k in range(L):
        delta = int(bal[k] - bal[k + 1])  # outflow-positive: balance falls by the amount
        txs.append(tx("q", first + timedelta(days=k), "MISC", delta / 100))
    ledger = make_ledger(txs, {"q": path[L - 1] / 100}, origin)
    noise = rng.normal(size=(3, 150)).cumsum(axis=1) * 40
    src = np.concatenate([noise[0, :40], (path + 123_456) / 100, noise[1, :30]])
    corpus = series_corpus({"src": src, "other": noise[2]}, L + S, L)
    truth = path[L:] / 100
    return ledger, origin, corpus, truth

from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ledgercast.model import (
    Account,
    AccountKind,
    Category,
    Ledger,
    LedgerError,
    Step,
    Transaction,
    build_balance_series,
    standardize,
    to_cents,
    week_end,
)

from conftest import make_ledger, tx

D0 = date(2016, 6, 21)


def test_single_inflow_backward_reconstruction():
    ledger = make_ledger([tx("1", D0 + timedelta(days=2), "Direct Deposit", -1000, Category.TRANSFER)], {"1": 0}, D0 + timedelta(days=4))
    ledger = Ledger(ledger.accounts, ledger.transactions)
    s = build_balance_series(ledger, "1", start=D0)
    assert s.values.tolist() == [-1000, -1000, 0, 0, 0]


def test_carry_forward_constant():
    ledger = make_ledger([tx("1", D0, "x", 0.0)], {"1": 42}, D0 + timedelta(days=6))
    s = build_balance_series(ledger, "1")
    assert len(s) == 7 and s.values.tolist() == [42.0] * 7


def test_table_rows_for_account_three():
    # Interest -0.01 and Direct Deposit -1000 on 6/24, current balance B on 6/25
    B = 523.17
    txs = [
        tx("3", date(2016, 6, 24), "Interest", -0.01, Category.INTEREST),
        tx("3", date(2016, 6, 24), "Direct Deposit", -1000, Category.TRANSFER),
        tx("3", date(2016, 6, 23), "Starbucks", 4.5, Category.FOOD_AND_DRINK),
    ]
    ledger = make_ledger(txs, {"3": B}, date(2016, 6, 25))
    s = build_balance_series(ledger, "3")
    assert s.values[s.index_of(date(2016, 6, 23))] == pytest.approx(B - 1000.01)


def test_unknown_account_and_empty_account():
    ledger = make_ledger([tx("1", D0, "x", 1)], {"1": 0, "2": 5})
    with pytest.raises(LedgerError):
        build_balance_series(ledger, "9")
    with pytest.raises(LedgerError):
        build_balance_series(ledger, "2")


def test_weekly_series_takes_sunday_snapshot():
    start = date(2021, 3, 1)  # Monday
    txs = [tx("1", start + timedelta(days=k), "x", 1.0) for k in range(14)]
    ledger = make_ledger(txs, {"1": 0}, start + timedelta(days=13))
    daily = build_balance_series(ledger, "1", Step.DAILY)
    weekly = build_balance_series(ledger, "1", Step.WEEKLY)
    assert weekly.start_date == week_end(start) == date(2021, 3, 7)
    for k in range(len(weekly)):
        d = weekly.date_at(k)
        assert weekly.values[k] == daily.values[daily.index_of(d)]


def test_standardize_examples():
    st_ = standardize([1, 2, 3])
    assert st_.values.tolist() == [-1, 0, 1] and st_.mean == 2 and st_.stdev == 1
    c = standardize([5, 5, 5, 5])
    assert c.values.tolist() == [0, 0, 0, 0] and c.mean == 5 and c.stdev == 0
    assert np.array_equal(c.invert(c.values), [5, 5, 5, 5])
    with pytest.raises(LedgerError):
        standardize([1.0])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=50))
def test_standardize_round_trip(xs):
    x = np.array(xs)
    s = standardize(x)
    np.testing.assert_allclose(s.invert(s.values), x, rtol=1e-9, atol=1e-9 * max(1.0, np.abs(x).max()))


amounts = st.integers(-500_000, 500_000)


@settings(max_examples=150, deadline=None)
@given(
    st.lists(st.tuples(st.integers(0, 60), amounts), min_size=1, max_size=40),
    amounts,
    st.integers(0, 10),
    st.sampled_from([Step.DAILY, Step.WEEKLY]),
)
def test_reconstruction_round_trip(items, current, tail, step):
    txs = [Transaction("a", D0 + timedelta(days=d), "", c) for d, c in items]
    as_of = max(t.date for t in txs) + timedelta(days=tail)
    ledger = Ledger({"a": Account("a", "u", AccountKind.CHECKING, current, as_of)}, tuple(txs))
    s = build_balance_series(ledger, "a", step)
    # forward simulation from the first balance reproduces the current balance
    first = min(t.date for t in txs)
    first_step_end = s.date_at(0)
    bal = int(s.cents[0]) - sum(t.amount_cents for t in txs if t.date > first_step_end)
    assert bal == current
    assert s.cents[-1] == current
    expected_len = (as_of - first).days + 1 if step is Step.DAILY else (week_end(as_of) - week_end(first)).days // 7 + 1
    assert len(s) == expected_len
    for i in range(1, len(s)):
        lo, hi = s.date_at(i - 1), s.date_at(i)
        delta = sum(t.amount_cents for t in txs if lo < t.date <= hi)
        assert s.cents[i] == s.cents[i - 1] - delta


def test_ledger_sorting_and_validation():
    a = tx("2", D0, "x", 1)
    b = tx("1", D0 + timedelta(days=1), "y", 1)
    c = tx("1", D0, "z", 1)
    ledger = make_ledger([a, b, c])
    assert [(t.account_id, t.date) for t in ledger.transactions] == [("1", D0), ("1", D0 + timedelta(days=1)), ("2", D0)]
    with pytest.raises(LedgerError):
        Ledger(ledger.accounts, ledger.transactions + (tx("9", D0, "q", 1),))
    with pytest.raises(LedgerError):
        Ledger(ledger.accounts, ledger.transactions, D0 - timedelta(days=1))


def test_truncate_hides_the_future():
    txs = [tx("1", D0 + timedelta(days=k), "x", 10.0) for k in range(10)]
    ledger = make_ledger(txs, {"1": 100.0})
    cut = D0 + timedelta(days=4)
    view = ledger.truncate(cut)
    assert all(t.date <= cut for t in view.transactions)
    full = build_balance_series(ledger, "1")
    part = build_balance_series(view, "1")
    assert np.array_equal(part.cents, full.cents[: len(part)])


def test_to_cents_rounding():
    assert to_cents("20") == 2000
    assert to_cents("-0.01") == -1
    assert to_cents("1.005") == 101
    with pytest.raises(LedgerError):
        to_cents("abc")


def test_category_parsing():
    assert Category.parse("Shops") is Category.SHOPS
    assert Category.parse("Food and Drink") is Category.FOOD_AND_DRINK
    assert Category.parse("Service - Insurance") is Category.SERVICE
    assert Category.parse("") is Category.UNLABELED
    assert Category.parse("NA") is Category.UNLABELED
    assert Category.parse("Spaceships") is None

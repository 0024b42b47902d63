from dataclasses import replace
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from ledgercast.cluster import (
    Linkage,
    agglomerate,
    category_profile,
    cluster_balances,
    distance_matrix,
    user_balance_sequences,
)
from ledgercast.dtw import DtwConfig
from ledgercast.model import Category, Ledger, LedgerError

from conftest import make_ledger, tx

D0 = date(2021, 3, 1)


def partition(labels):
    groups: dict[int, set[int]] = {}
    for i, c in enumerate(labels):
        groups.setdefault(c, set()).add(i)
    return {frozenset(g) for g in groups.values()}


def random_distances(rng, n):
    pts = rng.normal(size=(n, 3))
    return np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))


@pytest.mark.parametrize("method", [Linkage.COMPLETE, Linkage.AVERAGE])
@pytest.mark.parametrize("seed", range(6))
def test_agglomerate_matches_scipy(method, seed):
    rng = np.random.default_rng(seed)
    n = 12
    D = random_distances(rng, n)
    Z = linkage(squareform(D, checks=False), method=method.value)
    for k in (1, 3, 5, n):
        labels, heights = agglomerate(D, k, method)
        ref = fcluster(Z, k, criterion="maxclust")
        assert partition(labels) == partition(ref)
        np.testing.assert_allclose(heights, Z[: n - k, 2], rtol=1e-12)


def test_labels_numbered_by_first_member():
    D = np.array([[0, 9, 1, 9], [9, 0, 9, 1], [1, 9, 0, 9], [9, 1, 9, 0]], dtype=float)
    labels, heights = agglomerate(D, 2)
    assert labels == [0, 1, 0, 1] and heights == [1.0, 1.0]


def test_singletons_and_bad_k():
    D = random_distances(np.random.default_rng(1), 5)
    labels, heights = agglomerate(D, 5)
    assert labels == list(range(5)) and heights == []
    with pytest.raises(LedgerError):
        agglomerate(D, 6)
    with pytest.raises(LedgerError):
        agglomerate(D, 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 9), st.sampled_from(list(Linkage)))
def test_merge_heights_monotone(seed, n, method):
    D = random_distances(np.random.default_rng(seed), n)
    _, heights = agglomerate(D, 1, method)
    assert all(b >= a - 1e-12 for a, b in zip(heights, heights[1:]))


def test_distance_matrix_symmetric_zero_diagonal():
    rng = np.random.default_rng(2)
    seqs = [rng.normal(size=30).cumsum() for _ in range(5)]
    D = distance_matrix(seqs, DtwConfig(2))
    assert np.array_equal(D, D.T) and not np.diag(D).any()
    assert (D[np.triu_indices(5, 1)] > 0).all()


# ------------------------------------------------------------ ledgers

def user_ledger(shapes, n_days=60):
    """One account per user; shape 'saw' pays 1000 every 14 days, 'flat' spends evenly."""
    txs = []
    for u, shape in enumerate(shapes):
        acc = f"{u:02d}"
        for k in range(n_days):
            d = D0 + timedelta(days=k)
            if shape == "saw":
                txs.append(tx(acc, d, "GROCERY", 60, Category.FOOD_AND_DRINK))
                if k % 14 == 0:
                    txs.append(tx(acc, d, "PAYROLL", -840 - u, Category.TRANSFER))
            else:
                txs.append(tx(acc, d, "GROCERY", 5 + u % 3, Category.FOOD_AND_DRINK))
                if k % 20 == 0:
                    txs.append(tx(acc, d, "OVERDRAFT FEE", 35, Category.BANK_FEES))
    return make_ledger(txs, {f"{u:02d}": 1000.0 * u for u in range(len(shapes))})


PERIOD = (D0, D0 + timedelta(days=59))


def test_two_groups_recovered_and_shift_invariant():
    shapes = ["saw", "flat", "saw", "flat", "saw", "flat"]
    res = cluster_balances(user_ledger(shapes), PERIOD, 2)
    groups = {frozenset(res.members(c)) for c in range(2)}
    assert groups == {frozenset({"u00", "u02", "u04"}), frozenset({"u01", "u03", "u05"})}
    assert max(res.merge_heights[:-1]) < res.merge_heights[-1]
    # moving every current balance by a per-user constant shifts whole sequences
    ledger = user_ledger(shapes)
    shifted = Ledger({a: replace(acc, balance_cents=acc.balance_cents + 7_777_00 * (i + 1))
                      for i, (a, acc) in enumerate(ledger.accounts.items())}, ledger.transactions)
    again = cluster_balances(shifted, PERIOD, 2)
    assert again.assignments == res.assignments
    np.testing.assert_allclose(again.merge_heights, res.merge_heights, rtol=1e-9)


def test_cluster_profile_separates_fees():
    shapes = ["saw", "flat", "saw", "flat"]
    ledger = user_ledger(shapes)
    res = cluster_balances(ledger, PERIOD, 2)
    saw, flat = res.assignments["u00"], res.assignments["u01"]
    assert res.category_profiles[flat][Category.BANK_FEES] == pytest.approx(105.0)
    assert res.category_profiles[saw][Category.BANK_FEES] == 0.0
    assert res.category_profiles[saw][Category.TRANSFER] < 0


def test_category_profile_means():
    ledger = make_ledger([
        tx("1", D0, "A", 10, Category.SHOPS), tx("2", D0, "B", 30, Category.SHOPS),
        tx("3", D0, "PAY", -100, Category.TRANSFER),
    ])
    prof = category_profile(ledger, {"u1": 0, "u2": 0, "u3": 1})
    assert prof[0][Category.SHOPS] == 20.0 and prof[1][Category.TRANSFER] == -100.0
    assert prof[0][Category.TRAVEL] == 0.0
    with pytest.raises(LedgerError):
        category_profile(ledger, {"nobody": 0})


def test_users_without_full_coverage_are_skipped():
    ledger = user_ledger(["saw", "flat"])
    late = make_ledger(list(ledger.transactions) + [tx("09", D0 + timedelta(days=10), "X", 1)])
    seqs = user_balance_sequences(late, *PERIOD)
    assert set(seqs) == {"u00", "u01"}
    with pytest.raises(LedgerError):
        cluster_balances(late, PERIOD, 3)


def test_sequences_sum_a_users_accounts():
    txs = [tx("a", D0 + timedelta(days=k), "X", 1) for k in range(5)] + [tx("b", D0 + timedelta(days=k), "Y", 2) for k in range(5)]
    ledger = make_ledger(txs, {"a": 10, "b": 20})
    accs = dict(ledger.accounts)
    accs["b"] = replace(accs["b"], user_id="ua")
    joint = Ledger(accs, ledger.transactions)
    seqs = user_balance_sequences(joint, D0, D0 + timedelta(days=4))
    assert list(seqs) == ["ua"]
    np.testing.assert_allclose(seqs["ua"], [42, 39, 36, 33, 30])

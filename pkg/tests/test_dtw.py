from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ledgercast.dtw import (
    Corpus,
    DtwConfig,
    LandmarkTemplate,
    align_to_template,
    build_payday_template,
    dtw_distance,
    dtw_path,
    lb_keogh,
    subsequence_search,
)
from ledgercast.model import BalanceSeries, LedgerError, Step
from ledgercast.recurring import Frequency, RecurringTransaction
from ledgercast.model import Category

from conftest import tx
from oracles import brute_dtw, brute_path, brute_paths_cost, corpus_from_arrays, random_corpus, random_pair


def path_cost(a, b, path):
    return float(np.sqrt(sum((a[i] - b[j]) ** 2 for i, j in path)))


def check_path(path, n, m, window):
    assert path[0] == (0, 0) and path[-1] == (n - 1, m - 1)
    for (i0, j0), (i1, j1) in zip(path, path[1:]):
        assert (i1 - i0, j1 - j0) in ((1, 1), (1, 0), (0, 1))
    assert all(abs(i - j) <= window for i, j in path)


def test_identical_sequences_have_zero_distance_and_diagonal_path():
    d, path = dtw_path([1, 2, 3], [1, 2, 3])
    assert dtw_distance([1, 2, 3], [1, 2, 3]) == 0.0
    assert d == 0.0 and path == [(0, 0), (1, 1), (2, 2)]


def test_shifted_spike_matches_brute_force():
    a, b = [0, 0, 1, 0], [0, 1, 0, 0]
    expected, _ = brute_dtw(a, b, 2)
    assert expected == 0.0  # oracle value, frozen
    assert dtw_distance(a, b, DtwConfig(2)) == expected
    d, path = dtw_path(a, b, DtwConfig(2))
    assert path == [(0, 0), (1, 0), (2, 1), (3, 2), (3, 3)]
    assert path_cost(a, b, path) == d


def test_zero_band_is_euclidean():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=9), rng.normal(size=9)
    assert dtw_distance(a, b, DtwConfig(0)) == pytest.approx(np.linalg.norm(a - b), abs=1e-12)


def test_infeasible_band_raises():
    with pytest.raises(LedgerError):
        dtw_distance([1, 2, 3, 4], [1, 2], DtwConfig(1))
    with pytest.raises(ValueError):
        DtwConfig(-1)


def test_wide_band_equals_unconstrained():
    rng = np.random.default_rng(2)
    for _ in range(200):
        n, m = rng.integers(1, 13, size=2)
        a, b = rng.normal(size=n), rng.normal(size=m)
        w = int(max(n, m) - 1)
        assert dtw_distance(a, b, DtwConfig(w)) == pytest.approx(brute_dtw(a, b, None)[0], abs=1e-12)


def test_distance_equals_path_enumeration_on_tiny_inputs():
    rng = np.random.default_rng(4)
    for _ in range(150):
        a, b, w = random_pair(rng, max_len=6)
        assert dtw_distance(a, b, DtwConfig(w)) == pytest.approx(brute_paths_cost(a, b, w), abs=1e-12)


def test_brute_force_path_tie_break_agrees():
    rng = np.random.default_rng(5)
    for _ in range(300):
        a, b, w = random_pair(rng)
        _, C = brute_dtw(a, b, w)
        d, path = dtw_path(a, b, DtwConfig(w))
        check_path(path, len(a), len(b), w)
        assert path == brute_path(C)


@settings(max_examples=200, deadline=None)
@given(
    a=st.lists(st.floats(-100, 100), min_size=1, max_size=10),
    b=st.lists(st.floats(-100, 100), min_size=1, max_size=10),
)
def test_metric_properties(a, b):
    w = max(len(a), len(b))
    cfg = DtwConfig(w)
    dab = dtw_distance(a, b, cfg)
    assert dab >= 0
    assert dab == pytest.approx(dtw_distance(b, a, cfg), abs=1e-9)
    assert dtw_distance(a, a, cfg) == 0.0


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 30), w=st.integers(0, 5))
def test_lower_bound_never_exceeds_dtw(seed, n, w):
    rng = np.random.default_rng(seed)
    q = rng.normal(size=n)
    c = rng.normal(size=(5, n))
    lb = lb_keogh(q, c, w)
    for k in range(5):
        assert lb[k] <= dtw_distance(q, c[k], DtwConfig(w)) + 1e-12


def test_planted_copy_ranks_first():
    rng = np.random.default_rng(8)
    arrays = random_corpus(rng, 4, 80)
    corpus = corpus_from_arrays(arrays, 15, 10)
    row = 37
    q = corpus.windows[row, :10]
    res = subsequence_search(q, corpus, 3)
    assert res.matches[0].dtw_distance == 0.0
    assert res.matches[0].source_account == corpus.accounts[corpus.account_index[row]]


def test_shortfall_flagged_when_need_exceeds_candidates():
    corpus = corpus_from_arrays([np.arange(12.0) ** 2], 10, 5)
    res = subsequence_search(np.arange(5.0), corpus, 10)
    assert res.shortfall and 1 <= len(res.matches) < 10


def test_exclusions_and_overlap_rule():
    rng = np.random.default_rng(9)
    corpus = corpus_from_arrays(random_corpus(rng, 3, 60), 12, 8)
    q = corpus.windows[5, :8]
    acc = corpus.accounts[corpus.account_index[5]]
    lo, hi = date(2020, 1, 1), date(2020, 1, 20)
    res = subsequence_search(q, corpus, 10, [(acc, lo, hi)], DtwConfig(2))
    for m in res.matches:
        if m.source_account == acc:
            end = m.source_start + timedelta(days=11)
            assert end < lo or m.source_start > hi
    for x in res.matches:
        for y in res.matches:
            if x is not y and x.source_account == y.source_account:
                assert abs(x.start_index - y.start_index) > 2


def test_end_before_limits_candidates():
    rng = np.random.default_rng(10)
    corpus = corpus_from_arrays(random_corpus(rng, 2, 50), 10, 6)
    cut = date(2020, 1, 25)
    res = subsequence_search(corpus.windows[0, :6], corpus, 50, end_before=cut)
    assert all(m.source_start + timedelta(days=9) <= cut for m in res.matches)


def test_pruned_search_equals_exhaustive_small():
    rng = np.random.default_rng(11)
    for _ in range(20):
        corpus = corpus_from_arrays(random_corpus(rng), 12, 8)
        if len(corpus) == 0:
            continue
        q = rng.normal(size=8)
        need = int(rng.integers(1, 12))
        a = subsequence_search(q, corpus, need, prune=True)
        b = subsequence_search(q, corpus, need, prune=False)
        assert [(m.source_account, m.start_index, m.dtw_distance) for m in a.matches] == [
            (m.source_account, m.start_index, m.dtw_distance) for m in b.matches
        ]


def test_template_identity_alignment():
    raw = np.sin(np.arange(20.0))
    marks = LandmarkTemplate(20, {3: 1.0, 14: 2.0})
    assert np.array_equal(align_to_template(raw, marks, marks), raw)
    assert np.array_equal(align_to_template(raw, LandmarkTemplate(20, {}), marks), raw)
    assert np.array_equal(align_to_template(raw, marks, LandmarkTemplate(20, {})), raw)


def test_shifted_marks_shift_values_back():
    # two spikes at 6 and 16 in the source; target expects them at 4 and 14
    raw = np.zeros(24)
    raw[6], raw[16] = 5.0, 3.0
    out = align_to_template(raw, LandmarkTemplate(24, {6: 1.0, 16: 1.0}), LandmarkTemplate(24, {4: 1.0, 14: 1.0}))
    assert len(out) == 24
    assert out[4] == 5.0 and out[14] == 3.0
    assert np.argmax(out) == 4


def test_template_validation():
    with pytest.raises(LedgerError):
        LandmarkTemplate(5, {5: 1.0})
    with pytest.raises(LedgerError):
        LandmarkTemplate(5, {1: 0.0})


def salary_chain(account="1"):
    dates = [date(2021, 1, 1), date(2021, 1, 15), date(2021, 2, 1), date(2021, 2, 15)]
    support = tuple(tx(account, d, "PAYROLL ACME DIR DEP", -1000, Category.TRANSFER) for d in reversed(dates))
    return RecurringTransaction(account, Frequency.SEMIMONTHLY, "PAYROLL ACME DIR DEP", Category.TRANSFER, -1000.0, dates[-1], support)


def test_payday_template_marks_past_and_future_paydays():
    rec = salary_chain()
    first = date(2021, 1, 20)
    origin = first + timedelta(days=30)
    tpl = build_payday_template([rec], "1", first, origin, 31, Step.DAILY)
    assert tpl.length == 62
    days = sorted(first + timedelta(days=k) for k in tpl.marks)
    # template spans Jan 20 .. Mar 22
    assert days == [date(2021, 2, 1), date(2021, 2, 15), date(2021, 3, 2), date(2021, 3, 17)]
    assert set(tpl.marks.values()) == {1000.0}


def test_payday_template_empty_without_paycheck():
    tpl = build_payday_template([], "1", date(2021, 1, 1), date(2021, 1, 31), 31)
    assert tpl.marks == {}

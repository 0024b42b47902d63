"""Banded DTW, pruned subsequence search and payday-landmark alignment."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Iterable, Mapping, Sequence

import numba
import numpy as np

from .model import BalanceSeries, Category, Ledger, LedgerError, Step, Transaction, step_index
from .recurring import RecurringTransaction, extract_all_recurring, scheduled_occurrences
from .textsim import DEFAULT, SimilarityConfig


@dataclass(frozen=True)
class DtwConfig:
    window: int = 2

    def __post_init__(self) -> None:
        if self.window < 0:
            raise ValueError("DTW window must be non-negative")


@numba.njit(cache=True)
def _accumulated(a, b, window):
    n, m = a.shape[0], b.shape[0]
    acc = np.full((n, m), np.inf)
    for i in range(n):
        lo = max(0, i - window)
        hi = min(m, i + window + 1)
        for j in range(lo, hi):
            d = a[i] - b[j]
            cost = d * d
            if i == 0 and j == 0:
                acc[i, j] = cost
                continue
            best = np.inf
            if i > 0 and j > 0:
                best = acc[i - 1, j - 1]
            if i > 0 and acc[i - 1, j] < best:
                best = acc[i - 1, j]
            if j > 0 and acc[i, j - 1] < best:
                best = acc[i, j - 1]
            acc[i, j] = cost + best
    return acc


@numba.njit(cache=True, nogil=True)
def _dtw_sq_equal(q, c, window):
    # equal-length banded DTW with two rolling rows
    n = q.shape[0]
    prev = np.full(n, np.inf)
    cur = np.full(n, np.inf)
    for i in range(n):
        lo = max(0, i - window)
        hi = min(n, i + window + 1)
        for j in range(n):
            cur[j] = np.inf
        for j in range(lo, hi):
            d = q[i] - c[j]
            cost = d * d
            if i == 0 and j == 0:
                cur[j] = cost
                continue
            best = np.inf
            if i > 0 and j > 0:
                best = prev[j - 1]
            if i > 0 and prev[j] < best:
                best = prev[j]
            if j > 0 and cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = cost + best
        prev, cur = cur, prev
    return prev[n - 1]


@numba.njit(cache=True, nogil=True)
def _dtw_batch(q, cands, rows, window):
    out = np.empty(rows.shape[0])
    n = q.shape[0]
    for k in range(rows.shape[0]):
        out[k] = math.sqrt(_dtw_sq_equal(q, cands[rows[k], :n], window))
    return out


def _check(a: np.ndarray, b: np.ndarray, config: DtwConfig) -> None:
    if len(a) == 0 or len(b) == 0:
        raise LedgerError("DTW needs non-empty sequences")
    if abs(len(a) - len(b)) > config.window:
        raise LedgerError(f"lengths {len(a)} and {len(b)} cannot be aligned within window {config.window}")


def dtw_distance(a: Sequence[float], b: Sequence[float], config: DtwConfig = DtwConfig()) -> float:
    """Sakoe-Chiba banded DTW with squared point cost, square-rooted."""
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    _check(a, b, config)
    return math.sqrt(_accumulated(a, b, config.window)[-1, -1])


def dtw_path(a: Sequence[float], b: Sequence[float], config: DtwConfig = DtwConfig()) -> tuple[float, list[tuple[int, int]]]:
    """Distance plus an optimal warp path from (0, 0) to (n-1, m-1).

    Backtracking prefers the diagonal step on ties, then the step that
    advances the first index.
    """
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    _check(a, b, config)
    acc = _accumulated(a, b, config.window)
    i, j = len(a) - 1, len(b) - 1
    path = [(i, j)]
    while (i, j) != (0, 0):
        options = []
        if i > 0 and j > 0:
            options.append((acc[i - 1, j - 1], 0, i - 1, j - 1))
        if i > 0:
            options.append((acc[i - 1, j], 1, i - 1, j))
        if j > 0:
            options.append((acc[i, j - 1], 2, i, j - 1))
        _, _, i, j = min(options)
        path.append((i, j))
    path.reverse()
    return math.sqrt(acc[-1, -1]), path


def envelope(query: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    n = len(query)
    upper = np.empty(n)
    lower = np.empty(n)
    for i in range(n):
        seg = query[max(0, i - window): i + window + 1]
        upper[i] = seg.max()
        lower[i] = seg.min()
    return upper, lower


def lb_keogh(query: np.ndarray, candidates: np.ndarray, window: int) -> np.ndarray:
    """Envelope lower bound on banded DTW for equal-length candidates (rows)."""
    upper, lower = envelope(np.asarray(query, dtype=float), window)
    c = np.atleast_2d(candidates)
    above = np.clip(c - upper, 0.0, None)
    below = np.clip(lower - c, 0.0, None)
    return np.sqrt(np.sum(above * above + below * below, axis=1))


@dataclass
class MatchedSequence:
    source_account: str
    source_start: date
    start_index: int
    raw: np.ndarray
    dtw_distance: float
    aligned: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.aligned is None:
            self.aligned = self.raw.copy()


@dataclass
class SearchResult:
    matches: list[MatchedSequence]
    shortfall: bool
    evaluated: int = 0  # full DTW evaluations performed


@dataclass(eq=False)
class Corpus:
    """Every length-``window_len`` historical window, z-scored on its first ``norm_len`` values."""

    series: Mapping[str, BalanceSeries]
    window_len: int
    norm_len: int
    ledger: Ledger | None = None
    simcfg: SimilarityConfig = DEFAULT
    accounts: list[str] = field(init=False)
    windows: np.ndarray = field(init=False)
    account_index: np.ndarray = field(init=False)
    start_index: np.ndarray = field(init=False)
    start_ordinal: np.ndarray = field(init=False)
    _paydays: dict = field(init=False, default_factory=dict)

    def __post_init__(self) -> None:
        if not 2 <= self.norm_len <= self.window_len:
            raise LedgerError("corpus needs 2 <= norm_len <= window_len")
        self.accounts = sorted(self.series)
        blocks, acc_idx, starts, ords = [], [], [], []
        for k, acc in enumerate(self.accounts):
            s = self.series[acc]
            values = s.values
            if len(values) < self.window_len:
                continue
            w = np.lib.stride_tricks.sliding_window_view(values, self.window_len)
            head = w[:, : self.norm_len]
            mean = head.mean(axis=1, keepdims=True)
            sd = head.std(axis=1, ddof=1, keepdims=True)
            flat = sd[:, 0] <= 1e-12 * np.maximum(1.0, np.abs(mean[:, 0]))
            sd[flat] = 1.0
            z = (w - mean) / sd
            z[flat] = 0.0
            blocks.append(z)
            n = len(z)
            acc_idx.append(np.full(n, k, dtype=np.int64))
            starts.append(np.arange(n, dtype=np.int64))
            ords.append(s.start_date.toordinal() + np.arange(n, dtype=np.int64) * s.step.days)
        if blocks:
            self.windows = np.ascontiguousarray(np.concatenate(blocks))
            self.account_index = np.concatenate(acc_idx)
            self.start_index = np.concatenate(starts)
            self.start_ordinal = np.concatenate(ords)
        else:
            self.windows = np.empty((0, self.window_len))
            self.account_index = self.start_index = self.start_ordinal = np.empty(0, dtype=np.int64)
        self._step_days = next(iter(self.series.values())).step.days if self.series else 1

    @classmethod
    def from_ledger(
        cls,
        ledger: Ledger,
        window_len: int,
        norm_len: int,
        step: Step | None = None,
        simcfg: SimilarityConfig = DEFAULT,
    ) -> Corpus:
        from .model import build_balance_series

        series = {}
        for acc in sorted(ledger.accounts):
            if ledger.account_transactions(acc):
                series[acc] = build_balance_series(ledger, acc, step or ledger.step)
        return cls(series, window_len, norm_len, ledger, simcfg)

    def __len__(self) -> int:
        return len(self.windows)

    def end_ordinal(self) -> np.ndarray:
        return self.start_ordinal + (self.window_len - 1) * self._step_days

    def mask(self, exclusions: Iterable[tuple[str, date, date]] = (), end_before: date | None = None) -> np.ndarray:
        keep = np.ones(len(self), dtype=bool)
        first = self.start_ordinal - (self._step_days - 1)
        last = self.end_ordinal()
        if end_before is not None:
            keep &= last <= end_before.toordinal()
        pos = {a: k for k, a in enumerate(self.accounts)}
        for acc, lo, hi in exclusions:
            if acc not in pos:
                continue
            keep &= ~((self.account_index == pos[acc]) & (first <= hi.toordinal()) & (last >= lo.toordinal()))
        return keep

    def match(self, row: int, distance: float) -> MatchedSequence:
        acc = self.accounts[self.account_index[row]]
        return MatchedSequence(
            source_account=acc,
            source_start=date.fromordinal(int(self.start_ordinal[row])),
            start_index=int(self.start_index[row]),
            raw=self.windows[row].copy(),
            dtw_distance=float(distance),
        )

    def source_marks(self, match: MatchedSequence) -> LandmarkTemplate:
        """Paycheck deposits of the match's source account inside its window."""
        deposits = self._account_paydays(match.source_account)
        marks = {}
        for idx, mag in deposits.items():
            k = idx - match.start_index
            if 0 <= k < self.window_len:
                marks[k] = marks.get(k, 0.0) + mag
        return LandmarkTemplate(self.window_len, marks)

    def _account_paydays(self, account: str) -> dict[int, float]:
        if account in self._paydays:
            return self._paydays[account]
        out: dict[int, float] = {}
        if self.ledger is not None:
            txs = self.ledger.account_transactions(account)
            series = self.series[account]
            if txs:
                pay = find_paycheck(extract_all_recurring(txs, txs[-1].date, self.simcfg))
                if pay is not None:
                    for t in txs:
                        if t.amount_cents < 0 and pay.matches(t, self.simcfg):
                            idx = series.index_of(t.date)
                            out[idx] = out.get(idx, 0.0) + abs(t.amount)
        self._paydays[account] = out
        return out


def _greedy(order: np.ndarray, acc: np.ndarray, start: np.ndarray, need: int, gap: int) -> list[int]:
    picked: list[int] = []
    taken: dict[int, list[int]] = {}
    for row in order:
        a = int(acc[row])
        s = int(start[row])
        if any(abs(s - t) <= gap for t in taken.get(a, ())):
            continue
        taken.setdefault(a, []).append(s)
        picked.append(int(row))
        if len(picked) == need:
            break
    return picked


def subsequence_search(
    query: Sequence[float],
    corpus: Corpus,
    need: int,
    exclusions: Iterable[tuple[str, date, date]] = (),
    config: DtwConfig = DtwConfig(),
    *,
    end_before: date | None = None,
    prune: bool = True,
) -> SearchResult:
    """The ``need`` closest non-overlapping corpus windows to ``query``.

    Distances are banded DTW between ``query`` and each window's prefix of
    the same length. Ranking is by (distance, account id, start); windows
    of one account must start more than ``config.window`` steps apart.
    With ``prune`` the LB_Keogh bound skips windows that cannot enter the
    result, which is identical to the exhaustive scan.
    """
    q = np.ascontiguousarray(query, dtype=float)
    if len(q) > corpus.window_len:
        raise LedgerError("query longer than corpus windows")
    if need < 1:
        raise LedgerError("need at least one match")
    rows = np.flatnonzero(corpus.mask(exclusions, end_before))
    dist = np.full(len(corpus), np.inf)
    acc, start = corpus.account_index, corpus.start_index

    def rank(cand: np.ndarray) -> np.ndarray:
        return cand[np.lexsort((start[cand], acc[cand], dist[cand]))]

    if not prune:
        dist[rows] = _dtw_batch(q, corpus.windows, rows, config.window)
        picked = _greedy(rank(rows), acc, start, need, config.window)
        evaluated = len(rows)
    else:
        lb = lb_keogh(q, corpus.windows[rows, : len(q)], config.window)
        order = rows[np.argsort(lb, kind="stable")]
        lb_sorted = np.sort(lb, kind="stable")
        batch = max(64, 4 * need)
        pos = 0
        picked = []
        while pos < len(order):
            take = order[pos: pos + batch]
            dist[take] = _dtw_batch(q, corpus.windows, take, config.window)
            pos += len(take)
            picked = _greedy(rank(order[:pos]), acc, start, need, config.window)
            if len(picked) == need and pos < len(order):
                worst = dist[picked[-1]]
                if lb_sorted[pos] > worst * (1 + 1e-9) + 1e-12:
                    break
        evaluated = pos
    matches = [corpus.match(r, dist[r]) for r in picked]
    return SearchResult(matches, len(matches) < need, evaluated)


@dataclass(frozen=True)
class LandmarkTemplate:
    length: int
    marks: Mapping[int, float]

    def __post_init__(self) -> None:
        for k, v in self.marks.items():
            if not 0 <= k < self.length:
                raise LedgerError(f"mark index {k} outside [0, {self.length})")
            if v <= 0:
                raise LedgerError("mark magnitudes must be positive")

    def vector(self) -> np.ndarray:
        v = np.zeros(self.length)
        for k, mag in self.marks.items():
            v[k] = mag
        return v


SALARY_WORDS = ("payroll", "salary", "direct deposit", "dir dep", "paycheck", "wages")


def find_paycheck(recurrings: Iterable[RecurringTransaction]) -> RecurringTransaction | None:
    """The recurring inflow most likely to be a paycheck: largest mean inflow
    among Transfer/Payment chains or salary-like descriptions."""
    best = None
    for r in recurrings:
        if not r.is_inflow:
            continue
        desc = r.representative_description.casefold()
        if r.category not in (Category.TRANSFER, Category.PAYMENT) and not any(w in desc for w in SALARY_WORDS):
            continue
        if best is None or abs(r.mean_amount) > abs(best.mean_amount):
            best = r
    return best


def build_payday_template(
    recurrings: Iterable[RecurringTransaction],
    account_id: str,
    first: date,
    origin: date,
    horizon: int,
    step: Step = Step.DAILY,
    transactions: Sequence[Transaction] | None = None,
    simcfg: SimilarityConfig = DEFAULT,
) -> LandmarkTemplate:
    """Paycheck marks over the steps ``first .. origin + horizon``.

    Observed deposits up to ``origin`` come from ``transactions`` (or the
    paycheck chain's own support); later paydays are projected by
    iterating the paycheck's period.
    """
    past = step_index(first, step, origin) + 1
    length = past + horizon
    pay = find_paycheck(r for r in recurrings if r.account_id == account_id)
    if pay is None:
        return LandmarkTemplate(length, {})
    lo = first - timedelta(days=step.days - 1)
    pool = transactions if transactions is not None else pay.support
    marks: dict[int, float] = {}
    for t in pool:
        if lo <= t.date <= origin and t.amount_cents < 0 and pay.matches(t, simcfg):
            k = step_index(first, step, t.date)
            marks[k] = marks.get(k, 0.0) + abs(t.amount)
    end = first + timedelta(days=(length - 1) * step.days)
    for when in scheduled_occurrences(pay, origin, end):
        k = step_index(first, step, when)
        if past <= k < length:
            marks[k] = marks.get(k, 0.0) + abs(pay.mean_amount)
    return LandmarkTemplate(length, marks)


def align_to_template(
    raw: Sequence[float],
    source: LandmarkTemplate,
    target: LandmarkTemplate,
    window: int | None = None,
) -> np.ndarray:
    """Warp ``raw`` so its paydays land on the target's paydays.

    The two payday indicator sequences (scaled to unit peak) are aligned by
    DTW; each target step then takes the mean of the raw values warped
    onto it. Either template being empty leaves ``raw`` unchanged.
    """
    x = np.asarray(raw, dtype=float)
    if source.length != len(x) or target.length != len(x):
        raise LedgerError("template and sequence lengths differ")
    if not source.marks or not target.marks:
        return x.copy()
    s = source.vector()
    t = target.vector()
    s /= s.max()
    t /= t.max()
    band = window if window is not None else math.ceil(len(x) / 4)
    _, path = dtw_path(s, t, DtwConfig(band))
    ii = np.array([p[0] for p in path])
    jj = np.array([p[1] for p in path])
    total = np.zeros(len(x))
    count = np.zeros(len(x))
    np.add.at(total, jj, x[ii])
    np.add.at(count, jj, 1.0)
    return total / count

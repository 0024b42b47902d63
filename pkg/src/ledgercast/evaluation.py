"""Backtesting harness: scaled error metrics, window sampling and extraction scoring."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .dtw import Corpus
from .forecast import (
    ForecastConfig,
    ForecastError,
    Method,
    hist_avg_forecast,
    hybrid_forecast,
    neighbor_forecast_at,
    subseq_ls_forecast,
)
from .metrics import mae, variance_scale
from .model import BalanceSeries, Ledger, LedgerError, Transaction, build_balance_series
from .recurring import extract_all_recurring, predict_next
from .synth import PlantedSeries
from .textsim import DEFAULT, SimilarityConfig, is_same_biller

log = logging.getLogger(__name__)

Window = tuple[str, date]


# ---------------------------------------------------------------- forecasts

@dataclass(frozen=True)
class ScaledSeries:
    account_id: str
    factor: float
    values: np.ndarray


def scale_accounts(series: Mapping[str, BalanceSeries], train_end: date | None = None) -> dict[str, ScaledSeries]:
    """Multiply each account's balances by 10/σ of its training portion.

    Accounts whose training portion is flat are dropped with a warning.
    """
    out: dict[str, ScaledSeries] = {}
    for acc in sorted(series):
        s = series[acc]
        train = s.values if train_end is None else s.values[: s.index_of(train_end) + 1]
        f = variance_scale(train)
        if f is None:
            log.warning("account %s has zero training variance; excluded", acc)
            continue
        out[acc] = ScaledSeries(acc, f, s.values * f)
    return out


@dataclass(frozen=True)
class WindowSample:
    windows: list[Window]
    shortfall: bool
    feasible: int


def feasible_origins(series: BalanceSeries, train_end: date, horizon: int, min_history: int = 1) -> list[date]:
    """Origins whose whole horizon lies after ``train_end`` and inside the series."""
    out = []
    first = max(series.index_of(train_end), min_history - 1)
    for t in range(first, len(series) - horizon):
        out.append(series.date_at(t))
    return out


def sample_test_windows(
    ledger: Ledger,
    accounts: Iterable[str] | None = None,
    count: int = 25,
    length: int = 31,
    seed: int = 0,
    min_history: int = 1,
) -> WindowSample:
    """Draw ``count`` (account, origin) pairs uniformly without replacement.

    Feasible origins are on or after the ledger's ``train_end`` with all
    ``length`` forecast steps inside the data. With too few feasible pairs,
    all of them are returned and ``shortfall`` is set.
    """
    if ledger.train_end is None:
        raise LedgerError("ledger has no train/test split")
    pairs: list[Window] = []
    for acc in sorted(accounts if accounts is not None else ledger.accounts):
        if not ledger.account_transactions(acc):
            continue
        series = build_balance_series(ledger, acc)
        pairs.extend((acc, o) for o in feasible_origins(series, ledger.train_end, length, min_history))
    if len(pairs) <= count:
        return WindowSample(pairs, len(pairs) < count, len(pairs))
    rng = np.random.default_rng(seed)
    pick = np.sort(rng.choice(len(pairs), size=count, replace=False))
    return WindowSample([pairs[i] for i in pick], False, len(pairs))


@dataclass(frozen=True)
class ForecastMetrics:
    mae: float
    negative_balance_error: float | None
    per_step_mae: np.ndarray
    n_windows: int
    n_missing: int = 0


def forecast_metrics(truths: Sequence[np.ndarray], preds: Sequence[np.ndarray], n_missing: int = 0) -> ForecastMetrics:
    """Pool scaled errors over windows; negative-balance error covers every step with a negative truth."""
    if not truths:
        return ForecastMetrics(float("nan"), None, np.array([]), 0, n_missing)
    T = np.array(truths, dtype=float)
    P = np.array(preds, dtype=float)
    err = np.abs(T - P)
    neg = T < 0
    nbe = float(err[neg].mean()) if neg.any() else None
    return ForecastMetrics(float(err.mean()), nbe, err.mean(axis=0), len(T), n_missing)


Runner = Callable[[Ledger, str, date], np.ndarray]


@dataclass
class MethodSuite:
    """Forecast runners sharing one training corpus and per-account configs."""

    train_ledger: Ledger
    config: ForecastConfig
    account_configs: Mapping[str, ForecastConfig] = field(default_factory=dict)
    simcfg: SimilarityConfig = DEFAULT
    use_recurring: bool = True
    _corpora: dict[tuple[int, int], Corpus] = field(default_factory=dict, init=False, repr=False)

    def corpus(self, window_len: int, norm_len: int) -> Corpus:
        key = (window_len, norm_len)
        if key not in self._corpora:
            self._corpora[key] = Corpus.from_ledger(self.train_ledger, window_len, norm_len, self.train_ledger.step, self.simcfg)
        return self._corpora[key]

    def config_for(self, account_id: str) -> ForecastConfig:
        return self.account_configs.get(account_id, self.config)

    def recurrings(self, view: Ledger, account_id: str, origin: date):
        if not self.use_recurring:
            return []
        return extract_all_recurring(view.account_transactions(account_id), origin, self.simcfg)

    def run(self, method: Method, view: Ledger, account_id: str, origin: date) -> np.ndarray:
        cfg = self.config_for(account_id)
        L, S = cfg.query_len, cfg.horizon
        if method is Method.HIST_AVG:
            recs = self.recurrings(view, account_id, origin)
            return hist_avg_forecast(view, account_id, origin, S, recs, self.simcfg, cfg.history_days).predictions
        if method is Method.SUBSEQ_LS:
            recs = self.recurrings(view, account_id, origin)
            return subseq_ls_forecast(view, account_id, origin, cfg, self.corpus(L + S, L), recs, self.simcfg).predictions
        if method is Method.HYBRID:
            recs = self.recurrings(view, account_id, origin)
            return hybrid_forecast(view, account_id, origin, cfg, self.corpus(L + S, L), recs, self.simcfg).predictions
        if method in (Method.NEAREST_NEIGHBOR, Method.KNN):
            k = 1 if method is Method.NEAREST_NEIGHBOR else cfg.k_neighbors
            corpus = self.corpus(cfg.match_len + 1, cfg.match_len)
            return neighbor_forecast_at(view, account_id, origin, cfg, corpus, k).predictions
        raise ValueError(f"unknown method {method}")


@dataclass
class EvaluationReport:
    metrics: dict[str, ForecastMetrics]
    windows: list[Window]
    predictions: dict[tuple[str, str, date], np.ndarray]
    truths: dict[Window, np.ndarray]
    failures: dict[str, list[tuple[Window, str]]]


def evaluate_forecasts(
    methods: Sequence[Method],
    windows: Sequence[Window],
    ledger: Ledger,
    suite: MethodSuite,
    external: Mapping[tuple[str, str, date], np.ndarray] | None = None,
    threads: int = 1,
) -> EvaluationReport:
    """Run each method on each window with a ledger view truncated at the origin.

    Truth and predictions are scaled by the account's training factor.
    Failures are recorded per method and excluded from its average.
    ``external`` adds rows from precomputed predictions keyed
    (method, account, origin), in unscaled balance units.
    """
    if ledger.train_end is None:
        raise LedgerError("ledger has no train/test split")
    S = suite.config.horizon
    factors: dict[str, float] = {}
    truths: dict[Window, np.ndarray] = {}
    for acc in sorted({a for a, _ in windows}):
        series = build_balance_series(ledger, acc)
        scaled = scale_accounts({acc: series}, ledger.train_end)
        if acc not in scaled:
            continue
        factors[acc] = scaled[acc].factor
        for a, o in windows:
            if a == acc:
                t = series.index_of(o)
                truths[(a, o)] = scaled[acc].values[t + 1: t + S + 1]
    kept = [w for w in windows if w in truths]

    def one(window: Window) -> dict[str, np.ndarray | str]:
        acc, origin = window
        view = ledger.truncate(origin)
        out: dict[str, np.ndarray | str] = {}
        for m in methods:
            try:
                out[m.value] = suite.run(m, view, acc, origin)
            except (ForecastError, LedgerError) as exc:
                out[m.value] = str(exc)
        return out

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, kept))
    else:
        results = [one(w) for w in kept]

    preds: dict[tuple[str, str, date], np.ndarray] = {}
    failures: dict[str, list[tuple[Window, str]]] = {}
    names = [m.value for m in methods]
    for window, res in zip(kept, results):
        for name, value in res.items():
            if isinstance(value, str):
                failures.setdefault(name, []).append((window, value))
            else:
                preds[(name, *window)] = value
    if external:
        for (name, acc, origin), value in sorted(external.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])):
            if (acc, origin) in truths:
                if name not in names:
                    names.append(name)
                preds[(name, acc, origin)] = np.asarray(value, dtype=float)[:S]
    metrics = {}
    for name in names:
        T, P = [], []
        for w in kept:
            p = preds.get((name, *w))
            if p is None or len(p) != S:
                continue
            T.append(truths[w])
            P.append(p * factors[w[0]])
        missing = len(kept) - len(T)
        if missing:
            log.info("%s: %d of %d windows missing", name, missing, len(kept))
        metrics[name] = forecast_metrics(T, P, missing)
    return EvaluationReport(metrics, list(kept), preds, truths, failures)


def write_metrics_table(report: EvaluationReport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "mae", "negative_balance_error", "windows", "missing"])
        for name, m in report.metrics.items():
            nbe = "" if m.negative_balance_error is None else f"{m.negative_balance_error:.6f}"
            w.writerow([name, f"{m.mae:.6f}", nbe, m.n_windows, m.n_missing])


def write_step_curves(report: EvaluationReport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "step", "mae"])
        for name, m in report.metrics.items():
            for s, v in enumerate(m.per_step_mae, start=1):
                w.writerow([name, s, f"{v:.6f}"])


# ------------------------------------------------------------- PKDD protocol

@dataclass
class ExperimentResult:
    iterations: list[dict[str, ForecastMetrics]]

    def mean_mae(self) -> dict[str, float]:
        names = sorted({n for it in self.iterations for n in it})
        return {n: float(np.mean([it[n].mae for it in self.iterations if n in it and it[n].n_windows])) for n in names}

    def std_mae(self) -> dict[str, float]:
        names = sorted({n for it in self.iterations for n in it})
        return {n: float(np.std([it[n].mae for it in self.iterations if n in it and it[n].n_windows])) for n in names}


def run_account_experiment(
    ledger: Ledger,
    config: ForecastConfig,
    methods: Sequence[Method] = (Method.SUBSEQ_LS, Method.NEAREST_NEIGHBOR, Method.HIST_AVG),
    iterations: int = 2,
    n_accounts: int = 20,
    n_windows: int = 25,
    seed: int = 0,
    use_recurring: bool = False,
    threads: int = 1,
) -> ExperimentResult:
    """Repeated random-subset evaluation; the corpus comes from every account's training data."""
    if ledger.train_end is None:
        raise LedgerError("ledger has no train/test split")
    train = ledger.truncate(ledger.train_end)
    suite = MethodSuite(train, config, use_recurring=use_recurring)
    rng = np.random.default_rng(seed)
    accounts = sorted(a for a in ledger.accounts if ledger.account_transactions(a))
    out = []
    for it in range(iterations):
        chosen = sorted(rng.choice(accounts, size=min(n_accounts, len(accounts)), replace=False).tolist())
        sample = sample_test_windows(ledger, chosen, n_windows, config.horizon, int(rng.integers(2**31)), config.query_len)
        report = evaluate_forecasts(methods, sample.windows, ledger, suite, threads=threads)
        log.info("iteration %d: %s", it, {k: round(v.mae, 3) for k, v in report.metrics.items()})
        out.append(report.metrics)
    return ExperimentResult(out)


# ---------------------------------------------------------- recurring scoring

@dataclass(frozen=True)
class RecurringMetrics:
    avg_extracted_per_user: float
    precision: float
    mean_day_error: float
    recall: float


def _series_index(planted: Sequence[PlantedSeries]) -> dict[tuple[str, date, int], str]:
    return {(p.account_id, d, c): p.series_id for p in planted for d, c in p.occurrences}


def _owner(support: Iterable[Transaction], index: Mapping[tuple[str, date, int], str]) -> str | None:
    """Planted series holding a strict majority of the supporting transactions."""
    ids = [index.get((t.account_id, t.date, t.amount_cents)) for t in support]
    best = max(set(ids), key=lambda s: (ids.count(s), s or ""))
    if best is not None and 2 * ids.count(best) > len(ids):
        return best
    return None


def _next_true(p: PlantedSeries, after: date) -> date | None:
    later = [d for d, _ in p.occurrences if d > after]
    return min(later) if later else None


def sample_dates(ledger: Ledger, count: int, seed: int, warmup_days: int = 130, tail_days: int = 35) -> list[date]:
    """Distinct evaluation dates with enough history before and a period after."""
    lo, hi = ledger.date_range()
    first, last = lo + timedelta(days=warmup_days), hi - timedelta(days=tail_days)
    span = (last - first).days + 1
    if span < 1:
        raise LedgerError("ledger too short to sample evaluation dates")
    rng = np.random.default_rng(seed)
    picks = np.sort(rng.choice(span, size=min(count, span), replace=False))
    return [first + timedelta(days=int(k)) for k in picks]


def evaluate_recurring(
    ledger: Ledger,
    truth: Sequence[PlantedSeries],
    n_dates: int = 25,
    tolerance_days: int = 5,
    seed: int = 0,
    simcfg: SimilarityConfig = DEFAULT,
    extractor: Callable[[Sequence[Transaction], date], list[tuple[tuple[Transaction, ...], date | None]]] | None = None,
) -> RecurringMetrics:
    """Score extraction against planted ground truth at sampled dates.

    An extraction is correct when its supporting transactions belong to one
    planted series and its predicted date is within ``tolerance_days`` of
    that series' next occurrence. Recall counts planted series with at
    least four occurrences by the date and one after it.
    """
    index = _series_index(truth)
    by_id = {p.series_id: p for p in truth}
    if extractor is None:
        def extractor(txs: Sequence[Transaction], d: date):
            return [(r.support, predict_next(r).predicted_date) for r in extract_all_recurring(txs, d, simcfg)]
    dates = sample_dates(ledger, n_dates, seed)
    n_users = len(ledger.users())
    extracted = correct = 0
    errors: list[int] = []
    active = found = 0
    for d in dates:
        hits: set[str] = set()
        for acc in sorted(ledger.accounts):
            txs = [t for t in ledger.account_transactions(acc) if t.date <= d]
            for support, predicted in extractor(txs, d):
                extracted += 1
                sid = _owner(support, index)
                if sid is None:
                    continue
                nxt = _next_true(by_id[sid], d)
                if predicted is None:
                    correct += 1
                    hits.add(sid)
                elif nxt is not None and abs((predicted - nxt).days) <= tolerance_days:
                    correct += 1
                    errors.append(abs((predicted - nxt).days))
                    hits.add(sid)
        for p in truth:
            past = sum(1 for o, _ in p.occurrences if o <= d)
            if past >= 4 and _next_true(p, d) is not None:
                active += 1
                found += p.series_id in hits
    return RecurringMetrics(
        avg_extracted_per_user=extracted / (len(dates) * max(n_users, 1)),
        precision=correct / extracted if extracted else 0.0,
        mean_day_error=float(np.mean(errors)) if errors else 0.0,
        recall=found / active if active else 0.0,
    )


KEYWORD_DESCRIPTION = ("recurring",)
KEYWORD_CATEGORY = ("bill pay", "payroll", "service - insurance", "service - subscription")


def keyword_flag(t: Transaction) -> bool:
    desc, label = t.description.lower(), t.category_label.lower()
    return any(k in desc for k in KEYWORD_DESCRIPTION) or any(k in label for k in KEYWORD_CATEGORY)


def keyword_baseline_recurring(transactions: Iterable[Transaction]) -> list[Transaction]:
    """Transactions flagged by the description and category-label keyword rules."""
    return [t for t in transactions if keyword_flag(t)]


def keyword_extractor(lookback_days: int = 35, simcfg: SimilarityConfig = DEFAULT):
    """Extractor adapter for the keyword rules: one extraction per flagged biller
    seen in the last ``lookback_days``. The rules predict no date, so scoring
    only checks membership in a planted series."""

    def run(txs: Sequence[Transaction], d: date):
        recent = keyword_baseline_recurring(t for t in txs if t.date > d - timedelta(days=lookback_days))
        groups: list[list[Transaction]] = []
        for t in sorted(recent, key=lambda t: (t.date, t.description), reverse=True):
            for g in groups:
                if is_same_biller(t.description, g[0].description, simcfg):
                    g.append(t)
                    break
            else:
                groups.append([t])
        return [(tuple(g), None) for g in groups]

    return run

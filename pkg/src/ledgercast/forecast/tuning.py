"""Grid search for match count, penalty and switch step on held-out training windows."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Iterable, Sequence

import numpy as np

from ..dtw import Corpus
from ..metrics import variance_scale
from ..model import Ledger, LedgerError, Step, build_balance_series
from ..recurring import Frequency, extract_all_recurring
from ..textsim import DEFAULT, SimilarityConfig
from .base import ForecastConfig, ForecastError
from .histavg import hist_avg_forecast
from .subseq import combine, prepare_matches, splice

log = logging.getLogger(__name__)

PAYCHECK = "paycheck"
NON_PAYCHECK = "nonpaycheck"


@dataclass(frozen=True)
class Grids:
    n_matches: tuple[int, ...] = (5, 10, 15, 20, 25)
    penalty: tuple[float, ...] = (0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0)
    switch_step: tuple[int, ...] = tuple(range(32))


@dataclass
class TunedParameters:
    account_class: str
    n_matches: int
    switch_step: int
    penalties: dict[str, float] = field(default_factory=dict)
    held_out_mae: float = float("nan")

    def config_for(self, account_id: str, base: ForecastConfig) -> ForecastConfig:
        return base.with_(
            n_matches=self.n_matches,
            switch_step=min(self.switch_step, base.horizon),
            penalty=self.penalties.get(account_id, base.penalty),
        )


def classify_account(ledger: Ledger, account_id: str, as_of: date, simcfg: SimilarityConfig = DEFAULT) -> str:
    """Paycheck if a semimonthly or biweekly recurring inflow has mean magnitude
    at or above the 75th percentile of the account's other inflows.

    Inflows from the candidate's own payer are left out of the percentile;
    otherwise ordinary pay variation would put the mean paycheck below the
    upper quartile of mostly-paycheck inflows.
    """
    txs = [t for t in ledger.account_transactions(account_id) if t.date <= as_of]
    for r in extract_all_recurring(txs, as_of, simcfg):
        if not (r.is_inflow and r.frequency in (Frequency.SEMIMONTHLY, Frequency.BIWEEKLY)):
            continue
        others = [-t.amount for t in txs if t.amount_cents < 0 and not r.matches(t, simcfg)]
        if not others or -r.mean_amount >= float(np.percentile(others, 75)):
            return PAYCHECK
    return NON_PAYCHECK


def snap_origin(d: date, step: Step) -> date:
    """Latest step boundary on or before ``d`` (Sundays for weekly series)."""
    if step is Step.DAILY:
        return d
    return d - timedelta(days=(d.weekday() + 1) % 7)


def holdout_origins(train_ledger: Ledger, config: ForecastConfig, n_windows: int = 5, stride_days: int = 7) -> list[date]:
    if train_ledger.train_end is None:
        raise LedgerError("training ledger needs train_end")
    step = train_ledger.step
    stride = max(stride_days, step.days)
    last = snap_origin(train_ledger.train_end - timedelta(days=config.horizon * step.days), step)
    return [last - timedelta(days=k * stride) for k in range(n_windows)][::-1]


def tune_parameters(
    train_ledger: Ledger,
    account_ids: Sequence[str],
    config: ForecastConfig,
    grids: Grids = Grids(),
    corpus: Corpus | None = None,
    n_windows: int = 5,
    stride_days: int = 7,
    simcfg: SimilarityConfig = DEFAULT,
    account_class: str = PAYCHECK,
) -> TunedParameters:
    """Minimize held-out MAE (variance-100 scale) inside the training period.

    The match count and switch step are shared by the accounts given; the
    penalty is chosen per account.
    """
    origins = holdout_origins(train_ledger, config, n_windows, stride_days)
    if len(origins) < 3:
        raise LedgerError("tuning needs at least three held-out windows")
    S, step = config.horizon, train_ledger.step
    if corpus is None:
        corpus = Corpus.from_ledger(train_ledger, config.query_len + S, config.query_len, step, simcfg)
    m_max = max(grids.n_matches)

    hist: dict[tuple[str, date], np.ndarray] = {}
    sub: dict[tuple[str, date], dict[tuple[int, float], np.ndarray]] = {}
    truth: dict[tuple[str, date], np.ndarray] = {}
    scale: dict[str, float] = {}
    feasible = 0
    for acc in account_ids:
        if not train_ledger.account_transactions(acc):
            continue
        series = build_balance_series(train_ledger, acc, step)
        f = variance_scale(series.values)
        if f is None:
            log.warning("account %s has a flat training series; skipped in tuning", acc)
            continue
        scale[acc] = f
        for o in origins:
            t = series.index_of(o)
            if t + 1 < config.query_len or t + S >= len(series):
                continue
            feasible += 1
            key = (acc, o)
            truth[key] = series.values[t + 1: t + S + 1]
            txs = [x for x in train_ledger.account_transactions(acc) if x.date <= o]
            recs = extract_all_recurring(txs, o, simcfg)
            try:
                hist[key] = hist_avg_forecast(train_ledger, acc, o, S, recs, simcfg, config.history_days, step).predictions
            except ForecastError:
                pass
            try:
                ms = prepare_matches(train_ledger, acc, o, config, corpus, recs, simcfg, need=m_max, end_before=o)
            except ForecastError:
                continue
            sub[key] = {}
            for m in grids.n_matches:
                for lam in grids.penalty:
                    z, _ = combine(ms, config, m, lam)
                    sub[key][(m, lam)] = ms.stats.invert(z)
    if feasible < 3:
        raise LedgerError("too little training history for three held-out windows")

    def err(key, pred):
        return float(np.mean(np.abs(truth[key] - pred))) * scale[key[0]]

    accs = sorted({k[0] for k in sub})
    best_m, best_score, best_lams = grids.n_matches[0], np.inf, {}
    for m in grids.n_matches:
        lams, scores = {}, []
        for acc in accs:
            keys = [k for k in sub if k[0] == acc]
            per_lam = [(np.mean([err(k, sub[k][(m, lam)]) for k in keys]), lam) for lam in grids.penalty]
            e, lam = min(per_lam)
            lams[acc] = lam
            scores.append(e)
        score = float(np.mean(scores)) if scores else np.inf
        if score < best_score:
            best_m, best_score, best_lams = m, score, lams

    keys = [k for k in truth if k in hist and k in sub]
    best_tau, best_tau_score = grids.switch_step[0], np.inf
    for tau in grids.switch_step:
        tau = min(tau, S)
        if keys:
            score = float(np.mean([err(k, splice(hist[k], sub[k][(best_m, best_lams[k[0]])], tau)) for k in keys]))
        else:
            only_hist = [k for k in truth if k in hist]
            score = float(np.mean([err(k, hist[k]) for k in only_hist])) if tau == S and only_hist else np.inf
        if score < best_tau_score:
            best_tau, best_tau_score = tau, score
    if not np.isfinite(best_tau_score):
        best_tau = min(grids.switch_step[-1], S)
    return TunedParameters(account_class, best_m, best_tau, best_lams, best_tau_score)


def tune_by_class(
    train_ledger: Ledger,
    config: ForecastConfig,
    grids: Grids = Grids(),
    accounts: Iterable[str] | None = None,
    corpus: Corpus | None = None,
    simcfg: SimilarityConfig = DEFAULT,
    **kwargs,
) -> dict[str, TunedParameters]:
    """Classify accounts at the end of training and tune each class separately."""
    if corpus is None:
        corpus = Corpus.from_ledger(train_ledger, config.query_len + config.horizon, config.query_len, train_ledger.step, simcfg)
    accounts = sorted(accounts if accounts is not None else train_ledger.accounts)
    classes: dict[str, list[str]] = {PAYCHECK: [], NON_PAYCHECK: []}
    for acc in accounts:
        classes[classify_account(train_ledger, acc, train_ledger.train_end, simcfg)].append(acc)
    out = {}
    for cls, members in classes.items():
        if members:
            out[cls] = tune_parameters(train_ledger, members, config, grids, corpus, simcfg=simcfg, account_class=cls, **kwargs)
    return out

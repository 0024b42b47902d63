"""Matched-subsequence regression forecaster and its hybrid with HistAvg."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta
from typing import Sequence

import numpy as np

from ..dtw import (
    Corpus,
    LandmarkTemplate,
    MatchedSequence,
    align_to_template,
    build_payday_template,
    subsequence_search,
)
from ..model import Ledger, LedgerError, Standardized, build_balance_series, standardize
from ..recurring import RecurringTransaction, extract_all_recurring
from ..textsim import DEFAULT, SimilarityConfig
from .base import ForecastConfig, ForecastError, ForecastResult, Method, step_weights
from .histavg import hist_avg_forecast
from .solver import RegressionFit, fit_weighted_penalized_nnls


def build_anomaly_penalty(matches: Sequence[MatchedSequence], predict_index: int) -> np.ndarray:
    """Pairwise absolute gaps between the matches' aligned values at one step."""
    v = np.array([m.aligned[predict_index] for m in matches], dtype=float)
    return np.abs(v[:, None] - v[None, :])


@dataclass
class MatchSet:
    account_id: str
    origin: date
    stats: Standardized
    matches: list[MatchedSequence]
    shortfall: bool
    template: LandmarkTemplate


def prepare_matches(
    ledger: Ledger,
    account_id: str,
    origin: date,
    config: ForecastConfig,
    corpus: Corpus,
    recurrings: Sequence[RecurringTransaction] | None = None,
    simcfg: SimilarityConfig = DEFAULT,
    need: int | None = None,
    end_before: date | None = None,
) -> MatchSet:
    """Standardize the query, find and align its matches (steps 1-4)."""
    L, L1, S = config.query_len, config.match_len, config.horizon
    if corpus.window_len != L + S or corpus.norm_len != L:
        raise LedgerError(f"corpus windows must be {L + S} long and normalised on the first {L}")
    view = ledger.truncate(origin)
    series = build_balance_series(view, account_id, corpus_step(corpus, ledger))
    t = series.index_of(origin)
    if t + 1 < L or t >= len(series):
        raise ForecastError(f"{account_id} has fewer than {L} steps of history at {origin}")
    stats = standardize(series.values[t - L + 1: t + 1])
    first = series.date_at(t - L + 1)
    query_lo = first - timedelta(days=series.step.days - 1)
    found = subsequence_search(
        stats.values[:L1],
        corpus,
        need or config.n_matches,
        [(account_id, query_lo, origin)],
        config.dtw,
        end_before=end_before,
    )
    if not found.matches:
        raise ForecastError(f"no matches for {account_id} at {origin}; fall back to HistAvg")
    txs = view.account_transactions(account_id)
    if recurrings is None:
        recurrings = extract_all_recurring(txs, origin, simcfg)
    template = build_payday_template(recurrings, account_id, first, origin, S, series.step, txs, simcfg)
    for m in found.matches:
        m.aligned = align_to_template(m.raw, corpus.source_marks(m), template)
    return MatchSet(account_id, origin, stats, found.matches, found.shortfall, template)


def corpus_step(corpus: Corpus, ledger: Ledger):
    if corpus.series:
        return next(iter(corpus.series.values())).step
    return ledger.step


def combine(ms: MatchSet, config: ForecastConfig, n_matches: int | None = None, penalty: float | None = None) -> tuple[np.ndarray, list[RegressionFit]]:
    """Fit the penalized NNLS on the query and project the horizon (steps 5-6).

    Returns standardized predictions and the fit(s) used.
    """
    L, S = config.query_len, config.horizon
    lam = config.penalty if penalty is None else penalty
    matches = ms.matches[: n_matches or config.n_matches]
    aligned = np.array([m.aligned for m in matches])
    X = aligned[:, :L].T
    F = aligned[:, L: L + S].T
    y = ms.stats.values
    w = step_weights(L, config.match_len)
    if not config.refit_per_step:
        fit = fit_weighted_penalized_nnls(y, X, w, build_anomaly_penalty(matches, L), lam)
        return fit.predict(F), [fit]
    fits = [fit_weighted_penalized_nnls(y, X, w, build_anomaly_penalty(matches, L + s), lam) for s in range(S)]
    return np.array([f.predict(F[s])[0] for s, f in enumerate(fits)]), fits


def subseq_ls_forecast(
    ledger: Ledger,
    account_id: str,
    origin: date,
    config: ForecastConfig,
    corpus: Corpus,
    recurrings: Sequence[RecurringTransaction] | None = None,
    simcfg: SimilarityConfig = DEFAULT,
    end_before: date | None = None,
) -> ForecastResult:
    ms = prepare_matches(ledger, account_id, origin, config, corpus, recurrings, simcfg, end_before=end_before)
    z, fits = combine(ms, config)
    return ForecastResult(
        account_id,
        Method.SUBSEQ_LS,
        origin,
        ms.stats.invert(z),
        {
            "matches": len(ms.matches),
            "shortfall": ms.shortfall,
            "objective": fits[0].objective,
            "paydays": len(ms.template.marks),
            "beta0": fits[0].beta0,
            "beta": fits[0].beta.tolist(),
        },
    )


def splice(head: np.ndarray, tail: np.ndarray, switch_step: int) -> np.ndarray:
    return np.concatenate([np.asarray(head)[:switch_step], np.asarray(tail)[switch_step:]])


def hybrid_forecast(
    ledger: Ledger,
    account_id: str,
    origin: date,
    config: ForecastConfig,
    corpus: Corpus | None,
    recurrings: Sequence[RecurringTransaction] | None = None,
    simcfg: SimilarityConfig = DEFAULT,
    end_before: date | None = None,
) -> ForecastResult:
    """HistAvg for the first ``switch_step`` steps, SubseqLS afterwards."""
    tau, S = config.switch_step, config.horizon
    if recurrings is None:
        recurrings = extract_all_recurring(ledger.truncate(origin).account_transactions(account_id), origin, simcfg)
    parts: dict[str, ForecastResult] = {}
    if tau > 0:
        parts["histavg"] = hist_avg_forecast(ledger, account_id, origin, S, recurrings, simcfg, config.history_days)
    if tau < S:
        if corpus is None:
            raise ForecastError("SubseqLS part of the hybrid needs a corpus")
        parts["subseqls"] = subseq_ls_forecast(ledger, account_id, origin, config, corpus, recurrings, simcfg, end_before)
    if tau == 0:
        preds = parts["subseqls"].predictions
    elif tau == S:
        preds = parts["histavg"].predictions
    else:
        preds = splice(parts["histavg"].predictions, parts["subseqls"].predictions, tau)
    diag = {"switch_step": tau}
    for name, part in parts.items():
        diag.update({f"{name}.{k}": v for k, v in part.diagnostics.items()})
    return ForecastResult(account_id, Method.HYBRID, origin, preds, diag)

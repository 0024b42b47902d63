"""Iterated nearest-neighbour baselines: each step re-matches the rolling query."""

from __future__ import annotations

from datetime import date, timedelta
from typing import Iterable, Sequence

import numpy as np

from ..dtw import Corpus, subsequence_search
from ..model import Ledger, build_balance_series, standardize
from .base import ForecastConfig, ForecastError, ForecastResult, Method


def knn_forecast(
    query: Sequence[float],
    corpus: Corpus,
    config: ForecastConfig,
    k: int | None = None,
    exclusions: Iterable[tuple[str, date, date]] = (),
    end_before: date | None = None,
    account_id: str = "",
    origin: date | None = None,
) -> ForecastResult:
    """Average of the ``k`` best matches' next values, one step at a time.

    ``query`` holds recent raw balances (at least ``match_len`` of them);
    each prediction is appended and the last ``match_len`` values form the
    next query. The corpus must hold windows of ``match_len + 1`` steps
    normalised on their first ``match_len``.
    """
    k = k or config.k_neighbors
    L1 = config.match_len
    if corpus.window_len != L1 + 1 or corpus.norm_len != L1:
        raise ForecastError(f"neighbour corpus must have windows of {L1 + 1} normalised on {L1}")
    history = list(np.asarray(query, dtype=float)[-L1:])
    if len(history) < L1:
        raise ForecastError(f"need {L1} recent values, got {len(history)}")
    exclusions = list(exclusions)
    preds = []
    used = []
    for _ in range(config.horizon):
        st = standardize(history[-L1:])
        found = subsequence_search(st.values, corpus, k, exclusions, config.dtw, end_before=end_before)
        if not found.matches:
            raise ForecastError("no candidate windows in the corpus")
        nxt = float(np.mean([m.raw[L1] for m in found.matches]))
        value = float(st.invert(nxt))
        preds.append(value)
        history.append(value)
        used.append(len(found.matches))
    method = Method.NEAREST_NEIGHBOR if k == 1 else Method.KNN
    return ForecastResult(account_id, method, origin or date.min, np.array(preds), {"k": k, "matches_per_step": used})


def nearest_neighbor_forecast(query, corpus, config, **kwargs) -> ForecastResult:
    return knn_forecast(query, corpus, config, 1, **kwargs)


def neighbor_forecast_at(
    ledger: Ledger,
    account_id: str,
    origin: date,
    config: ForecastConfig,
    corpus: Corpus,
    k: int,
    end_before: date | None = None,
) -> ForecastResult:
    """Ledger-level wrapper: query is the account's balances up to ``origin``."""
    step = next(iter(corpus.series.values())).step if corpus.series else ledger.step
    series = build_balance_series(ledger.truncate(origin), account_id, step)
    t = series.index_of(origin)
    if t + 1 < config.match_len:
        raise ForecastError(f"{account_id} has fewer than {config.match_len} steps at {origin}")
    lo = series.date_at(t - config.match_len + 1) - timedelta(days=step.days - 1)
    res = knn_forecast(
        series.values[: t + 1],
        corpus,
        config,
        k,
        [(account_id, lo, origin)],
        end_before,
        account_id,
        origin,
    )
    return res

"""Historical-average forecaster: baseline daily spend plus scheduled recurring charges."""

from __future__ import annotations

import math
from datetime import date, timedelta
from typing import Sequence

import numpy as np

from ..model import Ledger, Step
from ..recurring import RecurringTransaction, extract_all_recurring, scheduled_occurrences
from ..textsim import DEFAULT, SimilarityConfig
from .base import ForecastError, ForecastResult, Method


def hist_avg_forecast(
    ledger: Ledger,
    account_id: str,
    origin: date,
    horizon: int = 31,
    recurrings: Sequence[RecurringTransaction] | None = None,
    simcfg: SimilarityConfig = DEFAULT,
    history_days: int = 90,
    step: Step | None = None,
) -> ForecastResult:
    """Roll the balance forward by basic spend plus predicted recurring amounts.

    Basic spend is the mean daily net amount over the last ``history_days``
    after dropping recurring transactions and outflows above the 90th
    percentile. Only data up to ``origin`` is read.
    """
    step = step or ledger.step
    view = ledger.truncate(origin)
    txs = view.account_transactions(account_id)
    start = origin - timedelta(days=history_days)
    window = [t for t in txs if start < t.date <= origin]
    if not window:
        raise ForecastError(f"no transactions for {account_id} in the {history_days} days before {origin}")
    if recurrings is None:
        recurrings = extract_all_recurring(txs, origin, simcfg)
    recs = [r for r in recurrings if r.account_id == account_id]
    support = {t for r in recs for t in r.support}
    rest = [t for t in window if t not in support and not any(r.matches(t, simcfg) for r in recs)]
    outflows = [t.amount_cents for t in rest if t.is_outflow]
    if outflows:
        cut = np.percentile(outflows, 90)
        rest = [t for t in rest if not (t.is_outflow and t.amount_cents > cut)]
    n_days = min(history_days, (origin - txs[0].date).days + 1)
    basic = sum(t.amount_cents for t in rest) / n_days / 100.0

    per_step = np.full(horizon, basic * step.days)
    end = origin + timedelta(days=horizon * step.days)
    scheduled = []
    for r in recs:
        for when in scheduled_occurrences(r, origin, end):
            s = math.ceil((when - origin).days / step.days)
            per_step[s - 1] += r.mean_amount
            scheduled.append((when, r.representative_description, r.mean_amount))
    balance = view.accounts[account_id].balance_cents / 100.0
    path = balance - np.cumsum(per_step)
    return ForecastResult(
        account_id,
        Method.HIST_AVG,
        origin,
        path,
        {"basic_spend_per_day": basic, "recurring": len(recs), "scheduled": sorted(scheduled)},
    )

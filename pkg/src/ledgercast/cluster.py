"""Agglomerative DTW clustering of per-user balances and per-cluster category spend."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import date

import numpy as np

from .dtw import DtwConfig, dtw_distance
from .model import Category, Ledger, LedgerError, Step, build_balance_series


class Linkage(enum.Enum):
    COMPLETE = "complete"
    AVERAGE = "average"


@dataclass
class ClusterResult:
    assignments: dict[str, int]
    k: int
    linkage: Linkage
    merge_heights: list[float] = field(default_factory=list)
    category_profiles: dict[int, dict[Category, float]] = field(default_factory=dict)

    def members(self, cluster: int) -> list[str]:
        return sorted(e for e, c in self.assignments.items() if c == cluster)


def user_balance_sequences(ledger: Ledger, start: date, end: date) -> dict[str, np.ndarray]:
    """Daily balances over ``[start, end]`` summed across each user's accounts.

    Only users whose accounts all have transactions on or before ``start``
    (full coverage of the period) are returned.
    """
    out: dict[str, np.ndarray] = {}
    n = (end - start).days + 1
    if n < 1:
        raise LedgerError("empty clustering period")
    for user, accounts in sorted(ledger.users().items()):
        total = np.zeros(n)
        covered = True
        for acc in accounts:
            txs = ledger.account_transactions(acc)
            if not txs or txs[0].date > start or ledger.accounts[acc].as_of < end:
                covered = False
                break
            s = build_balance_series(ledger, acc, Step.DAILY)
            i0 = s.index_of(start)
            total += s.values[i0: i0 + n]
        if covered:
            out[user] = total
    return out


def distance_matrix(sequences: list[np.ndarray], config: DtwConfig) -> np.ndarray:
    n = len(sequences)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = dtw_distance(sequences[i], sequences[j], config)
    return D


def agglomerate(D: np.ndarray, k: int, linkage: Linkage = Linkage.COMPLETE) -> tuple[list[int], list[float]]:
    """Merge the closest pair until ``k`` clusters remain.

    Ties go to the pair whose smaller member index is lowest, then the
    other member. Returns labels numbered by first member and the merge
    heights in order.
    """
    n = len(D)
    if not 1 <= k <= n:
        raise LedgerError(f"cannot form {k} clusters from {n} entities")
    clusters: dict[int, list[int]] = {i: [i] for i in range(n)}
    heights = []
    while len(clusters) > k:
        best = None
        ids = sorted(clusters)
        for a_pos, a in enumerate(ids):
            for b in ids[a_pos + 1:]:
                block = D[np.ix_(clusters[a], clusters[b])]
                d = float(block.max() if linkage is Linkage.COMPLETE else block.mean())
                key = (d, min(clusters[a]), min(clusters[b]))
                if best is None or key < best[0]:
                    best = (key, a, b)
        (d, _, _), a, b = best
        clusters[a] = sorted(clusters[a] + clusters.pop(b))
        heights.append(d)
    labels = [0] * n
    for label, cid in enumerate(sorted(clusters, key=lambda c: min(clusters[c]))):
        for i in clusters[cid]:
            labels[i] = label
    return labels, heights


def cluster_balances(
    ledger: Ledger,
    period: tuple[date, date],
    k: int,
    config: DtwConfig = DtwConfig(2),
    linkage: Linkage = Linkage.COMPLETE,
) -> ClusterResult:
    """Cluster zero-mean per-user balance sequences by banded DTW distance."""
    seqs = user_balance_sequences(ledger, *period)
    if len(seqs) < k:
        raise LedgerError(f"{len(seqs)} users with full coverage; cannot form {k} clusters")
    users = sorted(seqs)
    centered = [seqs[u] - seqs[u].mean() for u in users]
    labels, heights = agglomerate(distance_matrix(centered, config), k, linkage)
    result = ClusterResult(dict(zip(users, labels)), k, linkage, heights)
    result.category_profiles = category_profile(ledger, result.assignments, period)
    return result


def category_profile(
    ledger: Ledger,
    assignments: dict[str, int],
    period: tuple[date, date] | None = None,
) -> dict[int, dict[Category, float]]:
    """Mean over each cluster's users of total spend per category (income negative)."""
    users = ledger.users()
    missing = set(assignments) - set(users)
    if missing:
        raise LedgerError(f"unknown users in assignment: {sorted(missing)}")
    totals: dict[str, dict[Category, float]] = {}
    for user in assignments:
        t = {c: 0.0 for c in Category}
        for acc in users[user]:
            for tx in ledger.account_transactions(acc):
                if period is None or period[0] <= tx.date <= period[1]:
                    t[tx.category] += tx.amount
        totals[user] = t
    out: dict[int, dict[Category, float]] = {}
    for cid in sorted(set(assignments.values())):
        members = [u for u in assignments if assignments[u] == cid]
        out[cid] = {c: float(np.mean([totals[u][c] for u in members])) for c in Category}
    return out

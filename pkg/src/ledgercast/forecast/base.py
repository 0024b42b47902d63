from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Iterable

import numpy as np

from ..dtw import DtwConfig


class Method(enum.Enum):
    HIST_AVG = "histavg"
    SUBSEQ_LS = "subseqls"
    HYBRID = "hybrid"
    NEAREST_NEIGHBOR = "nn"
    KNN = "knn"


class ForecastError(RuntimeError):
    """A forecaster could not produce a prediction for this origin."""


@dataclass(frozen=True)
class ForecastConfig:
    query_len: int = 31
    match_len: int = 20
    horizon: int = 31
    n_matches: int = 10
    penalty: float = 1.0
    switch_step: int = 3
    k_neighbors: int = 10
    history_days: int = 90
    dtw: DtwConfig = field(default_factory=DtwConfig)
    refit_per_step: bool = False

    def __post_init__(self) -> None:
        if not 0 < self.match_len <= self.query_len:
            raise ValueError("need 0 < match_len <= query_len")
        if self.horizon < 1 or self.n_matches < 1 or self.k_neighbors < 1:
            raise ValueError("horizon, n_matches and k_neighbors must be >= 1")
        if self.penalty < 0:
            raise ValueError("penalty must be >= 0")
        if not 0 <= self.switch_step <= self.horizon:
            raise ValueError("switch_step must lie in [0, horizon]")

    def with_(self, **changes) -> ForecastConfig:
        return replace(self, **changes)


@dataclass
class ForecastResult:
    account_id: str
    method: Method
    origin: date
    predictions: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.predictions = np.asarray(self.predictions, dtype=float)
        if not np.all(np.isfinite(self.predictions)):
            raise ForecastError(f"{self.method.value} produced non-finite predictions for {self.account_id}")


FORECAST_HEADER = ["account_id", "method", "origin_date", "step", "predicted_balance"]


def write_forecasts(results: Iterable[ForecastResult], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FORECAST_HEADER)
        for r in results:
            for s, v in enumerate(r.predictions, start=1):
                writer.writerow([r.account_id, r.method.value, r.origin.isoformat(), s, repr(float(v))])


def read_forecasts(path: str | Path) -> dict[tuple[str, str, date], np.ndarray]:
    """Read prediction CSVs (ours or external models') keyed by (method, account, origin)."""
    rows: dict[tuple[str, str, date], dict[int, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            key = (row["method"], row["account_id"], date.fromisoformat(row["origin_date"]))
            rows.setdefault(key, {})[int(row["step"])] = float(row["predicted_balance"])
    return {k: np.array([v[s] for s in sorted(v)]) for k, v in rows.items()}


def step_weights(query_len: int, match_len: int) -> np.ndarray:
    """1 on the matched prefix, 5 after it, 10 on the last query step."""
    w = np.ones(query_len)
    w[match_len:] = 5.0
    w[-1] = 10.0
    return w

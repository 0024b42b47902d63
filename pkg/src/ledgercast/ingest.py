"""Readers and writers for the two supported ledger formats."""

from __future__ import annotations

import csv
import logging
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Mapping

from .model import (
    Account,
    AccountKind,
    Category,
    Ledger,
    LedgerError,
    Step,
    Transaction,
    format_cents,
    to_cents,
    week_end,
)

log = logging.getLogger(__name__)

WAGEGOAL_HEADER = ["account_id", "date", "description", "amount", "category"]
BALANCES_HEADER = ["account_id", "balance", "as_of"]

MIN_SPAN_DAYS = 1461  # four years, leap-safe
PKDD_TRAIN_FRACTION = 4.5 / 6.0

PKDD_CREDIT = {"PRIJEM"}
PKDD_DEBIT = {"VYDAJ", "VYBER"}


class IngestError(LedgerError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(f"row {row}: {message}" if row is not None else message)


def parse_us_date(text: str) -> date:
    return datetime.strptime(text.strip(), "%m/%d/%Y").date()


def format_us_date(d: date) -> str:
    return f"{d.month}/{d.day}/{d.year}"


def parse_pkdd_date(text: str) -> date:
    text = text.strip()
    if len(text) != 6 or not text.isdigit():
        raise ValueError(f"bad YYMMDD date {text!r}")
    yy, mm, dd = int(text[:2]), int(text[2:4]), int(text[4:])
    return date(1900 + yy if yy >= 50 else 2000 + yy, mm, dd)


def load_balances_csv(path: str | Path) -> dict[str, dict]:
    """Read ``account_id,balance,as_of[,user_id,kind]`` into a per-account mapping."""
    out: dict[str, dict] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(BALANCES_HEADER) - set(reader.fieldnames or [])
        if missing:
            raise IngestError(f"balances file lacks columns {sorted(missing)}")
        for rowno, row in enumerate(reader, start=2):
            try:
                as_of = _parse_any_date(row["as_of"])
                out[row["account_id"].strip()] = {
                    "balance_cents": to_cents(row["balance"]),
                    "as_of": as_of,
                    "user_id": (row.get("user_id") or "").strip() or row["account_id"].strip(),
                    "kind": AccountKind((row.get("kind") or "other").strip().lower()),
                }
            except (ValueError, KeyError) as exc:
                raise IngestError(str(exc), rowno) from exc
    return out


def _parse_any_date(text: str) -> date:
    text = text.strip()
    if "/" in text:
        return parse_us_date(text)
    return date.fromisoformat(text)


def load_wagegoal_csv(
    path: str | Path,
    current_balances: Mapping[str, tuple[float | str, date] | dict],
    train_end: date | None = None,
) -> tuple[Ledger, int]:
    """Load a WageGoal-style CSV.

    ``current_balances`` maps account id to ``(balance, as_of)`` or to the
    dicts produced by :func:`load_balances_csv`. Returns the ledger and the
    number of rows whose category label was not recognised (mapped to NA).
    """
    txs: list[Transaction] = []
    unknown = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise IngestError("empty file")
        if [h.strip() for h in header] != WAGEGOAL_HEADER:
            raise IngestError(f"expected header {','.join(WAGEGOAL_HEADER)}, got {','.join(header)}", 1)
        for rowno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise IngestError(f"expected 5 fields, got {len(row)}", rowno)
            acc, day, desc, amount, label = row
            try:
                when = parse_us_date(day)
                cents = to_cents(amount)
            except (ValueError, LedgerError) as exc:
                raise IngestError(str(exc), rowno) from exc
            cat = Category.parse(label)
            if cat is None:
                unknown += 1
                cat = Category.UNLABELED
            txs.append(Transaction(acc.strip(), when, desc, cents, cat, label.strip()))
    if unknown:
        log.warning("%d rows carried unrecognised category labels; mapped to NA", unknown)

    accounts: dict[str, Account] = {}
    for acc_id in sorted({t.account_id for t in txs}):
        if acc_id not in current_balances:
            raise IngestError(f"no current balance for account {acc_id!r}")
        entry = current_balances[acc_id]
        if isinstance(entry, dict):
            accounts[acc_id] = Account(acc_id, entry["user_id"], entry["kind"], entry["balance_cents"], entry["as_of"])
        else:
            value, as_of = entry
            accounts[acc_id] = Account(acc_id, acc_id, AccountKind.OTHER, to_cents(value), as_of)
    return Ledger(accounts, tuple(txs), train_end, Step.DAILY), unknown


def write_wagegoal_csv(ledger: Ledger, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(WAGEGOAL_HEADER)
        for t in ledger.transactions:
            label = t.category_label or ("" if t.category is Category.UNLABELED else t.category.value)
            writer.writerow([t.account_id, format_us_date(t.date), t.description, format_cents(t.amount_cents), label])


def write_balances_csv(ledger: Ledger, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BALANCES_HEADER + ["user_id", "kind"])
        for acc in sorted(ledger.accounts.values(), key=lambda a: a.account_id):
            writer.writerow([acc.account_id, format_cents(acc.balance_cents), acc.as_of.isoformat(), acc.user_id, acc.kind.value])


def load_pkdd99(path: str | Path, min_span_days: int = MIN_SPAN_DAYS) -> Ledger:
    """Load the PKDD'99 ``trans.asc`` file.

    Debits become positive amounts and credits negative. Accounts spanning
    fewer than ``min_span_days`` are dropped. Each account's balance is
    anchored so its weekly series starts at 0, and ``train_end`` splits the
    global date range 4.5 : 1.5.
    """
    rows: dict[str, list[tuple[date, int]]] = {}
    with open(path, newline="", encoding="utf-8", errors="replace") as fh:
        reader = csv.reader(fh, delimiter=";")
        header = next(reader, None)
        if header is None:
            raise IngestError("empty file")
        cols = {h.strip().strip('"'): i for i, h in enumerate(header)}
        for need in ("account_id", "date", "type", "amount"):
            if need not in cols:
                raise IngestError(f"missing column {need!r}", 1)
        for rowno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                acc = row[cols["account_id"]].strip().strip('"')
                when = parse_pkdd_date(row[cols["date"]].strip('"'))
                kind = row[cols["type"]].strip().strip('"').upper()
                cents = to_cents(row[cols["amount"]].strip('"'))
            except (IndexError, ValueError, LedgerError) as exc:
                raise IngestError(str(exc), rowno) from exc
            if cents < 0:
                raise IngestError("amount must be unsigned", rowno)
            if kind in PKDD_CREDIT:
                cents = -cents
            elif kind not in PKDD_DEBIT:
                raise IngestError(f"unknown direction code {kind!r}", rowno)
            rows.setdefault(acc, []).append((when, cents))
    if not rows:
        raise IngestError("no transactions")

    lo = min(d for v in rows.values() for d, _ in v)
    hi = max(d for v in rows.values() for d, _ in v)
    accounts: dict[str, Account] = {}
    txs: list[Transaction] = []
    for acc_id in sorted(rows):
        items = rows[acc_id]
        first = min(d for d, _ in items)
        last = max(d for d, _ in items)
        if (last - first).days < min_span_days:
            continue
        # weekly series value at step 0 is 0, so the current balance is the
        # negated sum of everything dated after the first week
        first_week = week_end(first)
        after = sum(c for d, c in items if d > first_week)
        accounts[acc_id] = Account(acc_id, acc_id, AccountKind.OTHER, -after, last)
        txs.extend(Transaction(acc_id, d, "", c) for d, c in items)
    train_end = lo + timedelta(days=round((hi - lo).days * PKDD_TRAIN_FRACTION))
    ledger = Ledger(accounts, tuple(txs), None, Step.WEEKLY)
    if ledger.transactions:
        span_lo, span_hi = ledger.date_range()
        train_end = min(max(train_end, span_lo), span_hi)
        ledger = Ledger(accounts, ledger.transactions, train_end, Step.WEEKLY)
    log.info("pkdd99: kept %d of %d accounts", len(accounts), len(rows))
    return ledger


def split_point(ledger: Ledger, split: float | date) -> date:
    lo, hi = ledger.date_range()
    if isinstance(split, date):
        cut = split
    else:
        if not 0.0 < float(split) < 1.0:
            raise LedgerError(f"train fraction must lie in (0, 1), got {split}")
        cut = lo + timedelta(days=int(round((hi - lo).days * float(split))))
    if cut <= lo:
        raise LedgerError("split at or before data start leaves an empty training period")
    if cut >= hi:
        raise LedgerError(f"split {cut} at or after data end {hi} leaves an empty test period")
    return cut


def split_train_test(ledger: Ledger, split: float | date) -> tuple[Ledger, Ledger]:
    """Partition transactions at a date (or fraction of the date range).

    The training view holds everything dated on or before the split with
    balances rolled back to it; the test view holds the rest.
    """
    cut = split_point(ledger, split)
    train = ledger.truncate(cut)
    train = Ledger(train.accounts, train.transactions, cut, ledger.step)
    return train, ledger.after(cut)
